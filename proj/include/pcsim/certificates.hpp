#pragma once

#include "pcsim/closed_loop.hpp"
#include "pcsim/common.hpp"
#include "pcsim/grid_model.hpp"

#include <limits>
#include <vector>

namespace pcsim {

// Plant-level storage and dissipation. `r_eff` is the filter resistance seen by the
// certificate: R minus the state-feedback part of u_bar (the feedback is part of the plant).

/// V_K = 1/2 xdot^T Hess xdot.
double krasovskii_storage(const GridModel& model, const Vec& xdot);
/// W_K = sum r_eff/L^2 phidot^2 + sum (G - C^2 P / q^2)/C^2 qdot^2 + sum Rt/Lt^2 phitdot^2.
double krasovskii_dissipation(const GridModel& model, const Vec& xdot, const Vec& q, const LoadSet& loads,
                              const Vec& r_eff);

/// Bregman divergence H(x) - H(x*) - grad H(x*)^T (x - x*), evaluated literally.
double shifted_storage(const GridModel& model, const Vec& x, const Vec& x_star);
/// W_s(e) with q-block e_q^2/C^2 (G - C^2 P / (q q*)), q = e_q + q*.
double shifted_dissipation(const GridModel& model, const Vec& e, const Vec& x_star, const LoadSet& loads,
                           const Vec& r_eff);

/// min_i (G_i - C_i^2 P_i / q_i^2 - gamma_i).
double krasovskii_domain_margin(const GridModel& model, const Vec& q, const LoadSet& loads, const Vec& gamma);
/// min_i (G_i - C_i^2 P_i / (q_i q*_i) - gamma_i).
double shifted_domain_margin(const GridModel& model, const Vec& q, const Vec& q_star, const LoadSet& loads,
                             const Vec& gamma);

/// Gamma = 1/2 min over the operating points of the Gamma-free Krasovskii margin, times 1.
/// Throws ParameterError if some operating point already violates the domain condition.
Vec auto_gamma(const GridModel& model, const std::vector<std::pair<Vec, LoadSet>>& q_and_loads);

/// Pointwise value of the composite Krasovskii storage and its exact time derivative.
struct KrasovskiiPoint {
    double V_K = 0.0;
    double W_K = 0.0;
    double V_bar = 0.0;    // V_K + 1/2 y^T M^T L M y (+ 1/2 |rho - y|_K^2)
    double dV_bar = 0.0;   // chain rule with xddot = J xdot + g udot
    double W_total = 0.0;  // W_K plus controller dissipation
    double residual = 0.0; // dV_bar + W_total (zero up to roundoff)
};

struct ShiftedPoint {
    double H_s = 0.0;
    double W_s = 0.0;
    double V_bar = 0.0;    // H_s + 1/2 |xi - xi*|^2 (+ 1/2 |rho - y*|_K^2)
    double dV_bar = 0.0;
    double W_total = 0.0;
    double residual = 0.0;
};

/// Evaluates both certificates at closed-loop points (z, dz). Loads must be the
/// (locally constant) loads used to compute dz.
class CertificateEvaluator {
public:
    explicit CertificateEvaluator(const GridClosedLoop& loop);

    /// Controller-aware Krasovskii certificate (all six variants).
    KrasovskiiPoint krasovskii(const Vec& z, const Vec& dz, const LoadSet& loads) const;
    /// Shifted certificate relative to the closed-loop equilibrium z_star. Requires a xi-form controller.
    ShiftedPoint shifted(const Vec& z, const Vec& dz, const Vec& z_star, const LoadSet& loads) const;

    const Vec& effective_resistance() const noexcept { return r_eff_; }

private:
    const GridClosedLoop* loop_;
    Vec r_eff_;
    mutable Vec x_, xd_, xdd_, s_, sd_, y_, yd_, ud_, tmp_;
};

/// Streaming check of residual <= rel_tol * (1 + |V|).
class InequalityMonitor {
public:
    explicit InequalityMonitor(double rel_tol = 1e-6) : rel_tol_(rel_tol) {}

    void add(double t, double residual, double storage);
    void mark_not_applicable(const char* reason) { na_reason_ = reason; }

    bool applicable() const noexcept { return count_ > 0; }
    bool passed() const noexcept { return count_ > 0 && violations_ == 0; }
    long long count() const noexcept { return count_; }
    long long violations() const noexcept { return violations_; }
    double max_residual() const noexcept { return max_residual_; }
    /// max of residual / (1 + |V|): compare against rel_tol.
    double max_normalized() const noexcept { return max_norm_; }
    double worst_time() const noexcept { return worst_t_; }
    double tolerance() const noexcept { return rel_tol_; }
    const char* not_applicable_reason() const noexcept { return na_reason_; }

private:
    double rel_tol_;
    long long count_ = 0;
    long long violations_ = 0;
    double max_residual_ = -std::numeric_limits<double>::infinity();
    double max_norm_ = -std::numeric_limits<double>::infinity();
    double worst_t_ = 0.0;
    const char* na_reason_ = "";
};

/// Integral form of the dissipation equality on a constant-load segment:
/// V(t) - V(t_a) + int_{t_a}^{t} W ds = 0, with the integral by composite Simpson on the grid.
/// Independent of the pointwise chain-rule derivative.
class EnergyBalance {
public:
    explicit EnergyBalance(double rel_tol = 1e-5) : rel_tol_(rel_tol) {}

    /// Start a new segment (load discontinuity or first point).
    void restart(double t, double storage, double dissipation);
    void add(double t, double storage, double dissipation);

    bool passed() const noexcept { return checks_ > 0 && max_norm_ <= rel_tol_; }
    long long checks() const noexcept { return checks_; }
    /// max |V(t) - V(t_a) + int W| / (1 + max |V|).
    double max_normalized() const noexcept { return max_norm_; }
    double tolerance() const noexcept { return rel_tol_; }

private:
    double rel_tol_;
    bool active_ = false;
    double v0_ = 0.0;
    double integral_ = 0.0;
    double w_prev2_ = 0.0, w_prev1_ = 0.0;
    double t_prev2_ = 0.0;
    long long j_ = 0;
    double vmax_ = 0.0;
    double max_abs_ = 0.0;
    double max_norm_ = 0.0;
    long long checks_ = 0;
};

/// Numerical check of the exponential velocity bound
///   |xdot(t)|^2_Hess <= exp(-c (t - t0)) * bound0,
/// with c = min over samples of W / V_K (samples with V_K > 1e-12 max V_K).
struct ExponentialBound {
    double c = 0.0;
    double max_ratio = 0.0;  // max over samples of |xdot|^2 / (exp(-c t) bound0)
    bool holds = false;
};
ExponentialBound exponential_bound_check(const std::vector<double>& t, const std::vector<double>& v_k,
                                         const std::vector<double>& w, double bound0, double rel_tol = 1e-6);

}  // namespace pcsim
