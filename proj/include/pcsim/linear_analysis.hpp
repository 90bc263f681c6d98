#pragma once

#include "pcsim/common.hpp"
#include "pcsim/controllers.hpp"

#include <random>
#include <string>

namespace pcsim {

/// x' = A x + B u + d, y = H x, optionally with a certificate pair (P, Q).
struct LinearPlant {
    Mat A, B, H;
    Vec d;
    Mat P, Q;  // empty when not supplied

    Index n() const noexcept { return A.rows(); }
    Index m() const noexcept { return B.cols(); }
    bool has_certificate() const noexcept { return P.size() > 0 && Q.size() > 0; }
    void validate() const;
};

struct PassivityCheck {
    bool certified = false;
    double lmi_max_eig = 0.0;  // lambda_max(P A + A^T P + Q)
    double pb_error = 0.0;     // max |P B - H^T|
    double tolerance = 0.0;
    Vec witness;               // eigenvector of the violated LMI, empty otherwise
    std::string reason;
};

/// Checks P A + A^T P <= -Q and P B = H^T with tolerance 1e-9 (1 + norm).
/// Throws ParameterError when P or Q is missing or not positive definite.
PassivityCheck check_passivity(const LinearPlant& plant);

/// Steady state of the consensus closed loop.
struct ConsensusValue {
    double alpha = 0.0;
    Vec x_star;
    Vec coupling_star;   // M^T E xi* (for M = I this is E xi*); steady controller input is u_bar - coupling_star
    Vec u_star;          // total steady input
    double cond_gain = 0.0;  // condition number of H A^-1 B
};

/// Closed form of the consensus value with M-weighted consensus M y* = alpha 1:
///   alpha = -w^T T^-1 H A^-1 (B u_bar + d) / (w^T T^-1 w), T = H A^-1 B, w = M^-1 1,
///   x* = A^-1 B T^-1 (alpha w + H A^-1 d_eff) - A^-1 d_eff,  d_eff = B u_bar + d.
/// For M = I this is the textbook formula. Throws ParameterError for singular A or T.
ConsensusValue consensus_value(const LinearPlant& plant, const Vec& u_bar = {}, const Mat& M = {});

/// Change of alpha caused by a constant u_bar: -w^T u_bar / (w^T T^-1 w).
double ubar_alpha_shift(const LinearPlant& plant, const Vec& u_bar, const Mat& M = {});

/// Random plant with a certificate by construction: A = S - N (S skew, N = Z Z^T / n + 0.5 I),
/// B Gaussian, H = B^T, P = I, Q = N, d Gaussian.
LinearPlant random_certified_plant(Index n, Index m, std::mt19937_64& rng);

/// Linear plant in feedback with a controller. z = (x, s).
class LinearClosedLoop {
public:
    LinearClosedLoop(const LinearPlant& plant, const Controller& controller);

    Index dim() const noexcept { return plant_->n() + ctrl_->state_dim(); }
    void rhs(double t, const Vec& z, Vec& dz) const;
    Mat jacobian() const { return jac_; }
    const Vec& offset() const noexcept { return off_; }

private:
    const LinearPlant* plant_;
    const Controller* ctrl_;
    Mat jac_;
    Vec off_;
};

struct LinearSimResult {
    Vec x_final;
    Vec y_final;
    Vec u_final;
    Vec s_final;
    double t_final = 0.0;
    long long steps = 0;
    double step = 0.0;
    double derivative_norm = 0.0;  // ||z'||_inf at the final point
    ConsensusValue oracle;
    double alpha_error = 0.0;      // max |M y_final - alpha 1|, in the M-weighted output
    double x_error = 0.0;          // max |x_final - x*|
};

struct LinearSimOptions {
    double max_time = 1e5;
    double derivative_tol = 1e-13;  // stop when ||z'||_inf <= tol * (1 + ||z||_inf)
    double step_factor = 1.0;       // h = step_factor / spectral radius
    Vec x0;                          // default zero
    Vec s0;                          // default zero
};

/// Simulates the closed loop with fixed-step RK4 until it is stationary and compares
/// with the closed form. Throws ConvergenceError if the horizon is exhausted.
LinearSimResult simulate_and_compare(const LinearPlant& plant, const Controller& controller,
                                     const LinearSimOptions& opts = {});

/// Parses "a b; c d" (rows separated by ';' or newlines, entries by spaces or commas).
Mat parse_matrix(const std::string& text);

}  // namespace pcsim
