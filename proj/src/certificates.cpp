#include "pcsim/certificates.hpp"

#include <algorithm>
#include <cmath>

namespace pcsim {

double krasovskii_storage(const GridModel& model, const Vec& xdot) {
    require_size(xdot, model.state_dim(), "state derivative");
    return 0.5 * xdot.cwiseAbs2().dot(model.hessian_diagonal());
}

double krasovskii_dissipation(const GridModel& model, const Vec& xdot, const Vec& q, const LoadSet& loads,
                              const Vec& r_eff) {
    const Index n = model.nu();
    const Index m = model.mu();
    require_size(xdot, model.state_dim(), "state derivative");
    require_size(q, n, "charge");
    const GridParameters& p = model.params();
    double w = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double il = 1.0 / p.L(i);
        const double ic = 1.0 / p.C(i);
        const double cpl = p.C(i) * p.C(i) * loads.P(i) / (q(i) * q(i));
        w += r_eff(i) * il * il * xdot(i) * xdot(i);
        w += (loads.G(i) - cpl) * ic * ic * xdot(n + i) * xdot(n + i);
    }
    for (Index k = 0; k < m; ++k) {
        const double ilt = 1.0 / p.Lt(k);
        w += p.Rt(k) * ilt * ilt * xdot(2 * n + k) * xdot(2 * n + k);
    }
    return w;
}

double shifted_storage(const GridModel& model, const Vec& x, const Vec& x_star) {
    const Vec e = x - x_star;
    return model.hamiltonian(x) - model.hamiltonian(x_star) - model.grad_hamiltonian(x_star).dot(e);
}

double shifted_dissipation(const GridModel& model, const Vec& e, const Vec& x_star, const LoadSet& loads,
                           const Vec& r_eff) {
    const Index n = model.nu();
    const Index m = model.mu();
    require_size(e, model.state_dim(), "state error");
    require_size(x_star, model.state_dim(), "reference state");
    const GridParameters& p = model.params();
    double w = 0.0;
    for (Index i = 0; i < n; ++i) {
        const double il = 1.0 / p.L(i);
        const double ic = 1.0 / p.C(i);
        const double qs = x_star(n + i);
        const double q = e(n + i) + qs;
        const double cpl = p.C(i) * p.C(i) * loads.P(i) / (q * qs);
        w += r_eff(i) * il * il * e(i) * e(i);
        w += (loads.G(i) - cpl) * ic * ic * e(n + i) * e(n + i);
    }
    for (Index k = 0; k < m; ++k) {
        const double ilt = 1.0 / p.Lt(k);
        w += p.Rt(k) * ilt * ilt * e(2 * n + k) * e(2 * n + k);
    }
    return w;
}

double krasovskii_domain_margin(const GridModel& model, const Vec& q, const LoadSet& loads, const Vec& gamma) {
    const GridParameters& p = model.params();
    double margin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < model.nu(); ++i) {
        const double cpl = p.C(i) * p.C(i) * loads.P(i) / (q(i) * q(i));
        margin = std::min(margin, loads.G(i) - cpl - gamma(i));
    }
    return margin;
}

double shifted_domain_margin(const GridModel& model, const Vec& q, const Vec& q_star, const LoadSet& loads,
                             const Vec& gamma) {
    const GridParameters& p = model.params();
    double margin = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < model.nu(); ++i) {
        const double cpl = p.C(i) * p.C(i) * loads.P(i) / (q(i) * q_star(i));
        margin = std::min(margin, loads.G(i) - cpl - gamma(i));
    }
    return margin;
}

Vec auto_gamma(const GridModel& model, const std::vector<std::pair<Vec, LoadSet>>& q_and_loads) {
    if (q_and_loads.empty()) {
        throw ParameterError("Gamma auto-selection needs at least one operating point");
    }
    const Vec zero = Vec::Zero(model.nu());
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& [q, loads] : q_and_loads) {
        worst = std::min(worst, krasovskii_domain_margin(model, q, loads, zero));
    }
    if (!(worst > 0.0)) {
        throw ParameterError("operating point violates the conductance domain condition (margin " +
                             std::to_string(worst) + " S); no positive Gamma exists");
    }
    return Vec::Constant(model.nu(), 0.5 * worst);
}

// ---------------------------------------------------------------------------

CertificateEvaluator::CertificateEvaluator(const GridClosedLoop& loop) : loop_(&loop) {
    r_eff_ = loop.model().params().R - loop.controller().ubar_feedback();
}

KrasovskiiPoint CertificateEvaluator::krasovskii(const Vec& z, const Vec& dz, const LoadSet& loads) const {
    const GridModel& model = loop_->model();
    const Controller& ctrl = loop_->controller();
    const Index n = model.nu();
    const Index nx = loop_->plant_dim();
    const Index ns = loop_->controller_dim();

    x_ = z.head(nx);
    xd_ = dz.head(nx);
    s_ = z.tail(ns);
    sd_ = dz.tail(ns);
    model.output(x_, y_);
    model.output(xd_, yd_);
    ctrl.output_rate(sd_, yd_, ud_);
    model.jacobian_times(x_, loads, xd_, xdd_);
    xdd_.head(n) += ud_;

    const Vec& hess = model.hessian_diagonal();
    KrasovskiiPoint out;
    out.V_K = 0.5 * xd_.cwiseAbs2().dot(hess);
    double dv = xd_.cwiseProduct(hess).dot(xdd_);
    out.W_K = krasovskii_dissipation(model, xd_, x_.segment(n, n), loads, r_eff_);
    out.V_bar = out.V_K;
    out.W_total = out.W_K;

    const Mat& wl = ctrl.coupling();
    tmp_.noalias() = wl * y_;
    out.V_bar += 0.5 * y_.dot(tmp_);
    dv += yd_.dot(tmp_);

    if (has_damping(ctrl.variant())) {
        const Vec ey = ctrl.edge_weight() * yd_;
        out.W_total += ey.dot(ctrl.spec().G * ey);
    }
    if (ctrl.rho_offset() >= 0) {
        const Mat& k = ctrl.spec().K;
        const Vec gap = s_.segment(ctrl.rho_offset(), n) - y_;
        const Vec kgap = k * gap;
        out.V_bar += 0.5 * gap.dot(kgap);
        dv += (sd_.segment(ctrl.rho_offset(), n) - yd_).dot(kgap);
        out.W_total += gap.dot(kgap);
    }
    out.dV_bar = dv;
    out.residual = out.dV_bar + out.W_total;
    return out;
}

ShiftedPoint CertificateEvaluator::shifted(const Vec& z, const Vec& dz, const Vec& z_star,
                                           const LoadSet& loads) const {
    const GridModel& model = loop_->model();
    const Controller& ctrl = loop_->controller();
    if (!is_xi_form(ctrl.variant())) {
        throw ParameterError("shifted certificate needs a xi-form controller");
    }
    const Index n = model.nu();
    const Index nx = loop_->plant_dim();
    const Index nc = ctrl.channels();

    x_ = z.head(nx);
    xd_ = dz.head(nx);
    const Vec x_star = z_star.head(nx);
    const Vec e = x_ - x_star;
    const Vec& hess = model.hessian_diagonal();

    ShiftedPoint out;
    out.H_s = shifted_storage(model, x_, x_star);
    double dv = e.cwiseProduct(hess).dot(xd_);
    out.W_s = shifted_dissipation(model, e, x_star, loads, r_eff_);
    out.V_bar = out.H_s;
    out.W_total = out.W_s;

    const Index xo = nx + ctrl.xi_offset();
    const Vec dxi = z.segment(xo, nc) - z_star.segment(xo, nc);
    out.V_bar += 0.5 * dxi.squaredNorm();
    dv += dxi.dot(dz.segment(xo, nc));

    model.output(x_, y_);
    if (has_damping(ctrl.variant())) {
        const Vec ey = ctrl.edge_weight() * y_;
        out.W_total += ey.dot(ctrl.spec().G * ey);
    }
    if (ctrl.rho_offset() >= 0) {
        const Index ro = nx + ctrl.rho_offset();
        const Vec y_star = model.output(x_star);
        const Vec gap = z.segment(ro, n) - y_star;
        const Vec kgap = ctrl.spec().K * gap;
        out.V_bar += 0.5 * gap.dot(kgap);
        dv += dz.segment(ro, n).dot(kgap);
        out.W_total += gap.dot(kgap);
    }
    out.dV_bar = dv;
    out.residual = out.dV_bar + out.W_total;
    return out;
}

// ---------------------------------------------------------------------------

void InequalityMonitor::add(double t, double residual, double storage) {
    ++count_;
    const double normalized = residual / (1.0 + std::abs(storage));
    if (!(normalized <= rel_tol_)) {
        ++violations_;
    }
    if (residual > max_residual_ || std::isnan(residual)) {
        max_residual_ = residual;
    }
    if (normalized > max_norm_ || std::isnan(normalized)) {
        max_norm_ = normalized;
        worst_t_ = t;
    }
}

void EnergyBalance::restart(double t, double storage, double dissipation) {
    active_ = true;
    v0_ = storage;
    integral_ = 0.0;
    w_prev1_ = dissipation;
    w_prev2_ = dissipation;
    t_prev2_ = t;
    j_ = 0;
    vmax_ = std::max(vmax_, std::abs(storage));
}

void EnergyBalance::add(double t, double storage, double dissipation) {
    if (!active_) {
        restart(t, storage, dissipation);
        return;
    }
    ++j_;
    vmax_ = std::max(vmax_, std::abs(storage));
    if (j_ % 2 == 1) {
        w_prev2_ = w_prev1_;
        w_prev1_ = dissipation;
        return;
    }
    // Simpson panel over [t_prev2, t] with midpoint value w_prev1.
    integral_ += (t - t_prev2_) / 6.0 * (w_prev2_ + 4.0 * w_prev1_ + dissipation);
    t_prev2_ = t;
    w_prev1_ = dissipation;
    w_prev2_ = dissipation;
    const double err = std::abs(storage - v0_ + integral_);
    max_abs_ = std::max(max_abs_, err);
    max_norm_ = std::max(max_norm_, err / (1.0 + vmax_));
    ++checks_;
}

ExponentialBound exponential_bound_check(const std::vector<double>& t, const std::vector<double>& v_k,
                                         const std::vector<double>& w, double bound0, double rel_tol) {
    ExponentialBound out;
    if (t.empty() || t.size() != v_k.size() || t.size() != w.size()) {
        throw DimensionError("exponential bound check needs equally long, non-empty series");
    }
    const double vmax = *std::max_element(v_k.begin(), v_k.end());
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (v_k[i] > 1e-12 * vmax && vmax > 0.0) {
            c = std::min(c, w[i] / v_k[i]);
        }
    }
    if (!std::isfinite(c)) c = 0.0;
    c = std::max(c, 0.0);
    out.c = c;
    const double t0 = t.front();
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double bound = std::exp(-c * (t[i] - t0)) * bound0;
        const double lhs = 2.0 * v_k[i];
        const double ratio = bound > 0.0 ? lhs / bound : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        out.max_ratio = std::max(out.max_ratio, ratio);
    }
    out.holds = out.max_ratio <= 1.0 + rel_tol;
    return out;
}

}  // namespace pcsim
