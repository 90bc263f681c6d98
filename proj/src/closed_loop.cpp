#include "pcsim/closed_loop.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace pcsim {

GridClosedLoop::GridClosedLoop(const GridModel& model, const Controller& controller)
    : model_(&model), ctrl_(&controller), nx_(model.state_dim()), ns_(controller.state_dim()) {
    if (controller.nu() != model.nu()) {
        throw DimensionError("controller node count " + std::to_string(controller.nu()) +
                             " does not match the grid (" + std::to_string(model.nu()) + ")");
    }
    x_.resize(nx_);
    s_.resize(ns_);
    y_.resize(model.nu());
    u_.resize(model.nu());
    dx_.resize(nx_);
    ds_.resize(ns_);
    loads_ = model.loads_at(0.0);
}

void GridClosedLoop::rhs(const Vec& z, const LoadSet& loads, Vec& dz, double time) const {
    x_ = z.head(nx_);
    s_ = z.tail(ns_);
    model_->output(x_, y_);
    ctrl_->output(s_, y_, u_);
    model_->vector_field(x_, u_, loads, dx_, time);
    ctrl_->derivative(s_, y_, ds_);
    dz.resize(nx_ + ns_);
    dz.head(nx_) = dx_;
    dz.tail(ns_) = ds_;
}

void GridClosedLoop::rhs(double t, const Vec& z, Vec& dz) const {
    model_->loads_at(t, loads_);
    rhs(z, loads_, dz, t);
}

Mat GridClosedLoop::jacobian(const Vec& z, const LoadSet& loads) const {
    require_size(z, dim(), "closed-loop state");
    const Index n = model_->nu();
    const Mat jf = model_->jacobian(z.head(nx_), loads);
    // Cy = [diag(1/L) 0 0]
    Mat cy = Mat::Zero(n, nx_);
    cy.diagonal() = model_->params().L.cwiseInverse();

    Mat j = Mat::Zero(dim(), dim());
    j.topLeftCorner(nx_, nx_) = jf;
    j.block(0, 0, n, nx_) += ctrl_->Du() * cy;
    j.block(0, nx_, n, ns_) = ctrl_->Cu();
    j.block(nx_, 0, ns_, nx_) = ctrl_->Bc() * cy;
    j.bottomRightCorner(ns_, ns_) = ctrl_->Ac();
    return j;
}

Vec GridClosedLoop::input(const Vec& z) const {
    require_size(z, dim(), "closed-loop state");
    const Vec y = model_->output(Vec(z.head(nx_)));
    return ctrl_->output(Vec(z.tail(ns_)), y);
}

Vec GridClosedLoop::output(const Vec& z) const {
    require_size(z, dim(), "closed-loop state");
    return model_->output(Vec(z.head(nx_)));
}

Equilibrium solve_grid_equilibrium(const GridClosedLoop& loop, const LoadSet& loads, const Vec& s_ref,
                                   double v_guess, const NewtonOptions& opts) {
    const GridModel& model = loop.model();
    const Controller& ctrl = loop.controller();
    const Index n = model.nu();
    const Index ns = loop.controller_dim();
    const Vec sref = s_ref.size() == 0 ? Vec::Zero(ns) : s_ref;
    require_size(sref, ns, "reference controller state");
    const Mat w = ctrl.conserved_functionals();
    const Vec w_target = w * sref;
    const Index nw = w.rows();

    // Initial guess.
    const GridParameters& p = model.params();
    Vec z0 = Vec::Zero(loop.dim());
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        total += GridModel::load_current(v_guess, loads.G(i), loads.I(i), loads.P(i));
    }
    const Vec share = Vec::Constant(n, total / static_cast<double>(n));
    z0.segment(0, n) = p.L.cwiseProduct(share);
    z0.segment(n, n) = p.C * v_guess;
    z0.tail(ns) = ctrl.consensus_state(share);
    // Conserved functionals hold their reference values from the start.
    if (nw > 0) {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(w);
        Vec s0 = z0.tail(ns);
        s0 += cod.solve(w_target - w * s0);
        z0.tail(ns) = s0;
    }

    Vec dz(loop.dim());
    auto residual = [&](const Vec& z, Vec& r) {
        loop.rhs(z, loads, dz);
        r.resize(loop.dim() + nw);
        r.head(loop.dim()) = dz;
        if (nw > 0) {
            r.tail(nw) = w * z.tail(ns) - w_target;
        }
    };
    auto jacobian = [&](const Vec& z) {
        Mat j(loop.dim() + nw, loop.dim());
        j.topRows(loop.dim()) = loop.jacobian(z, loads);
        if (nw > 0) {
            j.bottomRows(nw).setZero();
            j.bottomRightCorner(nw, ns) = w;
        }
        return j;
    };
    const NewtonResult res = solve_newton(residual, jacobian, z0, opts);
    return {res.x, res.residual, res.iterations};
}

double spectral_radius(const Mat& a) {
    if (a.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(a, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace pcsim
