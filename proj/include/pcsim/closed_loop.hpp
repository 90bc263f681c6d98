#pragma once

#include "pcsim/common.hpp"
#include "pcsim/controllers.hpp"
#include "pcsim/grid_model.hpp"
#include "pcsim/newton.hpp"

namespace pcsim {

/// Grid plant in feedback with a controller. Closed-loop state z = (x, s).
/// Holds references: the model and controller must outlive it. The right-hand side
/// uses internal scratch buffers, so one instance must not be shared across threads.
class GridClosedLoop {
public:
    GridClosedLoop(const GridModel& model, const Controller& controller);

    const GridModel& model() const noexcept { return *model_; }
    const Controller& controller() const noexcept { return *ctrl_; }
    Index plant_dim() const noexcept { return nx_; }
    Index controller_dim() const noexcept { return ns_; }
    Index dim() const noexcept { return nx_ + ns_; }

    /// Closed-loop derivative at time t with the disturbance-profile loads.
    void rhs(double t, const Vec& z, Vec& dz) const;
    /// Closed-loop derivative with explicit loads.
    void rhs(const Vec& z, const LoadSet& loads, Vec& dz, double time = 0.0) const;

    /// Analytic closed-loop Jacobian [J_f + g Du Cy, g Cu; Bc Cy, Ac].
    Mat jacobian(const Vec& z, const LoadSet& loads) const;

    /// Input u applied at closed-loop state z.
    Vec input(const Vec& z) const;
    /// Output y = phi ./ L.
    Vec output(const Vec& z) const;

private:
    const GridModel* model_;
    const Controller* ctrl_;
    Index nx_;
    Index ns_;
    mutable Vec x_, s_, y_, u_, dx_, ds_;
    mutable LoadSet loads_;
};

struct Equilibrium {
    Vec z;                 // closed-loop state (x*, s*)
    double residual = 0.0;  // infinity-norm of the stacked residual
    int iterations = 0;
};

/// Newton solve of the closed-loop steady state under constant loads. The controller's
/// conserved functionals W (W^T [Ac Bc] = 0) are pinned to W^T s_ref, which selects the
/// equilibrium reached from any initial controller state with the same invariants
/// (s_ref defaults to zero). Initial guess: all voltages at `v_guess`, equal current
/// shares, no line flux, controller at consensus.
Equilibrium solve_grid_equilibrium(const GridClosedLoop& loop, const LoadSet& loads,
                                   const Vec& s_ref = {}, double v_guess = 380.0,
                                   const NewtonOptions& opts = {});

/// Spectral radius of a square matrix.
double spectral_radius(const Mat& a);

}  // namespace pcsim
