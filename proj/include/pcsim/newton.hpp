#pragma once

#include "pcsim/common.hpp"

#include <functional>

namespace pcsim {

struct NewtonOptions {
    double tol = 1e-9;  // on the residual infinity-norm
    int max_iter = 100;
};

struct NewtonResult {
    Vec x;
    double residual = 0.0;
    int iterations = 0;
};

using ResidualFn = std::function<void(const Vec& x, Vec& r)>;
using JacobianFn = std::function<Mat(const Vec& x)>;

/// Gauss-Newton with minimum-norm steps (complete orthogonal decomposition) and
/// backtracking on the residual norm. Handles over-determined consistent systems
/// and rank-deficient Jacobians. A residual that throws during a trial step is
/// treated as a rejected step. Throws ConvergenceError after max_iter.
NewtonResult solve_newton(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
                          const NewtonOptions& opts = {});

}  // namespace pcsim
