#include "pcsim/newton.hpp"

#include <Eigen/QR>

#include <cmath>
#include <sstream>

namespace pcsim {

namespace {

bool try_residual(const ResidualFn& residual, const Vec& x, Vec& r) {
    try {
        residual(x, r);
    } catch (const CplGuardError&) {
        return false;
    }
    return r.allFinite();
}

}  // namespace

NewtonResult solve_newton(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
                          const NewtonOptions& opts) {
    NewtonResult out;
    out.x = std::move(x0);
    Vec r;
    if (!try_residual(residual, out.x, r)) {
        throw ConvergenceError("equilibrium solver: residual not evaluable at the initial guess");
    }
    double norm = r.lpNorm<Eigen::Infinity>();
    Vec trial_x;
    Vec trial_r;
    for (int it = 0; it < opts.max_iter; ++it) {
        if (norm < opts.tol) {
            out.residual = norm;
            out.iterations = it;
            return out;
        }
        const Mat j = jacobian(out.x);
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(j);
        const Vec step = cod.solve(-r);
        if (!step.allFinite()) {
            throw ConvergenceError("equilibrium solver: singular Jacobian");
        }

        double lambda = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            trial_x = out.x + lambda * step;
            if (try_residual(residual, trial_x, trial_r)) {
                const double trial_norm = trial_r.lpNorm<Eigen::Infinity>();
                if (trial_norm < norm || trial_norm < opts.tol) {
                    out.x = trial_x;
                    r = trial_r;
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << "equilibrium solver stalled at residual " << norm << " after " << it << " iterations";
            throw ConvergenceError(msg.str());
        }
    }
    if (norm < opts.tol) {
        out.residual = norm;
        out.iterations = opts.max_iter;
        return out;
    }
    std::ostringstream msg;
    msg << "equilibrium solver did not converge in " << opts.max_iter << " iterations (residual " << norm << ")";
    throw ConvergenceError(msg.str());
}

}  // namespace pcsim
