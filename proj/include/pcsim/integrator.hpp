#pragma once

#include "pcsim/common.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>
#include <vector>

namespace pcsim {

/// Uniform grid t_k = t0 + k h on [t0, t_end]. Breakpoints (discontinuities of the
/// right-hand side in t) must fall on the grid; the integrator then never straddles one.
struct Rk4Grid {
    double t0 = 0.0;
    double t_end = 1.0;
    double h = 1e-3;
    std::vector<double> breakpoints;
};

/// Number of steps of the grid; throws if t_end or a breakpoint is off-grid.
inline long long rk4_step_count(const Rk4Grid& g) {
    if (!(g.h > 0.0) || !std::isfinite(g.h)) {
        throw ParameterError("step size must be positive and finite");
    }
    if (!(g.t_end >= g.t0)) {
        throw ParameterError("t_end must not precede t0");
    }
    const double span = g.t_end - g.t0;
    const double ratio = span / g.h;
    const long long n = std::llround(ratio);
    if (std::abs(ratio - static_cast<double>(n)) > 1e-6) {
        std::ostringstream msg;
        msg << "horizon " << span << " s is not an integer multiple of the step " << g.h << " s";
        throw ParameterError(msg.str());
    }
    for (double bp : g.breakpoints) {
        if (bp <= g.t0 || bp >= g.t_end) continue;
        const double r = (bp - g.t0) / g.h;
        if (std::abs(r - std::round(r)) > 1e-6) {
            std::ostringstream msg;
            msg << "breakpoint t = " << bp << " s does not lie on the integration grid (h = " << g.h << " s)";
            throw ParameterError(msg.str());
        }
    }
    return n;
}

/// Classical fixed-step RK4.
///
/// `rhs(t, z, dz)` writes dz/dt; `observer(k, t, z, dz)` is called on every grid point
/// (k = 0..n) with the derivative at that point and returns false to stop early.
/// The observed derivative is reused as the first stage of the next step. The step that
/// ends on a breakpoint evaluates its last stage just before the breakpoint, so the
/// right-hand side is sampled on one side of each discontinuity only.
/// Returns the number of steps taken; `z` holds the final state.
template <class Rhs, class Observer>
long long integrate_rk4(Rhs&& rhs, Vec& z, const Rk4Grid& grid, Observer&& observer) {
    const long long n = rk4_step_count(grid);
    const double h = grid.h;
    const Index dim = z.size();

    std::vector<long long> bp_steps;
    std::vector<double> bp_times;
    for (double bp : grid.breakpoints) {
        if (bp <= grid.t0 || bp >= grid.t_end) continue;
        bp_steps.push_back(std::llround((bp - grid.t0) / h));
        bp_times.push_back(bp);
    }
    std::size_t next_bp = 0;

    Vec k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
    double t = grid.t0;
    rhs(t, z, k1);
    if (!k1.allFinite() || !z.allFinite()) {
        throw NumericError("non-finite state or derivative at the initial time");
    }
    if constexpr (std::is_same_v<std::invoke_result_t<Observer, long long, double, const Vec&, const Vec&>, bool>) {
        if (!observer(0LL, t, static_cast<const Vec&>(z), static_cast<const Vec&>(k1))) return 0;
    } else {
        observer(0LL, t, static_cast<const Vec&>(z), static_cast<const Vec&>(k1));
    }

    for (long long k = 0; k < n; ++k) {
        double t_next = (k + 1 == n) ? grid.t_end : grid.t0 + static_cast<double>(k + 1) * h;
        double t_last_stage = t_next;
        while (next_bp < bp_steps.size() && bp_steps[next_bp] < k + 1) ++next_bp;
        if (next_bp < bp_steps.size() && bp_steps[next_bp] == k + 1) {
            t_next = bp_times[next_bp];
            t_last_stage = std::nextafter(t_next, -std::numeric_limits<double>::infinity());
        }
        const double t_mid = t + 0.5 * h;

        tmp = z + (0.5 * h) * k1;
        rhs(t_mid, tmp, k2);
        tmp = z + (0.5 * h) * k2;
        rhs(t_mid, tmp, k3);
        tmp = z + h * k3;
        rhs(t_last_stage, tmp, k4);
        z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t_next;

        rhs(t, z, k1);
        if (!z.allFinite() || !k1.allFinite()) {
            std::ostringstream msg;
            msg << "non-finite state or derivative at t = " << t << " s (step " << k + 1 << ")";
            throw NumericError(msg.str());
        }
        if constexpr (std::is_same_v<std::invoke_result_t<Observer, long long, double, const Vec&, const Vec&>, bool>) {
            if (!observer(k + 1, t, static_cast<const Vec&>(z), static_cast<const Vec&>(k1))) return k + 1;
        } else {
            observer(k + 1, t, static_cast<const Vec&>(z), static_cast<const Vec&>(k1));
        }
    }
    return n;
}

/// Sampled trajectory: every `every`-th grid point plus the final one.
struct SampledPath {
    std::vector<double> t;
    std::vector<Vec> z;
    std::vector<Vec> dz;
};

template <class Rhs>
SampledPath integrate_rk4_recorded(Rhs&& rhs, Vec z0, const Rk4Grid& grid, long long every = 1) {
    if (every < 1) {
        throw ParameterError("recording interval must be >= 1");
    }
    const long long n = rk4_step_count(grid);
    SampledPath out;
    integrate_rk4(rhs, z0, grid, [&](long long k, double t, const Vec& z, const Vec& dz) {
        if (k % every == 0 || k == n) {
            out.t.push_back(t);
            out.z.push_back(z);
            out.dz.push_back(dz);
        }
    });
    return out;
}

}  // namespace pcsim
