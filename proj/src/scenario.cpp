#include "pcsim/scenario.hpp"

#include "pcsim/integrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace pcsim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<LoadDisturbance> load_step_terms() {
    const double dp[4] = {4.0e3, 1.0e3, 1.0e3, -4.0e3};
    std::vector<LoadDisturbance> terms;
    for (Index i = 0; i < 4; ++i) {
        LoadDisturbance d;
        d.node = i;
        d.channel = LoadChannel::Power;
        d.shape = DisturbanceShape::Step;
        d.onset = 5.0;
        d.amplitude = dp[i];
        terms.push_back(d);
    }
    return terms;
}

bool persistent_active(const DisturbanceProfile& prof, double t) {
    return std::any_of(prof.terms().begin(), prof.terms().end(), [t](const LoadDisturbance& d) {
        return d.shape == DisturbanceShape::PersistentSinusoid && d.amplitude != 0.0 && d.onset <= t;
    });
}

LoadSet steady_loads(const ScenarioSpec& spec, double t) {
    LoadSet l = spec.disturbance.steady_part(t, spec.topology.nu);
    l.G += spec.params.loads.G;
    l.I += spec.params.loads.I;
    l.P += spec.params.loads.P;
    return l;
}

double reference_voltage(const ControllerSpec& c) {
    if (c.u_bar_mode == UBarMode::VoltageRegulating) return c.v_ref;
    if (c.u_bar_mode == UBarMode::Constant && c.u_bar_value.size() > 0) return c.u_bar_value.mean();
    return c.v_ref;
}

std::vector<double> segment_starts(const ScenarioSpec& spec) {
    std::vector<double> starts{0.0};
    for (double bp : spec.disturbance.breakpoints()) {
        if (bp > 0.0 && bp < spec.t_end) starts.push_back(bp);
    }
    return starts;
}

/// Segment references. The step-part equilibrium is solved on every segment; it doubles
/// as the shifted reference only where the loads settle to constants.
std::vector<SegmentReference> build_references(const ScenarioSpec& spec, const GridClosedLoop& loop) {
    std::vector<SegmentReference> refs;
    const double v_guess = reference_voltage(spec.controller);
    for (double ts : segment_starts(spec)) {
        SegmentReference r;
        r.t_start = ts;
        r.loads = steady_loads(spec, ts);
        r.constant = !spec.disturbance.time_varying_at(ts);
        r.has_limit = !persistent_active(spec.disturbance, ts);
        const Equilibrium eq = solve_grid_equilibrium(loop, r.loads, {}, v_guess);
        r.z_nominal = eq.z;
        r.residual = eq.residual;
        r.iterations = eq.iterations;
        if (r.has_limit) r.z_star = eq.z;
        refs.push_back(std::move(r));
    }
    return refs;
}

GridModel make_model(const ScenarioSpec& spec) {
    GridModel model(spec.topology, spec.params, spec.disturbance, spec.additive);
    model.set_cpl_guard_voltage(spec.cpl_guard);
    return model;
}

std::string fmt_time(double t) {
    std::ostringstream s;
    s << t;
    return s.str();
}

}  // namespace

double ScenarioSpec::step_time() const {
    const std::vector<double> bp = disturbance.breakpoints();
    return bp.empty() ? kNaN : bp.front();
}

ScenarioSpec scenario_preset(int id) {
    ScenarioSpec s;
    s.id = id;
    s.topology = Topology::four_node_ring();
    s.params = GridParameters::four_node_defaults();
    const Index channels = static_cast<Index>(s.topology.comm_edges.size());
    s.controller = ControllerSpec::microgrid_defaults(ControllerVariant::ShiftedXi, s.topology.nu, channels);
    s.disturbance = DisturbanceProfile(load_step_terms());

    LoadDisturbance osc;
    osc.node = 2;
    osc.channel = LoadChannel::Power;
    osc.onset = 5.0;
    osc.amplitude = 100.0;
    osc.frequency = 4.0;

    switch (id) {
        case 1:
            s.name = "constant loads, load step";
            break;
        case 2:
            s.name = "load step with decaying load oscillation";
            osc.shape = DisturbanceShape::ConvergingSinusoid;
            osc.decay = 0.25;
            s.disturbance.add(osc);
            break;
        case 3:
            s.name = "load step with persistent load oscillation";
            osc.shape = DisturbanceShape::PersistentSinusoid;
            s.disturbance.add(osc);
            break;
        case 4:
            s.name = "weighted current sharing, load step";
            s.controller.M(2, 2) = 80.0;
            break;
        default:
            throw ParameterError("unknown scenario " + std::to_string(id) + " (expected 1..4)");
    }
    return s;
}

long long default_downsample(long long steps) {
    return std::max<long long>(1, (steps + 19999) / 20000);
}

std::vector<SegmentReference> scenario_equilibria(const ScenarioSpec& spec) {
    const GridModel model = make_model(spec);
    const Controller ctrl(spec.controller, spec.topology.comm_edges, spec.topology.nu, spec.params.R);
    const GridClosedLoop loop(model, ctrl);
    return build_references(spec, loop);
}

Summary summarize(const Trajectory& traj, double step_time) {
    Summary s;
    s.rows = traj.rows.size();
    if (traj.rows.empty()) return s;
    const TrajectoryRow& last = traj.rows.back();
    const double t_end = last.t;
    s.t_final = t_end;
    s.terminal_consensus_error = last.consensus_error;
    s.terminal_voltage_avg = last.voltage_avg;
    s.terminal_currents = last.I;
    s.current_ratios = last.I / last.I(0);

    double peak = -1.0, final2 = -1.0;
    Vec lo, hi;
    double mk = std::numeric_limits<double>::infinity();
    double ms = std::numeric_limits<double>::infinity();
    for (const TrajectoryRow& r : traj.rows) {
        if (!std::isnan(step_time) && r.t >= step_time && r.t <= step_time + 0.5) {
            peak = std::max(peak, r.consensus_error);
        }
        if (r.t >= t_end - 2.0) final2 = std::max(final2, r.consensus_error);
        if (r.t >= t_end - 1.0) {
            if (lo.size() == 0) {
                lo = r.I;
                hi = r.I;
            } else {
                lo = lo.cwiseMin(r.I);
                hi = hi.cwiseMax(r.I);
            }
        }
        if (!std::isnan(r.margin_K)) mk = std::min(mk, r.margin_K);
        if (!std::isnan(r.margin_s)) ms = std::min(ms, r.margin_s);
    }
    if (peak >= 0.0) s.peak_consensus_error_post_step = peak;
    if (final2 >= 0.0) s.max_consensus_error_final_2s = final2;
    if (lo.size() > 0) s.current_peak_to_peak_final_1s = (hi - lo).maxCoeff();
    if (std::isfinite(mk)) s.min_margin_K = mk;
    if (std::isfinite(ms)) s.min_margin_s = ms;
    return s;
}

ScenarioResult run_scenario(const ScenarioSpec& spec) {
    const auto wall0 = std::chrono::steady_clock::now();
    ScenarioResult res;
    res.spec = spec;

    const GridModel model = make_model(spec);
    const Controller ctrl(spec.controller, spec.topology.comm_edges, spec.topology.nu, spec.params.R);
    const GridClosedLoop loop(model, ctrl);
    const Index n = model.nu();

    res.references = build_references(spec, loop);
    for (const SegmentReference& r : res.references) {
        {
            res.certificates.max_equilibrium_residual = std::max(res.certificates.max_equilibrium_residual, r.residual);
        }
    }
    if (!res.references.front().constant) {
        res.warnings.push_back("loads vary in time from t = 0; the run starts at the equilibrium of their step part");
    }

    // Gamma.
    CertificateReport& cert = res.certificates;
    if (spec.certificates.gamma) {
        cert.gamma = *spec.certificates.gamma;
        require_size(cert.gamma, n, "Gamma diagonal");
    } else {
        std::vector<std::pair<Vec, LoadSet>> points;
        for (const SegmentReference& r : res.references) {
            points.emplace_back(r.z_nominal.segment(n, n), r.loads);
        }
        try {
            cert.gamma = auto_gamma(model, points);
        } catch (const ParameterError& e) {
            cert.gamma = Vec::Zero(n);
            res.warnings.push_back(std::string("Gamma auto-selection failed: ") + e.what());
        }
    }

    Vec z = res.references.front().z_nominal;
    {
        const Mat j = loop.jacobian(z, model.loads_at(0.0));
        res.stiffness_index = spec.dt * spectral_radius(j);
        if (res.stiffness_index > 2.0) {
            std::ostringstream w;
            w << "step " << spec.dt << " s is close to the RK4 stability limit (h * spectral radius = "
              << res.stiffness_index << " > 2)";
            res.warnings.push_back(w.str());
        }
    }

    const Rk4Grid grid{0.0, spec.t_end, spec.dt, spec.disturbance.breakpoints()};
    const long long steps = rk4_step_count(grid);
    const long long every = spec.downsample > 0 ? spec.downsample : default_downsample(steps);
    const long long stride = std::max<long long>(1, spec.certificates.stride);
    res.downsample = every;

    cert.krasovskii_enabled = spec.certificates.krasovskii;
    cert.shifted_enabled = spec.certificates.shifted && is_xi_form(ctrl.variant());
    if (spec.certificates.shifted && !cert.shifted_enabled) {
        cert.shifted_note = "shifted certificate needs a xi-form controller";
    }
    for (const SegmentReference& r : res.references) {
        if (!r.constant) {
            cert.krasovskii_note += "loads vary in time from t = " + fmt_time(r.t_start) +
                                    " s; pointwise check skipped there. ";
            if (r.has_limit) {
                cert.shifted_note += "time-varying equilibrium from t = " + fmt_time(r.t_start) +
                                     " s; H_s logged against the limit equilibrium, check skipped. ";
            } else {
                cert.shifted_note += "not applicable from t = " + fmt_time(r.t_start) +
                                     " s: time-varying equilibrium without a constant limit. ";
            }
        }
    }
    for (std::string* note : {&cert.krasovskii_note, &cert.shifted_note}) {
        while (!note->empty() && note->back() == ' ') note->pop_back();
    }

    const CertificateEvaluator eval(loop);
    const double t_step = spec.step_time();
    const double t_end = spec.t_end;
    GridMetrics& met = res.metrics;
    met.steps = steps;
    res.trajectory.nu = n;
    res.trajectory.rows.reserve(static_cast<std::size_t>(steps / every + 2));

    LoadSet loads = model.loads_at(0.0);
    Vec y(n), v(n), q(n), u(n);
    Vec i_lo, i_hi;
    std::size_t seg = 0;
    bool new_segment = true;
    long long seg_k0 = 0;
    double peak = -1.0, final2 = -1.0;

    auto observer = [&](long long k, double t, const Vec& zz, const Vec& dz) {
        while (seg + 1 < res.references.size() && t >= res.references[seg + 1].t_start) {
            ++seg;
            new_segment = true;
            seg_k0 = k;
        }
        const SegmentReference& ref = res.references[seg];
        model.loads_at(t, loads);
        for (Index i = 0; i < n; ++i) {
            y(i) = zz(i) / spec.params.L(i);
            q(i) = zz(n + i);
            v(i) = q(i) / spec.params.C(i);
        }
        const double cons = ctrl.consensus_error(y);
        const double vavg = v.mean();
        met.min_voltage = std::min(met.min_voltage, v.minCoeff());
        if (!std::isnan(t_step) && t >= t_step && t <= t_step + 0.5) peak = std::max(peak, cons);
        if (t >= t_end - 2.0) final2 = std::max(final2, cons);
        if (t >= t_end - 1.0) {
            if (i_lo.size() == 0) {
                i_lo = y;
                i_hi = y;
            } else {
                i_lo = i_lo.cwiseMin(y);
                i_hi = i_hi.cwiseMax(y);
            }
        }
        const double mk = krasovskii_domain_margin(model, q, loads, cert.gamma);
        met.min_margin_K = std::min(met.min_margin_K, mk);
        double ms = kNaN;
        if (ref.z_star.size() && ref.has_limit) {
            ms = shifted_domain_margin(model, q, ref.z_star.segment(n, n), loads, cert.gamma);
            met.min_margin_s = std::min(met.min_margin_s, ms);
        }

        const bool record = (k % every == 0) || k == steps;
        const bool cadence = ((k - seg_k0) % stride == 0) || new_segment;
        double vk = kNaN, wk = kNaN, hs = kNaN;
        if (cert.krasovskii_enabled && (record || cadence)) {
            const KrasovskiiPoint kp = eval.krasovskii(zz, dz, loads);
            vk = kp.V_K;
            wk = kp.W_K;
            if (cadence && ref.constant) {
                cert.krasovskii.add(t, kp.residual, kp.V_bar);
                if (new_segment) {
                    cert.krasovskii_balance.restart(t, kp.V_bar, kp.W_total);
                } else {
                    cert.krasovskii_balance.add(t, kp.V_bar, kp.W_total);
                }
            }
        }
        if (cert.shifted_enabled && ref.has_limit && ref.z_star.size() && (record || cadence)) {
            const ShiftedPoint sp = eval.shifted(zz, dz, ref.z_star, ref.constant ? loads : ref.loads);
            hs = sp.H_s;
            if (cadence && ref.constant) {
                cert.shifted.add(t, sp.residual, sp.V_bar);
                if (new_segment) {
                    cert.shifted_balance.restart(t, sp.V_bar, sp.W_total);
                } else {
                    cert.shifted_balance.add(t, sp.V_bar, sp.W_total);
                }
            }
        }

        if (record) {
            TrajectoryRow row;
            row.t = t;
            row.V = v;
            row.I = y;
            loop.controller().output(zz.tail(loop.controller_dim()), y, u);
            row.u = u;
            row.y = y;
            row.consensus_error = cons;
            row.voltage_avg = vavg;
            row.V_K = vk;
            row.W_K = wk;
            row.H_s = hs;
            row.margin_K = mk;
            row.margin_s = ms;
            row.z = zz;
            res.trajectory.rows.push_back(std::move(row));
        }
        if (k == steps) {
            met.terminal_consensus_error = cons;
            met.terminal_voltage_avg = vavg;
        }
        new_segment = false;
    };

    integrate_rk4([&](double t, const Vec& zz, Vec& dz) { loop.rhs(t, zz, dz); }, z, grid, observer);

    if (peak >= 0.0) met.peak_consensus_error_post_step = peak;
    if (final2 >= 0.0) met.max_consensus_error_final_2s = final2;
    if (i_lo.size()) met.current_peak_to_peak_final_1s = (i_hi - i_lo).maxCoeff();
    if (!std::isfinite(met.min_margin_s)) met.min_margin_s = kNaN;

    res.summary = summarize(res.trajectory, t_step);
    res.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
}

FormEquivalence compare_controller_forms(const ScenarioSpec& spec) {
    ControllerSpec xi_spec = spec.controller;
    xi_spec.variant = ControllerVariant::ShiftedXi;
    ControllerSpec int_spec = spec.controller;
    int_spec.variant = spec.controller.consensus_subset.empty() ? ControllerVariant::IntegralLaplacian
                                                                : ControllerVariant::KrasovskiiWeighted;
    const GridModel model = make_model(spec);
    const Index n = model.nu();
    const Controller c_xi(xi_spec, spec.topology.comm_edges, n, spec.params.R);
    const Controller c_int(int_spec, spec.topology.comm_edges, n, spec.params.R);
    const GridClosedLoop l_xi(model, c_xi);
    const GridClosedLoop l_int(model, c_int);

    ScenarioSpec xs = spec;
    xs.controller = xi_spec;
    const std::vector<SegmentReference> refs = build_references(xs, l_xi);
    const Vec& zx = refs.front().z_nominal;
    const Index nx = model.state_dim();
    const Index da = l_int.dim();
    const Index db = l_xi.dim();

    Vec z(da + db);
    z.head(nx) = zx.head(nx);
    z.segment(nx, n) = c_xi.Cu() * zx.tail(c_xi.state_dim());  // u_int(0) = -M^T E xi(0)
    z.tail(db) = zx;

    Vec a(da), b(db), fa(da), fb(db), ya(n), yb(n), ua(n), ub(n);
    auto rhs = [&](double t, const Vec& zz, Vec& dz) {
        a = zz.head(da);
        b = zz.tail(db);
        l_int.rhs(t, a, fa);
        l_xi.rhs(t, b, fb);
        dz.resize(da + db);
        dz.head(da) = fa;
        dz.tail(db) = fb;
    };
    FormEquivalence out;
    const Rk4Grid grid{0.0, spec.t_end, spec.dt, spec.disturbance.breakpoints()};
    out.steps = rk4_step_count(grid);
    const Vec inv_l = spec.params.L.cwiseInverse();
    integrate_rk4(rhs, z, grid, [&](long long, double, const Vec& zz, const Vec&) {
        ya = zz.head(n).cwiseProduct(inv_l);
        yb = zz.segment(da, n).cwiseProduct(inv_l);
        c_int.output(zz.segment(nx, c_int.state_dim()), ya, ua);
        c_xi.output(zz.segment(da + nx, c_xi.state_dim()), yb, ub);
        out.max_input_difference = std::max(out.max_input_difference, (ua - ub).cwiseAbs().maxCoeff());
    });
    ya = z.head(n).cwiseProduct(inv_l);
    yb = z.segment(da, n).cwiseProduct(inv_l);
    out.terminal_consensus_value_integral = (c_int.weight() * ya).mean();
    out.terminal_consensus_value_xi = (c_xi.weight() * yb).mean();
    return out;
}

}  // namespace pcsim
