#include "pcsim/report.hpp"

#include "pcsim/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pcsim {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double num_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return kNaN;
    return j.at(key).get<double>();
}

json vec_json(const Vec& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

Vec vec_from(const json& j, const char* key) {
    if (!j.contains(key)) return {};
    const json& a = j.at(key);
    Vec v(static_cast<Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Index>(i)) = a[i].is_null() ? kNaN : a[i].get<double>();
    return v;
}

bool same(double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || std::memcmp(&a, &b, sizeof a) == 0;
}

std::string fmt(double v, int prec = 6) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

CriterionCheck check(int id, std::string name, bool pass, std::string detail) {
    return {id, std::move(name), pass, std::move(detail)};
}

CriterionCheck certificate_check(int id, const char* name, const InequalityMonitor& m, bool enabled) {
    if (!enabled) return check(id, name, false, "certificate disabled");
    if (!m.applicable()) return check(id, name, false, "no applicable grid points");
    return check(id, name, m.passed(),
                 "max residual/(1+|V|) = " + fmt(m.max_normalized()) + " (tol " + fmt(m.tolerance()) + "), " +
                     std::to_string(m.violations()) + " violations at " + std::to_string(m.count()) + " points");
}

json monitor_json(const InequalityMonitor& m, bool enabled, const std::string& note) {
    json j;
    j["enabled"] = enabled;
    j["applicable"] = m.applicable();
    j["passed"] = m.passed();
    j["points"] = m.count();
    j["violations"] = m.violations();
    j["max_residual"] = num(m.max_residual());
    j["max_normalized_residual"] = num(m.max_normalized());
    j["worst_time"] = m.worst_time();
    j["tolerance"] = m.tolerance();
    j["note"] = note;
    return j;
}

json balance_json(const EnergyBalance& b) {
    return {{"checks", b.checks()}, {"max_normalized_error", b.max_normalized()}, {"tolerance", b.tolerance()},
            {"within_tolerance", b.passed()}};
}

}  // namespace

std::vector<CriterionCheck> scenario_criteria(const ScenarioResult& r) {
    const GridMetrics& m = r.metrics;
    const CertificateReport& c = r.certificates;
    std::vector<CriterionCheck> out;
    switch (r.spec.id) {
        case 1: {
            const double dv = std::abs(m.terminal_voltage_avg - 380.0);
            out.push_back(check(1, "load step: current sharing and voltage average",
                                m.terminal_consensus_error < 0.01 && dv < 0.5 && r.runtime_s < 30.0,
                                "consensus error " + fmt(m.terminal_consensus_error) + " A (< 0.01), |V_avg - 380| " +
                                    fmt(dv) + " V (< 0.5), runtime " + fmt(r.runtime_s, 3) + " s (< 30)"));
            out.push_back(certificate_check(5, "Krasovskii dissipation equality", c.krasovskii, c.krasovskii_enabled));
            CriterionCheck s = certificate_check(6, "shifted dissipation inequality", c.shifted, c.shifted_enabled);
            s.pass = s.pass && c.max_equilibrium_residual < 1e-9;
            s.detail += ", equilibrium residual " + fmt(c.max_equilibrium_residual) + " (< 1e-9)";
            out.push_back(s);
            out.push_back(check(10, "domain margin positive", m.min_margin_K > 0.0,
                                "min margin " + fmt(m.min_margin_K) + " S"));
            break;
        }
        case 2:
            out.push_back(check(3, "decaying oscillation: consensus and settled currents",
                                m.terminal_consensus_error < 0.01 && m.current_peak_to_peak_final_1s < 0.02,
                                "consensus error " + fmt(m.terminal_consensus_error) +
                                    " A (< 0.01), last-second peak-to-peak " +
                                    fmt(m.current_peak_to_peak_final_1s) + " A (< 0.02)"));
            break;
        case 3: {
            const bool persists = r.spec.disturbance.has_persistent_variation();
            out.push_back(check(4, "persistent oscillation: consensus error decays",
                                persists && m.max_consensus_error_final_2s < 0.01 * m.peak_consensus_error_post_step,
                                "final 2 s max " + fmt(m.max_consensus_error_final_2s) + " A vs 1% of post-step peak " +
                                    fmt(m.peak_consensus_error_post_step) + " A" +
                                    (persists ? "" : ", but no persistent oscillation configured")));
            break;
        }
        case 4: {
            const Vec& i = r.summary.terminal_currents;
            const double ratio = i(2) / i(0);
            const double spread = std::max({std::abs(i(0) - i(1)), std::abs(i(0) - i(3)), std::abs(i(1) - i(3))});
            out.push_back(check(2, "weighted sharing I3 = 1.25 I1",
                                std::abs(ratio - 1.25) <= 1e-3 && spread < 0.01,
                                "I3/I1 = " + fmt(ratio, 9) + " (1.25 +- 1e-3), max |I1,I2,I4 difference| " + fmt(spread) +
                                    " A (< 0.01)"));
            break;
        }
        default:
            if (c.krasovskii_enabled && c.krasovskii.applicable()) {
                out.push_back(certificate_check(0, "Krasovskii dissipation equality", c.krasovskii, true));
            }
            if (c.shifted_enabled && c.shifted.applicable()) {
                out.push_back(certificate_check(0, "shifted dissipation inequality", c.shifted, true));
            }
            break;
    }
    return out;
}

json summary_to_json(const Summary& s) {
    json j;
    j["rows"] = s.rows;
    j["t_final"] = num(s.t_final);
    j["terminal_consensus_error"] = num(s.terminal_consensus_error);
    j["terminal_voltage_avg"] = num(s.terminal_voltage_avg);
    j["terminal_currents"] = vec_json(s.terminal_currents);
    j["current_ratios"] = vec_json(s.current_ratios);
    j["peak_consensus_error_post_step"] = num(s.peak_consensus_error_post_step);
    j["max_consensus_error_final_2s"] = num(s.max_consensus_error_final_2s);
    j["current_peak_to_peak_final_1s"] = num(s.current_peak_to_peak_final_1s);
    j["min_margin_K"] = num(s.min_margin_K);
    j["min_margin_s"] = num(s.min_margin_s);
    return j;
}

Summary summary_from_json(const json& j) {
    Summary s;
    s.rows = j.value("rows", std::size_t{0});
    s.t_final = num_from(j, "t_final");
    s.terminal_consensus_error = num_from(j, "terminal_consensus_error");
    s.terminal_voltage_avg = num_from(j, "terminal_voltage_avg");
    s.terminal_currents = vec_from(j, "terminal_currents");
    s.current_ratios = vec_from(j, "current_ratios");
    s.peak_consensus_error_post_step = num_from(j, "peak_consensus_error_post_step");
    s.max_consensus_error_final_2s = num_from(j, "max_consensus_error_final_2s");
    s.current_peak_to_peak_final_1s = num_from(j, "current_peak_to_peak_final_1s");
    s.min_margin_K = num_from(j, "min_margin_K");
    s.min_margin_s = num_from(j, "min_margin_s");
    return s;
}

bool summaries_identical(const Summary& a, const Summary& b, std::string* diff) {
    auto fail = [&](const char* field) {
        if (diff) *diff = field;
        return false;
    };
    if (a.rows != b.rows) return fail("rows");
    const std::pair<const char*, std::pair<double, double>> scalars[] = {
        {"t_final", {a.t_final, b.t_final}},
        {"terminal_consensus_error", {a.terminal_consensus_error, b.terminal_consensus_error}},
        {"terminal_voltage_avg", {a.terminal_voltage_avg, b.terminal_voltage_avg}},
        {"peak_consensus_error_post_step", {a.peak_consensus_error_post_step, b.peak_consensus_error_post_step}},
        {"max_consensus_error_final_2s", {a.max_consensus_error_final_2s, b.max_consensus_error_final_2s}},
        {"current_peak_to_peak_final_1s", {a.current_peak_to_peak_final_1s, b.current_peak_to_peak_final_1s}},
        {"min_margin_K", {a.min_margin_K, b.min_margin_K}},
        {"min_margin_s", {a.min_margin_s, b.min_margin_s}},
    };
    for (const auto& [name, v] : scalars) {
        if (!same(v.first, v.second)) return fail(name);
    }
    auto same_vec = [](const Vec& x, const Vec& y) {
        if (x.size() != y.size()) return false;
        for (Index i = 0; i < x.size(); ++i) {
            if (!same(x(i), y(i))) return false;
        }
        return true;
    };
    if (!same_vec(a.terminal_currents, b.terminal_currents)) return fail("terminal_currents");
    if (!same_vec(a.current_ratios, b.current_ratios)) return fail("current_ratios");
    return true;
}

json result_to_json(const ScenarioResult& r, const std::vector<CriterionCheck>& checks) {
    const ScenarioSpec& s = r.spec;
    const GridMetrics& m = r.metrics;
    const CertificateReport& c = r.certificates;
    json j;
    j["scenario"] = {{"id", s.id},
                     {"name", s.name},
                     {"controller", std::string(variant_name(s.controller.variant))},
                     {"dt", s.dt},
                     {"t_end", s.t_end},
                     {"downsample", r.downsample}};
    j["summary"] = summary_to_json(r.summary);
    j["grid_metrics"] = {{"steps", m.steps},
                         {"terminal_consensus_error", num(m.terminal_consensus_error)},
                         {"terminal_voltage_avg", num(m.terminal_voltage_avg)},
                         {"peak_consensus_error_post_step", num(m.peak_consensus_error_post_step)},
                         {"max_consensus_error_final_2s", num(m.max_consensus_error_final_2s)},
                         {"current_peak_to_peak_final_1s", num(m.current_peak_to_peak_final_1s)},
                         {"min_voltage", num(m.min_voltage)},
                         {"min_margin_K", num(m.min_margin_K)},
                         {"min_margin_s", num(m.min_margin_s)}};
    j["certificates"] = {{"gamma", vec_json(c.gamma)},
                         {"max_equilibrium_residual", num(c.max_equilibrium_residual)},
                         {"krasovskii", monitor_json(c.krasovskii, c.krasovskii_enabled, c.krasovskii_note)},
                         {"shifted", monitor_json(c.shifted, c.shifted_enabled, c.shifted_note)},
                         {"krasovskii_energy_balance", balance_json(c.krasovskii_balance)},
                         {"shifted_energy_balance", balance_json(c.shifted_balance)}};
    json eq = json::array();
    for (const SegmentReference& ref : r.references) {
        eq.push_back({{"t_start", ref.t_start},
                      {"constant_loads", ref.constant},
                      {"has_limit", ref.has_limit},
                      {"residual", num(ref.residual)},
                      {"iterations", ref.iterations},
                      {"voltages", vec_json(ref.z_nominal.segment(s.topology.nu, s.topology.nu)
                                                .cwiseQuotient(s.params.C))},
                      {"currents", vec_json(ref.z_nominal.head(s.topology.nu).cwiseQuotient(s.params.L))}});
    }
    j["equilibria"] = eq;
    json cj = json::array();
    for (const CriterionCheck& ch : checks) {
        cj.push_back({{"criterion", ch.id}, {"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
    }
    j["checks"] = cj;
    j["warnings"] = r.warnings;
    j["stiffness_index"] = num(r.stiffness_index);
    j["runtime_s"] = r.runtime_s;
    return j;
}

std::string format_result_text(const ScenarioResult& r, const std::vector<CriterionCheck>& checks) {
    const ScenarioSpec& s = r.spec;
    const GridMetrics& m = r.metrics;
    const CertificateReport& c = r.certificates;
    std::ostringstream o;
    o << "scenario " << (s.id ? std::to_string(s.id) : std::string("custom")) << ": " << s.name << "\n";
    o << "controller " << variant_name(s.controller.variant) << ", h = " << s.dt << " s, t_end = " << s.t_end
      << " s, " << m.steps << " steps, every " << r.downsample << " recorded, runtime " << fmt(r.runtime_s, 3)
      << " s\n";
    o << "terminal consensus error   " << fmt(m.terminal_consensus_error) << " A\n";
    o << "terminal voltage average   " << fmt(m.terminal_voltage_avg, 10) << " V\n";
    o << "terminal currents         ";
    for (Index i = 0; i < r.summary.terminal_currents.size(); ++i) o << " " << fmt(r.summary.terminal_currents(i), 9);
    o << " A\n";
    o << "current ratios I_i/I_1    ";
    for (Index i = 0; i < r.summary.current_ratios.size(); ++i) o << " " << fmt(r.summary.current_ratios(i), 9);
    o << "\n";
    if (!std::isnan(m.peak_consensus_error_post_step)) {
        o << "post-step peak (0.5 s)     " << fmt(m.peak_consensus_error_post_step) << " A\n";
    }
    o << "final 2 s max error        " << fmt(m.max_consensus_error_final_2s) << " A\n";
    o << "final 1 s current p2p      " << fmt(m.current_peak_to_peak_final_1s) << " A\n";
    o << "minimum voltage            " << fmt(m.min_voltage) << " V\n";
    o << "Gamma                     ";
    for (Index i = 0; i < c.gamma.size(); ++i) o << " " << fmt(c.gamma(i));
    o << "\nmin margin (Krasovskii)    " << fmt(m.min_margin_K) << " S\n";
    o << "min margin (shifted)       " << fmt(m.min_margin_s) << " S\n";
    o << "equilibrium residual       " << fmt(c.max_equilibrium_residual) << "\n";
    auto mon = [&](const char* name, const InequalityMonitor& mo, bool en, const EnergyBalance& b,
                   const std::string& note) {
        o << name << ": ";
        if (!en) {
            o << "disabled";
        } else if (!mo.applicable()) {
            o << "not applicable";
        } else {
            o << (mo.passed() ? "PASS" : "FAIL") << ", max residual/(1+|V|) " << fmt(mo.max_normalized()) << ", "
              << mo.violations() << "/" << mo.count() << " violations; energy balance " << fmt(b.max_normalized())
              << " (tol " << fmt(b.tolerance()) << ")";
        }
        if (!note.empty()) o << "; " << note;
        o << "\n";
    };
    mon("Krasovskii certificate", c.krasovskii, c.krasovskii_enabled, c.krasovskii_balance, c.krasovskii_note);
    mon("shifted certificate", c.shifted, c.shifted_enabled, c.shifted_balance, c.shifted_note);
    for (const CriterionCheck& ch : checks) {
        o << (ch.pass ? "PASS" : "FAIL") << " [" << ch.id << "] " << ch.name << ": " << ch.detail << "\n";
    }
    for (const std::string& w : r.warnings) o << "warning: " << w << "\n";
    return o.str();
}

void write_run_outputs(const ScenarioResult& r, const RunConfig& cfg, const std::vector<CriterionCheck>& checks) {
    namespace fs = std::filesystem;
    const fs::path dir(cfg.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out_dir + ": " + ec.message());
    write_trajectory_csv((dir / "trajectory.csv").string(), r.trajectory);
    write_states_csv((dir / "states.csv").string(), r.trajectory);
    auto write = [&](const char* name, const std::string& text) {
        std::ofstream f(dir / name);
        if (!f) throw ConfigError("cannot write " + (dir / name).string());
        f << text;
    };
    write("summary.json", result_to_json(r, checks).dump(2) + "\n");
    write("summary.txt", format_result_text(r, checks));
    write("config.yaml", emit_config_yaml(cfg));
}

bool ReplayReport::passed() const {
    if (!summary_match) return false;
    if (krasovskii_enabled && krasovskii.applicable() && !krasovskii.passed()) return false;
    if (shifted_enabled && shifted.applicable() && !shifted.passed()) return false;
    return true;
}

ReplayReport replay_run_directory(const std::string& dir_name) {
    namespace fs = std::filesystem;
    const fs::path dir(dir_name);
    ReplayReport rep;

    const RunConfig cfg = parse_config_file((dir / "config.yaml").string());
    const ScenarioSpec& spec = cfg.spec;
    Trajectory traj = read_trajectory_csv((dir / "trajectory.csv").string());
    read_states_csv((dir / "states.csv").string(), traj);
    rep.rows = traj.rows.size();

    std::ifstream jf(dir / "summary.json");
    if (!jf) throw ConfigError("cannot read " + (dir / "summary.json").string());
    json stored;
    try {
        stored = json::parse(jf);
    } catch (const json::exception& e) {
        throw ConfigError((dir / "summary.json").string() + ": " + e.what());
    }
    rep.stored = summary_from_json(stored.at("summary"));
    rep.recomputed = summarize(traj, spec.step_time());
    rep.summary_match = summaries_identical(rep.stored, rep.recomputed, &rep.mismatch);

    GridModel model(spec.topology, spec.params, spec.disturbance, spec.additive);
    model.set_cpl_guard_voltage(spec.cpl_guard);
    const Controller ctrl(spec.controller, spec.topology.comm_edges, spec.topology.nu, spec.params.R);
    const GridClosedLoop loop(model, ctrl);
    const CertificateEvaluator eval(loop);
    const std::vector<SegmentReference> refs = scenario_equilibria(spec);
    rep.krasovskii_enabled = spec.certificates.krasovskii;
    rep.shifted_enabled = spec.certificates.shifted && is_xi_form(ctrl.variant());

    Vec dz(loop.dim());
    LoadSet loads;
    std::size_t seg = 0;
    for (const TrajectoryRow& row : traj.rows) {
        if (row.z.size() != loop.dim()) throw ConfigError("state dimension does not match the configuration");
        while (seg + 1 < refs.size() && row.t >= refs[seg + 1].t_start) ++seg;
        const SegmentReference& ref = refs[seg];
        loop.rhs(row.t, row.z, dz);
        model.loads_at(row.t, loads);
        if (rep.krasovskii_enabled) {
            const KrasovskiiPoint kp = eval.krasovskii(row.z, dz, loads);
            if (ref.constant) rep.krasovskii.add(row.t, kp.residual, kp.V_bar);
            if (!std::isnan(row.V_K)) {
                rep.max_storage_deviation =
                    std::max(rep.max_storage_deviation, std::abs(kp.V_K - row.V_K) / (1.0 + std::abs(row.V_K)));
            }
        }
        if (rep.shifted_enabled && ref.has_limit && ref.z_star.size() > 0) {
            const ShiftedPoint sp = eval.shifted(row.z, dz, ref.z_star, ref.constant ? loads : ref.loads);
            if (ref.constant) rep.shifted.add(row.t, sp.residual, sp.V_bar);
            if (!std::isnan(row.H_s)) {
                rep.max_storage_deviation =
                    std::max(rep.max_storage_deviation, std::abs(sp.H_s - row.H_s) / (1.0 + std::abs(row.H_s)));
            }
        }
    }
    return rep;
}

}  // namespace pcsim
