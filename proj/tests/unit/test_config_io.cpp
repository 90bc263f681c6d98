#include "pcsim/config.hpp"
#include "pcsim/report.hpp"
#include "pcsim/trajectory_io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>

using namespace pcsim;

namespace {

std::string error_of(const std::string& yaml) {
    try {
        parse_config_text(yaml, "t.yaml");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

bool same_bits(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return std::memcmp(&a, &b, sizeof a) == 0;
}

bool same_bits(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return false;
    for (Index i = 0; i < a.size(); ++i) {
        if (!same_bits(a(i), b(i))) return false;
    }
    return true;
}

Trajectory small_trajectory() {
    Trajectory t;
    t.nu = 2;
    for (int k = 0; k < 3; ++k) {
        TrajectoryRow r;
        r.t = 0.1 * k;
        r.V = (Vec(2) << 380.0 + k / 3.0, 379.9).finished();
        r.I = (Vec(2) << 1.0 / 7.0, -2.5e-17).finished();
        r.u = (Vec(2) << 381.0, 382.0).finished();
        r.y = r.I;
        r.consensus_error = std::sqrt(2.0) * k;
        r.voltage_avg = r.V.mean();
        r.V_K = 1e-300;
        r.W_K = 12.0;
        if (k == 1) r.H_s = 0.3;
        r.margin_K = 0.07;
        t.rows.push_back(r);
    }
    return t;
}

}  // namespace

TEST_CASE("empty configuration gives the nominal four-node setup") {
    const RunConfig c = parse_config_text("", "empty.yaml");
    const ScenarioSpec& s = c.spec;
    CHECK(s.id == 1);
    CHECK(s.controller.M == 100.0 * Mat::Identity(4, 4));
    CHECK(s.controller.K == 0.2 * Mat::Identity(4, 4));
    CHECK(s.controller.G == Mat::Identity(3, 3));
    CHECK(s.controller.v_ref == 380.0);
    CHECK(s.params.loads.P == (Vec(4) << 1000.0, 2500.0, 1500.0, 5000.0).finished());
    CHECK(c.out_dir == "pcsim_out");
}

TEST_CASE("weight override and kilowatt amplitudes") {
    const RunConfig c = parse_config_text(R"(scenario: 1
controller:
  M: [100, 100, 80, 100]
disturbances:
  - {node: 2, channel: power, shape: step, onset: 1.0, amplitude_kW: 2.5}
)",
                                          "m.yaml");
    CHECK(c.spec.controller.M(2, 2) == 80.0);
    CHECK(c.spec.controller.M(0, 1) == 0.0);
    REQUIRE(c.spec.disturbance.terms().size() == 1);
    CHECK(c.spec.disturbance.terms()[0].amplitude == 2500.0);
    CHECK(c.spec.disturbance.terms()[0].node == 2);
}

TEST_CASE("errors carry location and key path") {
    const std::string dt = error_of("integrator:\n  dt: -1e-5\n");
    CHECK(dt.find("t.yaml:2:") == 0);
    CHECK(dt.find("integrator.dt") != std::string::npos);

    const std::string unknown = error_of("grid:\n  nodez: 4\n");
    CHECK(unknown.find("unknown key") != std::string::npos);
    CHECK(unknown.find("grid.nodez") != std::string::npos);

    CHECK_FALSE(error_of("controller:\n  M: [1, 2, 3]\n").empty());
    CHECK_FALSE(error_of("scenario: 9\n").empty());
    CHECK_FALSE(error_of("controller:\n  variant: PI\n").empty());
    CHECK_FALSE(error_of("disturbances:\n  - {node: 7, shape: step, amplitude: 1}\n").empty());
    CHECK_FALSE(error_of("[1, 2]\n").empty());
}

TEST_CASE("command-line overrides win over the file") {
    ConfigOverrides ov;
    ov.dt = 2e-5;
    ov.out_dir = "elsewhere";
    ov.scenario = 3;
    const RunConfig c = parse_config_text("integrator: {dt: 1e-5, t_end: 4}\noutput: {dir: here}\n", "o.yaml", ov);
    CHECK(c.spec.dt == 2e-5);
    CHECK(c.spec.t_end == 4.0);
    CHECK(c.out_dir == "elsewhere");
    CHECK(c.spec.id == 3);

    ConfigOverrides bad;
    bad.t_end = 0.0;
    CHECK_THROWS_AS(default_config(bad), ConfigError);
}

TEST_CASE("emitted configuration reads back to the same spec") {
    for (int id = 1; id <= 4; ++id) {
        ConfigOverrides ov;
        ov.scenario = id;
        const RunConfig a = default_config(ov);
        const RunConfig b = parse_config_text(emit_config_yaml(a), "emitted.yaml");
        INFO("scenario " << id);
        CHECK(b.spec.id == a.spec.id);
        CHECK(b.spec.controller.variant == a.spec.controller.variant);
        CHECK(b.spec.controller.M == a.spec.controller.M);
        CHECK(b.spec.controller.G == a.spec.controller.G);
        CHECK(same_bits(b.spec.params.loads.P, a.spec.params.loads.P));
        CHECK(same_bits(b.spec.params.R, a.spec.params.R));
        CHECK(b.spec.dt == a.spec.dt);
        REQUIRE(b.spec.disturbance.terms().size() == a.spec.disturbance.terms().size());
        for (std::size_t k = 0; k < a.spec.disturbance.terms().size(); ++k) {
            const LoadDisturbance& x = a.spec.disturbance.terms()[k];
            const LoadDisturbance& y = b.spec.disturbance.terms()[k];
            CHECK(x.node == y.node);
            CHECK(x.shape == y.shape);
            CHECK(same_bits(x.amplitude, y.amplitude));
            CHECK(same_bits(x.frequency, y.frequency));
        }
        CHECK(emit_config_yaml(b) == emit_config_yaml(a));
    }
}

TEST_CASE("trajectory CSV header and bitwise round trip") {
    CHECK(trajectory_csv_header(2) ==
          "t,V_1,V_2,I_1,I_2,u_1,u_2,y_1,y_2,consensus_error,voltage_avg,V_K,W_K,H_s,margin_K,margin_s");
    const Trajectory a = small_trajectory();
    std::stringstream ss;
    write_trajectory_csv(ss, a);
    const Trajectory b = read_trajectory_csv(ss);
    REQUIRE(b.nu == 2);
    REQUIRE(b.rows.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        const TrajectoryRow& x = a.rows[k];
        const TrajectoryRow& y = b.rows[k];
        CHECK(same_bits(x.t, y.t));
        CHECK(same_bits(x.V, y.V));
        CHECK(same_bits(x.I, y.I));
        CHECK(same_bits(x.consensus_error, y.consensus_error));
        CHECK(same_bits(x.V_K, y.V_K));
        CHECK(same_bits(x.H_s, y.H_s));
        CHECK(same_bits(x.margin_s, y.margin_s));
    }

    std::istringstream wrong("t,V_1\n0,1\n");
    CHECK_THROWS_AS(read_trajectory_csv(wrong), ConfigError);
}

TEST_CASE("summary JSON round trip keeps NaN") {
    Summary s;
    s.rows = 5;
    s.t_final = 15.0;
    s.terminal_consensus_error = 1.0 / 3.0;
    s.terminal_currents = (Vec(2) << 1.1, 2.2).finished();
    s.current_ratios = (Vec(2) << 1.0, 2.0).finished();
    const Summary back = summary_from_json(nlohmann::json::parse(summary_to_json(s).dump()));
    CHECK(summaries_identical(s, back));
    CHECK(std::isnan(back.min_margin_s));
    Summary other = back;
    other.terminal_consensus_error = std::nextafter(other.terminal_consensus_error, 1.0);
    std::string diff;
    CHECK_FALSE(summaries_identical(s, other, &diff));
    CHECK(diff.find("terminal_consensus_error") != std::string::npos);
}

TEST_CASE("run directory replays with identical summary and certificates") {
    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "pcsim_replay_test";
    std::filesystem::remove_all(dir);
    ConfigOverrides ov;
    ov.t_end = 0.05;
    ov.out_dir = dir.string();
    const RunConfig cfg = default_config(ov);
    const ScenarioResult r = run_scenario(cfg.spec);
    write_run_outputs(r, cfg, scenario_criteria(r));
    for (const char* f : {"trajectory.csv", "states.csv", "summary.json", "summary.txt", "config.yaml"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    const ReplayReport rep = replay_run_directory(dir.string());
    CHECK(rep.rows == r.trajectory.rows.size());
    CHECK(rep.summary_match);
    CHECK(rep.krasovskii_enabled);
    CHECK(rep.krasovskii.passed());
    CHECK(rep.shifted.passed());
    CHECK(rep.max_storage_deviation < 1e-9);
    CHECK(rep.passed());
    std::filesystem::remove_all(dir);
}
