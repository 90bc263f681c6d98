#include "pcsim/closed_loop.hpp"
#include "pcsim/integrator.hpp"
#include "pcsim/newton.hpp"
#include "pcsim/scenario.hpp"

#include <doctest.h>

#include <cmath>

using namespace pcsim;

namespace {

auto decay = [](double, const Vec& z, Vec& dz) { dz = -z; };

double rk4_error_on_decay(double h) {
    Vec z = Vec::Ones(1);
    integrate_rk4(decay, z, Rk4Grid{0.0, 1.0, h, {}}, [](long long, double, const Vec&, const Vec&) {});
    return std::abs(z(0) - std::exp(-1.0));
}

}  // namespace

TEST_CASE("one RK4 step on exponential decay") {
    Vec z = Vec::Ones(1);
    integrate_rk4(decay, z, Rk4Grid{0.0, 0.1, 0.1, {}}, [](long long, double, const Vec&, const Vec&) {});
    // 1 - h + h^2/2 - h^3/6 + h^4/24 at h = 0.1
    CHECK(z(0) == doctest::Approx(0.9048375).epsilon(1e-14));
    CHECK(std::abs(z(0) - std::exp(-0.1)) < 1e-6);
}

TEST_CASE("constant right-hand side keeps the state") {
    Vec z = (Vec(3) << 1.0, -2.0, 3.5).finished();
    const Vec z0 = z;
    integrate_rk4([](double, const Vec& x, Vec& dx) { dx = Vec::Zero(x.size()); }, z, Rk4Grid{0.0, 2.0, 0.25, {}},
                  [](long long, double, const Vec&, const Vec&) {});
    CHECK(z == z0);
}

TEST_CASE("RK4 global error is fourth order") {
    for (double h : {0.1, 0.05, 0.025}) {
        const double ratio = rk4_error_on_decay(h) / rk4_error_on_decay(h / 2);
        CHECK(ratio > 14.0);
        CHECK(ratio < 18.0);
    }
}

TEST_CASE("breakpoints: on-grid discontinuity integrated exactly, off-grid rejected") {
    auto step = [](double t, const Vec&, Vec& dz) { dz = Vec::Constant(1, t < 0.5 ? 0.0 : 1.0); };
    Vec z = Vec::Zero(1);
    integrate_rk4(step, z, Rk4Grid{0.0, 1.0, 0.1, {0.5}}, [](long long, double, const Vec&, const Vec&) {});
    CHECK(z(0) == doctest::Approx(0.5).epsilon(1e-14));

    Vec w = Vec::Zero(1);
    CHECK_THROWS_AS(integrate_rk4(step, w, Rk4Grid{0.0, 1.0, 0.1, {0.55}},
                                  [](long long, double, const Vec&, const Vec&) {}),
                    ParameterError);
    CHECK_THROWS_AS(rk4_step_count(Rk4Grid{0.0, 1.0, 0.3, {}}), ParameterError);
    CHECK_THROWS_AS(rk4_step_count(Rk4Grid{0.0, 1.0, -0.1, {}}), ParameterError);
}

TEST_CASE("observer can stop the integration; non-finite states are reported") {
    Vec z = Vec::Ones(1);
    const long long steps = integrate_rk4(decay, z, Rk4Grid{0.0, 1.0, 0.01, {}},
                                          [](long long k, double, const Vec&, const Vec&) { return k < 10; });
    CHECK(steps == 10);

    Vec b = Vec::Ones(1);
    CHECK_THROWS_AS(integrate_rk4([](double, const Vec& x, Vec& dx) { dx = 1e300 * x.cwiseProduct(x); }, b,
                                  Rk4Grid{0.0, 1.0, 0.1, {}}, [](long long, double, const Vec&, const Vec&) {}),
                    NumericError);

    const SampledPath sp = integrate_rk4_recorded(decay, Vec::Ones(1), Rk4Grid{0.0, 1.0, 0.1, {}}, 3);
    CHECK(sp.t.size() == 5);  // k = 0, 3, 6, 9 and the final point
    CHECK(sp.t.back() == 1.0);
}

TEST_CASE("Newton solver") {
    const NewtonResult r = solve_newton([](const Vec& x, Vec& f) { f = (Vec(1) << x(0) * x(0) - 2.0).finished(); },
                                        [](const Vec& x) { return Mat::Constant(1, 1, 2.0 * x(0)); },
                                        Vec::Ones(1));
    CHECK(std::abs(r.x(0) - std::sqrt(2.0)) < 1e-9);  // residual tolerance 1e-9, slope 2.8

    // Over-determined but consistent: x + y = 3, x - y = 1, 2x = 4.
    const NewtonResult o = solve_newton(
        [](const Vec& x, Vec& f) { f = (Vec(3) << x(0) + x(1) - 3.0, x(0) - x(1) - 1.0, 2.0 * x(0) - 4.0).finished(); },
        [](const Vec&) { return (Mat(3, 2) << 1, 1, 1, -1, 2, 0).finished(); }, Vec::Zero(2));
    CHECK(o.x(0) == doctest::Approx(2.0));
    CHECK(o.x(1) == doctest::Approx(1.0));

    CHECK_THROWS_AS(solve_newton([](const Vec& x, Vec& f) { f = (Vec(1) << x(0) * x(0) + 1.0).finished(); },
                                 [](const Vec& x) { return Mat::Constant(1, 1, 2.0 * x(0)); }, Vec::Ones(1),
                                 NewtonOptions{1e-9, 30}),
                    ConvergenceError);
}

TEST_CASE("equilibrium without loads or offset is the origin") {
    const GridParameters zero_p = [] {
        GridParameters p = GridParameters::four_node_defaults();
        p.loads = LoadSet::zeros(4);
        return p;
    }();
    const GridModel model(Topology::four_node_ring(), zero_p);
    ControllerSpec cs = ControllerSpec::microgrid_defaults(ControllerVariant::ShiftedXi, 4, 3);
    cs.u_bar_mode = UBarMode::None;
    const Controller ctrl(cs, Topology::four_node_ring().comm_edges, 4);
    const GridClosedLoop loop(model, ctrl);
    const Equilibrium eq = solve_grid_equilibrium(loop, LoadSet::zeros(4));
    CHECK(eq.z.head(12).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((ctrl.factor().factor * eq.z.tail(3)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("pre-step equilibrium of the load-step scenario") {
    const ScenarioSpec s = scenario_preset(1);
    const std::vector<SegmentReference> refs = scenario_equilibria(s);
    REQUIRE(refs.size() == 2);
    const GridModel model(s.topology, s.params, s.disturbance);
    const Controller ctrl(s.controller, s.topology.comm_edges, 4, s.params.R);
    const GridClosedLoop loop(model, ctrl);
    for (const SegmentReference& r : refs) {
        const Vec v = r.z_nominal.segment(4, 4).cwiseQuotient(s.params.C);
        const Vec i = r.z_nominal.head(4).cwiseQuotient(s.params.L);
        CHECK(std::abs(v.mean() - 380.0) < 1e-6);
        CHECK(i.maxCoeff() - i.minCoeff() < 1e-9);
        Vec dz;
        loop.rhs(r.z_nominal, r.loads, dz);
        CHECK(dz.cwiseAbs().maxCoeff() < 1e-9);
        CHECK(r.residual < 1e-9);
    }
    // Kirchhoff: generated currents add up to the load currents at the node voltages.
    for (const SegmentReference& r : refs) {
        const Vec v = r.z_nominal.segment(4, 4).cwiseQuotient(s.params.C);
        const Vec i = r.z_nominal.head(4).cwiseQuotient(s.params.L);
        double demand = 0.0;
        for (Index k = 0; k < 4; ++k) demand += GridModel::load_current(v(k), r.loads.G(k), r.loads.I(k), r.loads.P(k));
        CHECK(i.sum() == doctest::Approx(demand).epsilon(1e-10));
    }
}

TEST_CASE("weighted scenario equilibrium gives the 1.25 ratio") {
    const std::vector<SegmentReference> refs = scenario_equilibria(scenario_preset(4));
    const ScenarioSpec s = scenario_preset(4);
    const Vec i = refs.back().z_nominal.head(4).cwiseQuotient(s.params.L);
    CHECK(i(2) / i(0) == doctest::Approx(1.25).epsilon(1e-10));
    CHECK(std::abs(i(0) - i(1)) < 1e-9);
    CHECK(std::abs(i(0) - i(3)) < 1e-9);
}

TEST_CASE("presets and downsampling") {
    CHECK_THROWS_AS(scenario_preset(5), ParameterError);
    CHECK(default_downsample(1500000) == 75);
    CHECK(default_downsample(100) == 1);
    CHECK(default_downsample(20001) == 2);
    CHECK(scenario_preset(4).controller.M(2, 2) == 80.0);
    CHECK(scenario_preset(1).step_time() == 5.0);
}

TEST_CASE("runs are deterministic and the summary is a function of the rows") {
    ScenarioSpec s = scenario_preset(2);
    s.t_end = 5.5;
    const ScenarioResult a = run_scenario(s);
    const ScenarioResult b = run_scenario(s);
    REQUIRE(a.trajectory.rows.size() == b.trajectory.rows.size());
    bool identical = true;
    for (std::size_t k = 0; k < a.trajectory.rows.size(); ++k) {
        identical = identical && a.trajectory.rows[k].z == b.trajectory.rows[k].z;
    }
    CHECK(identical);
    const Summary again = summarize(a.trajectory, s.step_time());
    CHECK(again.terminal_consensus_error == a.summary.terminal_consensus_error);
    CHECK(again.peak_consensus_error_post_step == a.summary.peak_consensus_error_post_step);
    CHECK(again.rows == a.trajectory.rows.size());
    CHECK(a.trajectory.rows.front().t == 0.0);
    CHECK(a.trajectory.rows.back().t == 5.5);
}

TEST_CASE("halving the step barely moves the terminal state") {
    ScenarioSpec s = scenario_preset(1);
    s.t_end = 10.0;
    s.certificates.krasovskii = false;
    s.certificates.shifted = false;
    const ScenarioResult coarse = run_scenario(s);
    s.dt = 5e-6;
    const ScenarioResult fine = run_scenario(s);
    CHECK(std::abs(coarse.metrics.terminal_consensus_error - fine.metrics.terminal_consensus_error) < 1e-6);
    CHECK((coarse.summary.terminal_currents - fine.summary.terminal_currents).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(std::abs(coarse.metrics.terminal_voltage_avg - fine.metrics.terminal_voltage_avg) < 1e-6);
}

TEST_CASE("integral and xi forms agree on the grid") {
    ScenarioSpec s = scenario_preset(1);
    s.t_end = 6.0;
    const FormEquivalence fe = compare_controller_forms(s);
    CHECK(fe.max_input_difference < 1e-6);
    CHECK(std::abs(fe.terminal_consensus_value_integral - fe.terminal_consensus_value_xi) <
          1e-9 * std::abs(fe.terminal_consensus_value_xi));
}

TEST_CASE("stiffness warning for a coarse step") {
    ScenarioSpec s = scenario_preset(1);
    s.dt = 1e-4;
    s.t_end = 1e-4;  // one step; longer would diverge
    s.disturbance = DisturbanceProfile();
    const ScenarioResult r = run_scenario(s);
    CHECK(r.stiffness_index > 2.0);
    REQUIRE_FALSE(r.warnings.empty());
    CHECK(r.warnings.front().find("stability") != std::string::npos);
}

TEST_CASE("collapse under an excessive constant-power load") {
    ScenarioSpec s = scenario_preset(1);
    s.disturbance = DisturbanceProfile();
    s.params.loads.P(0) = 2e6;
    s.t_end = 0.1;
    CHECK_THROWS_AS(run_scenario(s), Error);
}
