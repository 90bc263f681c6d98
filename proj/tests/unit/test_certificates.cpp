#include "helpers.hpp"

#include "pcsim/certificates.hpp"
#include "pcsim/closed_loop.hpp"
#include "pcsim/integrator.hpp"
#include "pcsim/scenario.hpp"

#include <doctest.h>

#include <cmath>

using namespace pcsim;

namespace {

/// The table load step applied at t = 0.01 s, observed for 0.2 s.
ScenarioSpec early_step(double h, ControllerVariant v = ControllerVariant::ShiftedXi) {
    ScenarioSpec s = scenario_preset(1);
    std::vector<LoadDisturbance> terms = s.disturbance.terms();
    for (LoadDisturbance& d : terms) d.onset = 0.01;
    s.disturbance = DisturbanceProfile(terms);
    s.t_end = 0.21;
    s.dt = h;
    s.controller.variant = v;
    return s;
}

}  // namespace

TEST_CASE("Krasovskii storage and dissipation, elementary values") {
    const GridModel m = testing::unit_two_node_model();
    const Vec q = Vec::Ones(2);
    const LoadSet none = LoadSet::zeros(2);
    CHECK(krasovskii_storage(m, Vec::Zero(5)) == 0.0);
    CHECK(krasovskii_dissipation(m, Vec::Zero(5), q, none, Vec::Ones(2)) == 0.0);
    Vec xd = Vec::Zero(5);
    xd(0) = 2.0;
    CHECK(krasovskii_storage(m, xd) == 2.0);
}

TEST_CASE("Krasovskii dissipation without constant-power loads is a nonnegative quadratic form") {
    const GridParameters p = GridParameters::four_node_defaults();
    LoadSet loads = p.loads;
    loads.P.setZero();
    const GridModel m = testing::ring_model(loads);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g(0.0, 1.0);
    const Vec q = p.C * 380.0;
    for (int k = 0; k < 1000; ++k) {
        Vec xd(12);
        for (Index i = 0; i < 12; ++i) xd(i) = g(rng);
        const double w = krasovskii_dissipation(m, xd, q, loads, p.R);
        // |Hess xd|^2 weighted by (R, G, Rt).
        double expect = 0.0;
        for (Index i = 0; i < 4; ++i) {
            expect += p.R(i) * std::pow(xd(i) / p.L(i), 2);
            expect += loads.G(i) * std::pow(xd(4 + i) / p.C(i), 2);
            expect += p.Rt(i) * std::pow(xd(8 + i) / p.Lt(i), 2);
        }
        REQUIRE(w >= 0.0);
        REQUIRE(w == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("Bregman storage: zero at e = 0, independent of x*, quadratic identity") {
    const GridModel m(Topology::four_node_ring(), GridParameters::four_node_defaults());
    std::mt19937_64 rng(4);
    for (int k = 0; k < 1000; ++k) {
        const Vec xs1 = testing::random_ring_state(rng);
        const Vec xs2 = testing::random_ring_state(rng);
        const Vec e = testing::random_ring_state(rng) - testing::random_ring_state(rng);
        CHECK(shifted_storage(m, xs1, xs1) == 0.0);
        const double h1 = shifted_storage(m, xs1 + e, xs1);
        const double h2 = shifted_storage(m, xs2 + e, xs2);
        const double quad = 0.5 * e.dot(m.hessian_diagonal().cwiseProduct(e));
        REQUIRE(h1 >= 0.0);
        // Literal evaluation cancels H(x) - H(x*) terms of size |x|^2; compare at that scale.
        const double scale = std::max({m.hamiltonian(xs1 + e), m.hamiltonian(xs2 + e), m.hamiltonian(xs1), 1.0});
        REQUIRE(std::abs(h1 - quad) <= 1e-13 * scale);
        REQUIRE(std::abs(h1 - h2) <= 1e-13 * scale);
    }
}

TEST_CASE("domain margin at the node-1 nominal point") {
    const GridParameters p = GridParameters::four_node_defaults();
    LoadSet loads;
    loads.G = Vec::Constant(4, 0.08);
    loads.I = Vec::Constant(4, 12.5);
    loads.P = Vec::Constant(4, 1000.0);
    const GridModel m = testing::ring_model(loads);
    const Vec q = p.C * 380.0;
    // 0.08 - 1000 / 380^2
    CHECK(krasovskii_domain_margin(m, q, loads, Vec::Zero(4)) == doctest::Approx(0.07307479224376731).epsilon(1e-13));
    CHECK(1000.0 / (380.0 * 380.0) == doctest::Approx(0.006925207756232687).epsilon(1e-15));

    // Without constant-power loads the condition reduces to G > Gamma.
    LoadSet nop = loads;
    nop.P.setZero();
    const Vec gamma = Vec::Constant(4, 0.03);
    CHECK(krasovskii_domain_margin(m, q, nop, gamma) == doctest::Approx(0.05).epsilon(1e-14));

    // Margin decreases as P grows at fixed voltage.
    double prev = std::numeric_limits<double>::infinity();
    for (double pw = 0.0; pw <= 20000.0; pw += 1000.0) {
        LoadSet l = loads;
        l.P.setConstant(pw);
        const double mk = krasovskii_domain_margin(m, q, l, Vec::Zero(4));
        CHECK(mk < prev);
        prev = mk;
    }
    CHECK_THROWS_AS(auto_gamma(m, {{q * 0.1, loads}}), ParameterError);
}

TEST_CASE("linear passive plant: storage rate bounded by supply") {
    // x' = A x + B u, y = H x with P = Q = I: 1/2 |x|^2 rate <= -1/2 |x|^2 + y^T u.
    const Mat a = (Mat(2, 2) << -1.0, 0.5, -0.5, -1.0).finished();
    const Mat b = Mat::Identity(2, 2);
    Vec x = (Vec(2) << 1.0, -2.0).finished();
    auto input = [](double t) { return (Vec(2) << std::sin(3.0 * t), std::cos(t)).finished(); };
    double worst = -1.0;
    const Rk4Grid grid{0.0, 5.0, 1e-3, {}};
    integrate_rk4([&](double t, const Vec& z, Vec& dz) { dz = a * z + b * input(t); }, x, grid,
                  [&](long long, double t, const Vec& z, const Vec& dz) {
                      const double dv = z.dot(dz);
                      const double resid = dv + 0.5 * z.squaredNorm() - z.dot(input(t));
                      worst = std::max(worst, resid / (1.0 + 0.5 * z.squaredNorm()));
                  });
    CHECK(worst <= 1e-6);
}

TEST_CASE("pointwise certificates along a load step, all variants") {
    for (ControllerVariant v : {ControllerVariant::IntegralLaplacian, ControllerVariant::KrasovskiiExtended,
                                ControllerVariant::ShiftedXi, ControllerVariant::ShiftedXiDampedFiltered}) {
        ScenarioSpec s = early_step(1e-5, v);
        if (has_damping(v)) s.dt = 1e-7, s.t_end = 0.0102;
        const ScenarioResult r = run_scenario(s);
        INFO(variant_name(v));
        CHECK(r.certificates.krasovskii.passed());
        CHECK(r.certificates.krasovskii.max_normalized() <= 1e-6);
        if (is_xi_form(v)) {
            CHECK(r.certificates.shifted.passed());
            CHECK(r.certificates.shifted.max_normalized() <= 1e-6);
        } else {
            CHECK_FALSE(r.certificates.shifted_enabled);
        }
        CHECK(r.metrics.min_margin_K > 0.0);
    }
}

TEST_CASE("Krasovskii energy balance converges at fourth order") {
    const double h[] = {1e-5, 5e-6, 2.5e-6};
    double err[3];
    for (int i = 0; i < 3; ++i) {
        const ScenarioResult r = run_scenario(early_step(h[i]));
        err[i] = r.certificates.krasovskii_balance.max_normalized();
        if (i == 2) {
            CHECK(r.certificates.krasovskii_balance.passed());
            CHECK(r.certificates.shifted_balance.passed());
        }
    }
    MESSAGE("balance errors " << err[0] << " " << err[1] << " " << err[2]);
    CHECK(err[2] <= 1e-5);
    for (int i = 0; i < 2; ++i) {
        const double rate = std::log2(err[i] / err[i + 1]);
        CHECK(rate > 3.5);
        CHECK(rate < 4.5);
    }
}

TEST_CASE("Simpson energy balance is exact for cubic storage") {
    EnergyBalance b(1e-12);
    for (int k = 0; k <= 100; ++k) {
        const double t = 0.01 * k;
        // V = -t^3 + 5, W = 3 t^2: V(t) - V(0) + int W = 0.
        if (k == 0) {
            b.restart(t, 5.0, 0.0);
        } else {
            b.add(t, 5.0 - t * t * t, 3.0 * t * t);
        }
    }
    CHECK(b.checks() == 50);
    CHECK(b.max_normalized() < 1e-14);
}

TEST_CASE("inequality monitor") {
    InequalityMonitor m(1e-6);
    CHECK_FALSE(m.applicable());
    m.add(0.0, -1.0, 10.0);
    m.add(1.0, 5e-6, 10.0);
    CHECK(m.passed());
    m.add(2.0, 2e-5, 10.0);
    CHECK_FALSE(m.passed());
    CHECK(m.violations() == 1);
    CHECK(m.worst_time() == 2.0);
    CHECK(m.max_normalized() == doctest::Approx(2e-5 / 11.0));
}

TEST_CASE("exponential decay bound along the post-step transient") {
    ScenarioSpec s = early_step(1e-5, ControllerVariant::IntegralLaplacian);
    const GridModel model(s.topology, s.params, s.disturbance);
    const Controller ctrl(s.controller, s.topology.comm_edges, 4, s.params.R);
    const GridClosedLoop loop(model, ctrl);
    const CertificateEvaluator eval(loop);
    const std::vector<SegmentReference> refs = scenario_equilibria(s);
    const LoadSet post = refs.back().loads;

    // Start at the pre-step equilibrium under the post-step loads.
    Vec z = refs.front().z_nominal;
    std::vector<double> t, v, w;
    const Rk4Grid grid{0.0, 0.2, 1e-5, {}};
    integrate_rk4([&](double, const Vec& zz, Vec& dz) { loop.rhs(zz, post, dz); }, z, grid,
                  [&](long long k, double tt, const Vec& zz, const Vec& dz) {
                      if (k % 10 != 0) return;
                      const KrasovskiiPoint p = eval.krasovskii(zz, dz, post);
                      t.push_back(tt);
                      v.push_back(p.V_bar);
                      w.push_back(p.W_total);
                      CHECK(p.V_K <= p.V_bar * (1.0 + 1e-12));
                  });
    const ExponentialBound eb = exponential_bound_check(t, v, w, 2.0 * v.front());
    CHECK(eb.c >= 0.0);
    CHECK(eb.holds);
}
