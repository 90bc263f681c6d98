#include "pcsim/controllers.hpp"
#include "pcsim/integrator.hpp"
#include "pcsim/linear_analysis.hpp"

#include <doctest.h>

using namespace pcsim;

namespace {

const std::vector<Edge> kPath2{{0, 1, 1.0}};
const std::vector<Edge> kPath4{{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}};

ControllerSpec plain(ControllerVariant v, Index nu, Index channels) {
    ControllerSpec s;
    s.variant = v;
    s.M = Mat::Identity(nu, nu);
    s.K = 0.2 * Mat::Identity(nu, nu);
    s.G = Mat::Identity(channels, channels);
    return s;
}

const ControllerVariant kAll[] = {
    ControllerVariant::IntegralLaplacian, ControllerVariant::KrasovskiiWeighted,
    ControllerVariant::KrasovskiiExtended, ControllerVariant::ShiftedXi,
    ControllerVariant::ShiftedXiDamped,   ControllerVariant::ShiftedXiDampedFiltered,
};

}  // namespace

TEST_CASE("variant and mode names round-trip") {
    for (ControllerVariant v : kAll) CHECK(parse_variant(variant_name(v)) == v);
    for (UBarMode m : {UBarMode::None, UBarMode::Constant, UBarMode::VoltageRegulating}) {
        CHECK(parse_ubar_mode(ubar_mode_name(m)) == m);
    }
    CHECK_THROWS_AS(parse_variant("PI"), ParameterError);
}

TEST_CASE("microgrid defaults") {
    const ControllerSpec s = ControllerSpec::microgrid_defaults(ControllerVariant::ShiftedXi, 4, 3);
    CHECK(s.M == 100.0 * Mat::Identity(4, 4));
    CHECK(s.K == 0.2 * Mat::Identity(4, 4));
    CHECK(s.G == Mat::Identity(3, 3));
    CHECK(s.v_ref == 380.0);
    CHECK(s.u_bar_mode == UBarMode::VoltageRegulating);
}

TEST_CASE("xi-form output at zero state and at consensus") {
    const Controller xi(plain(ControllerVariant::ShiftedXi, 4, 3), kPath4, 4);
    CHECK(xi.output(Vec::Zero(xi.state_dim()), Vec::Random(4)).cwiseAbs().maxCoeff() == 0.0);

    const Controller damped(plain(ControllerVariant::ShiftedXiDamped, 4, 3), kPath4, 4);
    CHECK(damped.output(Vec::Zero(damped.state_dim()), Vec::Ones(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("voltage-regulating offset at zero flux is the reference") {
    ControllerSpec s = ControllerSpec::microgrid_defaults(ControllerVariant::ShiftedXi, 4, 3);
    const Controller c(s, kPath4, 4, Vec::Constant(4, 0.2));
    const Vec u = c.output(Vec::Zero(c.state_dim()), Vec::Zero(4));
    CHECK((u - Vec::Constant(4, 380.0)).cwiseAbs().maxCoeff() == 0.0);
    // The feedback part adds R y.
    const Vec y = (Vec(4) << 1.0, 2.0, 3.0, 4.0).finished();
    const Vec u2 = c.output(Vec::Zero(c.state_dim()), y);
    CHECK((u2 - (Vec::Constant(4, 380.0) + 0.2 * y)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("integral law on the 2-node path") {
    const Controller c(plain(ControllerVariant::KrasovskiiWeighted, 2, 1), kPath2, 2);
    const Vec du = c.derivative(Vec::Zero(c.state_dim()), (Vec(2) << 2.0, 0.0).finished());
    CHECK(du(0) == -2.0);
    CHECK(du(1) == 2.0);
}

TEST_CASE("every variant is stationary at output consensus") {
    const double alpha = 3.7;
    for (ControllerVariant v : kAll) {
        ControllerSpec s = plain(v, 4, 3);
        s.M *= 5.0;
        const Controller c(s, kPath4, 4);
        const Vec y = Vec::Constant(4, alpha);
        Vec st = Vec::Random(c.state_dim());
        if (c.rho_offset() >= 0) {
            // rho' = -rho + y is the only remaining term away from rho = y.
            const Vec d0 = c.derivative(st, y);
            const Vec expect = y - st.segment(c.rho_offset(), 4);
            CHECK((d0.segment(c.rho_offset(), 4) - expect).cwiseAbs().maxCoeff() < 1e-12);
            st.segment(c.rho_offset(), 4) = y;
        }
        const Vec d = c.derivative(st, y);
        INFO(variant_name(v));
        CHECK(d.cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("weighted consensus: M y = beta 1 is stationary") {
    ControllerSpec s = plain(ControllerVariant::KrasovskiiWeighted, 4, 3);
    s.M = Vec((Vec(4) << 100.0, 100.0, 80.0, 100.0).finished()).asDiagonal();
    const Controller c(s, kPath4, 4);
    const Vec y = 40.0 * s.M.inverse() * Vec::Ones(4);
    CHECK(c.derivative(Vec::Zero(c.state_dim()), y).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(c.consensus_error(y) < 1e-12);
    CHECK(y(2) / y(0) == doctest::Approx(1.25).epsilon(1e-14));
}

TEST_CASE("consensus error") {
    const Controller c(plain(ControllerVariant::ShiftedXi, 2, 1), kPath2, 2);
    CHECK(c.consensus_error(Vec::Ones(2)) == 0.0);
    CHECK(c.consensus_error((Vec(2) << 2.0, 0.0).finished()) == 2.0);
}

TEST_CASE("conserved functionals annihilate the controller dynamics") {
    for (ControllerVariant v : kAll) {
        const Controller c(plain(v, 4, 3), kPath4, 4);
        const Mat w = c.conserved_functionals();
        if (w.rows() == 0) continue;
        Mat acbc(c.state_dim(), c.state_dim() + 4);
        acbc << c.Ac(), c.Bc();
        CHECK((w * acbc).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("partial consensus leaves nodes outside the subset uncontrolled") {
    ControllerSpec s = plain(ControllerVariant::KrasovskiiWeighted, 4, 2);
    s.consensus_subset = {0, 1, 2};
    const Controller c(s, kPath4, 4);
    CHECK(c.weight().row(3).cwiseAbs().maxCoeff() == 0.0);
    const Vec y = (Vec(4) << 1.0, 2.0, 3.0, 50.0).finished();
    const Vec du = c.derivative(Vec::Zero(c.state_dim()), y);
    CHECK(du(3) == 0.0);
    CHECK(du.head(3).cwiseAbs().maxCoeff() > 0.0);
    CHECK(c.consensus_error((Vec(4) << 2.0, 2.0, 2.0, 9.0).finished()) == 0.0);

    ControllerSpec bad = s;
    bad.variant = ControllerVariant::IntegralLaplacian;
    CHECK_THROWS_AS(Controller(bad, kPath4, 4), ParameterError);
}

TEST_CASE("gain validation") {
    ControllerSpec s = plain(ControllerVariant::KrasovskiiExtended, 4, 3);
    s.K(0, 0) = -1.0;
    CHECK_THROWS_AS(Controller(s, kPath4, 4), ParameterError);
    s = plain(ControllerVariant::ShiftedXiDamped, 4, 3);
    s.G(0, 1) = 0.5;
    CHECK_THROWS_AS(Controller(s, kPath4, 4), ParameterError);
    s = plain(ControllerVariant::ShiftedXi, 4, 3);
    s.M = Mat::Identity(3, 3);
    CHECK_THROWS(Controller(s, kPath4, 4));
}

TEST_CASE("integral and xi forms agree on a 2-node linear plant") {
    LinearPlant p;
    p.A = (Mat(2, 2) << -1.0, 0.3, -0.3, -2.0).finished();
    p.B = Mat::Identity(2, 2);
    p.H = Mat::Identity(2, 2);
    p.d = (Vec(2) << 1.0, 3.0).finished();

    const Controller ci(plain(ControllerVariant::IntegralLaplacian, 2, 1), kPath2, 2);
    const Controller cx(plain(ControllerVariant::ShiftedXi, 2, 1), kPath2, 2);
    const LinearClosedLoop li(p, ci), lx(p, cx);

    // xi(0) = 0 corresponds to u(0) = 0.
    CHECK(cx.output(Vec::Zero(1), Vec::Zero(2)).cwiseAbs().maxCoeff() == 0.0);

    const Vec xi0 = (Vec(1) << 0.7).finished();
    Vec z(2 + 2 + 2 + 1);
    z << 0.5, -0.2, cx.Cu() * xi0, 0.5, -0.2, xi0;
    Vec a(4), b(3), fa(4), fb(3);
    double max_du = 0.0;
    const Rk4Grid grid{0.0, 1.0, 1e-3, {}};
    integrate_rk4(
        [&](double t, const Vec& zz, Vec& dz) {
            a = zz.head(4);
            b = zz.tail(3);
            li.rhs(t, a, fa);
            lx.rhs(t, b, fb);
            dz.resize(7);
            dz << fa, fb;
        },
        z, grid,
        [&](long long, double, const Vec& zz, const Vec&) {
            const Vec ui = ci.output(zz.segment(2, 2), p.H * zz.head(2));
            const Vec ux = cx.output(zz.tail(1), p.H * zz.segment(4, 2));
            max_du = std::max(max_du, (ui - ux).cwiseAbs().maxCoeff());
        });
    CHECK(max_du < 1e-8);
}
