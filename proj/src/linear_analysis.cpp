#include "pcsim/linear_analysis.hpp"

#include "pcsim/closed_loop.hpp"
#include "pcsim/integrator.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace pcsim {

namespace {

double sym_min_eig(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

struct Factored {
    Eigen::PartialPivLU<Mat> a_lu;
    Mat a_inv_b;
    Mat t;  // H A^-1 B
    Eigen::PartialPivLU<Mat> t_lu;
    double cond = 0.0;
};

Factored factor(const LinearPlant& plant) {
    Factored f;
    const double a_scale = std::max(1.0, plant.A.cwiseAbs().maxCoeff());
    Eigen::JacobiSVD<Mat> a_svd(plant.A);
    const Vec& sa = a_svd.singularValues();
    if (!(sa(sa.size() - 1) > 1e-12 * a_scale)) {
        throw ParameterError("A is singular (marginally stable plant); the consensus value needs A^-1");
    }
    f.a_lu = plant.A.partialPivLu();
    f.a_inv_b = f.a_lu.solve(plant.B);
    f.t = plant.H * f.a_inv_b;
    Eigen::JacobiSVD<Mat> t_svd(f.t);
    const Vec& st = t_svd.singularValues();
    const double smin = st(st.size() - 1);
    f.cond = smin > 0.0 ? st(0) / smin : std::numeric_limits<double>::infinity();
    if (!(smin > 1e-12 * std::max(1.0, st(0)))) {
        throw ParameterError(
            "H A^-1 B is singular; this cannot happen for a strictly passive plant with full-rank B, "
            "so the supplied (A, B, H) is not certified");
    }
    f.t_lu = f.t.partialPivLu();
    return f;
}

Vec consensus_direction(const Mat& M, Index m) {
    if (M.size() == 0) {
        return Vec::Ones(m);
    }
    require_shape(M, m, m, "output weight M");
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible()) {
        throw ParameterError("closed-form consensus value needs an invertible output weight M");
    }
    return lu.solve(Vec::Ones(m));
}

}  // namespace

void LinearPlant::validate() const {
    const Index nn = A.rows();
    require_shape(A, nn, nn, "A");
    if (B.rows() != nn) {
        throw DimensionError("B must have as many rows as A");
    }
    require_shape(H, B.cols(), nn, "H");
    if (d.size() != 0) {
        require_size(d, nn, "d");
    }
    Eigen::FullPivLU<Mat> lu(B);
    if (lu.rank() < B.cols()) {
        throw ParameterError("B must have full column rank");
    }
    if (P.size() != 0) require_shape(P, nn, nn, "P");
    if (Q.size() != 0) require_shape(Q, nn, nn, "Q");
}

PassivityCheck check_passivity(const LinearPlant& plant) {
    plant.validate();
    if (!plant.has_certificate()) {
        throw ParameterError("passivity check needs both P and Q");
    }
    const double p_scale = 1e-9 * (1.0 + plant.P.norm());
    const double q_scale = 1e-9 * (1.0 + plant.Q.norm());
    if ((plant.P - plant.P.transpose()).cwiseAbs().maxCoeff() > p_scale || !(sym_min_eig(plant.P) > p_scale)) {
        throw ParameterError("P must be symmetric positive definite");
    }
    if ((plant.Q - plant.Q.transpose()).cwiseAbs().maxCoeff() > q_scale || !(sym_min_eig(plant.Q) > q_scale)) {
        throw ParameterError("Q must be symmetric positive definite");
    }

    PassivityCheck out;
    const Mat lmi = plant.P * plant.A + plant.A.transpose() * plant.P + plant.Q;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (lmi + lmi.transpose()));
    const Index last = lmi.rows() - 1;
    out.lmi_max_eig = es.eigenvalues()(last);
    out.pb_error = (plant.P * plant.B - plant.H.transpose()).cwiseAbs().maxCoeff();
    out.tolerance = 1e-9 * (1.0 + lmi.norm());
    const double pb_tol = 1e-9 * (1.0 + plant.H.norm());
    if (out.lmi_max_eig > out.tolerance) {
        out.witness = es.eigenvectors().col(last);
        out.reason = "P A + A^T P + Q has a positive eigenvalue";
    } else if (out.pb_error > pb_tol) {
        out.reason = "P B differs from H^T";
    } else {
        out.certified = true;
    }
    return out;
}

ConsensusValue consensus_value(const LinearPlant& plant, const Vec& u_bar, const Mat& M) {
    plant.validate();
    const Index n = plant.n();
    const Index m = plant.m();
    const Factored f = factor(plant);
    const Vec w = consensus_direction(M, m);

    Vec d_eff = plant.d.size() ? plant.d : Vec::Zero(n);
    if (u_bar.size() != 0) {
        require_size(u_bar, m, "u_bar");
        d_eff += plant.B * u_bar;
    }
    const Vec a_inv_d = f.a_lu.solve(d_eff);
    const Vec h_a_inv_d = plant.H * a_inv_d;
    const Vec t_inv_w = f.t_lu.solve(w);
    const Vec t_inv_had = f.t_lu.solve(h_a_inv_d);

    ConsensusValue out;
    out.cond_gain = f.cond;
    out.alpha = -w.dot(t_inv_had) / w.dot(t_inv_w);
    out.coupling_star = f.t_lu.solve(out.alpha * w + h_a_inv_d);
    out.x_star = f.a_inv_b * out.coupling_star - a_inv_d;
    out.u_star = -out.coupling_star;
    if (u_bar.size() != 0) {
        out.u_star += u_bar;
    }
    return out;
}

double ubar_alpha_shift(const LinearPlant& plant, const Vec& u_bar, const Mat& M) {
    plant.validate();
    require_size(u_bar, plant.m(), "u_bar");
    const Factored f = factor(plant);
    const Vec w = consensus_direction(M, plant.m());
    return -w.dot(u_bar) / w.dot(f.t_lu.solve(w));
}

LinearPlant random_certified_plant(Index n, Index m, std::mt19937_64& rng) {
    if (n < 1 || m < 1 || m > n) {
        throw ParameterError("random plant needs 1 <= m <= n");
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto randn = [&](Index r, Index c) {
        Mat x(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) x(i, j) = gauss(rng);
        return x;
    };
    const Mat z = randn(n, n);
    const Mat y = randn(n, n);
    const Mat nmat = z * z.transpose() / static_cast<double>(n) + 0.5 * Mat::Identity(n, n);
    const Mat skew = 0.5 * (y - y.transpose());

    LinearPlant p;
    p.A = skew - nmat;
    do {
        p.B = randn(n, m);
    } while (Eigen::FullPivLU<Mat>(p.B).rank() < m);
    p.H = p.B.transpose();
    p.d = randn(n, 1).col(0);
    p.P = Mat::Identity(n, n);
    p.Q = nmat;
    return p;
}

LinearClosedLoop::LinearClosedLoop(const LinearPlant& plant, const Controller& controller)
    : plant_(&plant), ctrl_(&controller) {
    plant.validate();
    if (controller.nu() != plant.m()) {
        throw DimensionError("controller size does not match the plant input count");
    }
    const Index n = plant.n();
    const Index ns = controller.state_dim();
    jac_ = Mat::Zero(n + ns, n + ns);
    jac_.topLeftCorner(n, n) = plant.A + plant.B * controller.Du() * plant.H;
    jac_.topRightCorner(n, ns) = plant.B * controller.Cu();
    jac_.bottomLeftCorner(ns, n) = controller.Bc() * plant.H;
    jac_.bottomRightCorner(ns, ns) = controller.Ac();
    off_ = Vec::Zero(n + ns);
    off_.head(n) = plant.B * controller.ubar_constant();
    if (plant.d.size()) {
        off_.head(n) += plant.d;
    }
}

void LinearClosedLoop::rhs(double /*t*/, const Vec& z, Vec& dz) const {
    dz.noalias() = jac_ * z;
    dz += off_;
}

LinearSimResult simulate_and_compare(const LinearPlant& plant, const Controller& controller,
                                     const LinearSimOptions& opts) {
    if (controller.spec().u_bar_mode == UBarMode::VoltageRegulating) {
        throw ParameterError("voltage-regulating u_bar is specific to the grid model");
    }
    const LinearClosedLoop loop(plant, controller);
    const Index n = plant.n();
    const Index ns = controller.state_dim();

    LinearSimResult out;
    out.oracle = consensus_value(plant, controller.ubar_constant(), controller.weight());

    Vec z = Vec::Zero(loop.dim());
    if (opts.x0.size()) {
        require_size(opts.x0, n, "initial state");
        z.head(n) = opts.x0;
    }
    if (opts.s0.size()) {
        require_size(opts.s0, ns, "initial controller state");
        z.tail(ns) = opts.s0;
    }

    const double rho = spectral_radius(loop.jacobian());
    out.step = opts.step_factor / std::max(rho, 1e-12);
    const long long max_steps = static_cast<long long>(std::ceil(opts.max_time / out.step));
    Rk4Grid grid{0.0, static_cast<double>(max_steps) * out.step, out.step, {}};

    bool converged = false;
    out.steps = integrate_rk4(
        [&](double t, const Vec& zz, Vec& dz) { loop.rhs(t, zz, dz); }, z, grid,
        [&](long long k, double t, const Vec& zz, const Vec& dz) {
            const double dn = dz.lpNorm<Eigen::Infinity>();
            out.derivative_norm = dn;
            out.t_final = t;
            if (k > 0 && dn <= opts.derivative_tol * (1.0 + zz.lpNorm<Eigen::Infinity>())) {
                converged = true;
                return false;
            }
            return true;
        });
    if (!converged) {
        std::ostringstream msg;
        msg << "linear closed loop not stationary after " << out.t_final << " s (|z'| = " << out.derivative_norm
            << ")";
        throw ConvergenceError(msg.str());
    }

    out.x_final = z.head(n);
    out.s_final = z.tail(ns);
    out.y_final = plant.H * out.x_final;
    out.u_final = controller.output(out.s_final, out.y_final);
    const Vec my = controller.weight() * out.y_final;
    out.alpha_error = (my.array() - out.oracle.alpha).abs().maxCoeff();
    out.x_error = (out.x_final - out.oracle.x_star).cwiseAbs().maxCoeff();
    return out;
}

Mat parse_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    auto flush_row = [&](const std::string& r) {
        std::string cleaned = r;
        std::replace(cleaned.begin(), cleaned.end(), ',', ' ');
        std::replace(cleaned.begin(), cleaned.end(), '\t', ' ');
        std::istringstream in(cleaned);
        std::vector<double> vals;
        std::string tok;
        while (in >> tok) {
            errno = 0;
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0' || errno == ERANGE) {
                throw ParameterError("matrix entry '" + tok + "' is not a number");
            }
            vals.push_back(v);
        }
        if (!vals.empty()) rows.push_back(std::move(vals));
    };
    std::string current;
    for (char ch : text) {
        if (ch == ';' || ch == '\n') {
            flush_row(current);
            current.clear();
        } else {
            current.push_back(ch);
        }
    }
    flush_row(current);
    if (rows.empty()) {
        throw ParameterError("empty matrix");
    }
    const std::size_t cols = rows.front().size();
    Mat out(static_cast<Index>(rows.size()), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != cols) {
            throw ParameterError("matrix row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                                 " entries, expected " + std::to_string(cols));
        }
        for (std::size_t j = 0; j < cols; ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return out;
}

}  // namespace pcsim
