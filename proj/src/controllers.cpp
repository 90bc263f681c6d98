#include "pcsim/controllers.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace pcsim {

namespace {

struct VariantEntry {
    ControllerVariant variant;
    std::string_view name;
};

constexpr std::array<VariantEntry, 6> kVariants{{
    {ControllerVariant::IntegralLaplacian, "IntegralLaplacian"},
    {ControllerVariant::KrasovskiiWeighted, "KrasovskiiWeighted"},
    {ControllerVariant::KrasovskiiExtended, "KrasovskiiExtended"},
    {ControllerVariant::ShiftedXi, "ShiftedXi"},
    {ControllerVariant::ShiftedXiDamped, "ShiftedXiDamped"},
    {ControllerVariant::ShiftedXiDampedFiltered, "ShiftedXiDampedFiltered"},
}};

void require_spd(const Mat& m, Index n, const char* name) {
    require_shape(m, n, n, name);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw ParameterError(std::string(name) + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues()(0) > 1e-12 * scale)) {
        throw ParameterError(std::string(name) + " must be positive definite");
    }
}

}  // namespace

std::string_view variant_name(ControllerVariant v) {
    for (const auto& e : kVariants) {
        if (e.variant == v) {
            return e.name;
        }
    }
    return "unknown";
}

ControllerVariant parse_variant(std::string_view name) {
    for (const auto& e : kVariants) {
        if (e.name == name) {
            return e.variant;
        }
    }
    std::string known;
    for (const auto& e : kVariants) {
        known += (known.empty() ? "" : ", ") + std::string(e.name);
    }
    throw ParameterError("unknown controller variant '" + std::string(name) + "' (known: " + known + ")");
}

std::string_view ubar_mode_name(UBarMode m) {
    switch (m) {
        case UBarMode::None: return "none";
        case UBarMode::Constant: return "constant";
        case UBarMode::VoltageRegulating: return "voltage_regulating";
    }
    return "none";
}

UBarMode parse_ubar_mode(std::string_view name) {
    if (name == "none") return UBarMode::None;
    if (name == "constant") return UBarMode::Constant;
    if (name == "voltage_regulating") return UBarMode::VoltageRegulating;
    throw ParameterError("unknown u_bar mode '" + std::string(name) +
                         "' (known: none, constant, voltage_regulating)");
}

bool is_integral_form(ControllerVariant v) {
    return v == ControllerVariant::IntegralLaplacian || v == ControllerVariant::KrasovskiiWeighted ||
           v == ControllerVariant::KrasovskiiExtended;
}

bool is_xi_form(ControllerVariant v) { return !is_integral_form(v); }

bool has_filter(ControllerVariant v) {
    return v == ControllerVariant::KrasovskiiExtended || v == ControllerVariant::ShiftedXiDampedFiltered;
}

bool has_damping(ControllerVariant v) {
    return v == ControllerVariant::ShiftedXiDamped || v == ControllerVariant::ShiftedXiDampedFiltered;
}

ControllerSpec ControllerSpec::microgrid_defaults(ControllerVariant variant, Index nu, Index channels) {
    ControllerSpec s;
    s.variant = variant;
    s.M = 100.0 * Mat::Identity(nu, nu);
    s.K = 0.2 * Mat::Identity(nu, nu);
    s.G = Mat::Identity(channels, channels);
    s.u_bar_mode = UBarMode::VoltageRegulating;
    s.v_ref = 380.0;
    return s;
}

Controller::Controller(ControllerSpec spec, const std::vector<Edge>& comm_edges, Index nu, Vec plant_r)
    : spec_(std::move(spec)), plant_r_(std::move(plant_r)), nu_(nu) {
    if (spec_.consensus_subset.empty()) {
        factor_ = factor_laplacian(comm_edges, nu);
    } else {
        factor_ = embedded_subset_factor(comm_edges, nu, spec_.consensus_subset);
    }
    build();
}

Controller::Controller(ControllerSpec spec, LaplacianFactor factor, Vec plant_r)
    : spec_(std::move(spec)), factor_(std::move(factor)), plant_r_(std::move(plant_r)) {
    nu_ = factor_.nodes();
    build();
}

void Controller::build() {
    const Index n = nu_;
    const Index nc = factor_.channels();
    const ControllerVariant v = spec_.variant;
    require_shape(spec_.M, n, n, "controller weight M");
    if (!spec_.consensus_subset.empty() && v == ControllerVariant::IntegralLaplacian) {
        throw ParameterError("IntegralLaplacian acts on all nodes; use KrasovskiiWeighted for partial consensus");
    }
    if (has_filter(v)) {
        require_spd(spec_.K, n, "controller gain K");
    }
    if (has_damping(v)) {
        require_spd(spec_.G, nc, "damping gain G");
    }

    // Nodes taking part in the consensus and the effective weight.
    consensus_nodes_.clear();
    m_eff_ = spec_.M;
    if (spec_.consensus_subset.empty()) {
        for (Index i = 0; i < n; ++i) consensus_nodes_.push_back(i);
    } else {
        std::vector<bool> in(static_cast<std::size_t>(n), false);
        for (Index i : spec_.consensus_subset) {
            if (i < 0 || i >= n) {
                throw ParameterError("consensus subset index " + std::to_string(i) + " out of range");
            }
            in[static_cast<std::size_t>(i)] = true;
        }
        for (Index i = 0; i < n; ++i) {
            if (in[static_cast<std::size_t>(i)]) {
                consensus_nodes_.push_back(i);
            } else {
                m_eff_.row(i).setZero();
                m_eff_.col(i).setZero();
            }
        }
    }
    const double mmax = m_eff_.cwiseAbs().maxCoeff();
    weight_scale_ = mmax > 0.0 ? mmax : 1.0;

    const Mat& e = factor_.factor;
    etm_ = e.transpose() * m_eff_;
    w_l_ = etm_.transpose() * etm_;

    ubar_f_ = Vec::Zero(n);
    ubar_c_ = Vec::Zero(n);
    switch (spec_.u_bar_mode) {
        case UBarMode::None: break;
        case UBarMode::Constant:
            require_size(spec_.u_bar_value, n, "constant u_bar");
            ubar_c_ = spec_.u_bar_value;
            break;
        case UBarMode::VoltageRegulating:
            require_size(plant_r_, n, "plant resistance for voltage-regulating u_bar");
            if (!std::isfinite(spec_.v_ref)) {
                throw ParameterError("voltage reference must be finite");
            }
            ubar_f_ = plant_r_;
            ubar_c_ = Vec::Constant(n, spec_.v_ref);
            break;
    }

    dim_ = 0;
    u_off_ = xi_off_ = rho_off_ = -1;
    if (is_integral_form(v)) {
        u_off_ = dim_;
        dim_ += n;
    } else {
        xi_off_ = dim_;
        dim_ += nc;
    }
    if (has_filter(v)) {
        rho_off_ = dim_;
        dim_ += n;
    }

    ac_ = Mat::Zero(dim_, dim_);
    bc_ = Mat::Zero(dim_, n);
    cu_ = Mat::Zero(n, dim_);
    du_ = Mat::Zero(n, n);
    const Mat I = Mat::Identity(n, n);

    switch (v) {
        case ControllerVariant::IntegralLaplacian:
        case ControllerVariant::KrasovskiiWeighted:
            bc_.block(u_off_, 0, n, n) = -w_l_;
            cu_.block(0, u_off_, n, n) = I;
            break;
        case ControllerVariant::KrasovskiiExtended:
            ac_.block(u_off_, rho_off_, n, n) = spec_.K;
            ac_.block(rho_off_, rho_off_, n, n) = -I;
            bc_.block(u_off_, 0, n, n) = -w_l_ - spec_.K;
            bc_.block(rho_off_, 0, n, n) = I;
            cu_.block(0, u_off_, n, n) = I;
            break;
        case ControllerVariant::ShiftedXi:
        case ControllerVariant::ShiftedXiDamped:
        case ControllerVariant::ShiftedXiDampedFiltered:
            bc_.block(xi_off_, 0, nc, n) = etm_;
            cu_.block(0, xi_off_, n, nc) = -etm_.transpose();
            if (has_damping(v)) {
                du_ = -etm_.transpose() * spec_.G * etm_;
            }
            if (has_filter(v)) {
                ac_.block(rho_off_, rho_off_, n, n) = -I;
                bc_.block(rho_off_, 0, n, n) = I;
                cu_.block(0, rho_off_, n, n) = -spec_.K;
            }
            break;
    }
    du_.diagonal() += ubar_f_;
}

void Controller::output(const Vec& s, const Vec& y, Vec& u) const {
    u.noalias() = cu_ * s;
    u.noalias() += du_ * y;
    u += ubar_c_;
}

Vec Controller::output(const Vec& s, const Vec& y) const {
    require_size(s, dim_, "controller state");
    require_size(y, nu_, "output");
    Vec u(nu_);
    output(s, y, u);
    return u;
}

void Controller::derivative(const Vec& s, const Vec& y, Vec& ds) const {
    ds.noalias() = ac_ * s;
    ds.noalias() += bc_ * y;
}

Vec Controller::derivative(const Vec& s, const Vec& y) const {
    require_size(s, dim_, "controller state");
    require_size(y, nu_, "output");
    Vec ds(dim_);
    derivative(s, y, ds);
    return ds;
}

void Controller::output_rate(const Vec& ds, const Vec& dy, Vec& du) const {
    du.noalias() = cu_ * ds;
    du.noalias() += du_ * dy;
}

Vec Controller::output_rate(const Vec& ds, const Vec& dy) const {
    Vec du(nu_);
    output_rate(ds, dy, du);
    return du;
}

Vec Controller::consensus_state(const Vec& y) const {
    require_size(y, nu_, "output");
    Vec s = Vec::Zero(dim_);
    if (rho_off_ >= 0) {
        s.segment(rho_off_, nu_) = y;
    }
    return s;
}

Mat Controller::conserved_functionals() const {
    Mat x(dim_, dim_ + nu_);
    x << ac_, bc_;
    Eigen::JacobiSVD<Mat> svd(x, Eigen::ComputeFullU);
    const double tol = 1e-10 * std::max(1.0, svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
    Index rank = 0;
    for (Index i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > tol) ++rank;
    }
    return svd.matrixU().rightCols(dim_ - rank).transpose();
}

double Controller::consensus_error(const Vec& y) const {
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (Index i : consensus_nodes_) {
        const double wi = m_eff_.row(i).dot(y);
        if (first) {
            lo = hi = wi;
            first = false;
        } else {
            lo = std::min(lo, wi);
            hi = std::max(hi, wi);
        }
    }
    return (hi - lo) / weight_scale_;
}

}  // namespace pcsim
