#include "pcsim/grid_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pcsim {

namespace {

void require_positive(const Vec& v, Index n, const char* name) {
    require_size(v, n, name);
    for (Index i = 0; i < n; ++i) {
        if (!(v(i) > 0.0) || !std::isfinite(v(i))) {
            throw ParameterError(std::string(name) + " must be strictly positive entrywise");
        }
    }
}

void require_nonnegative(const Vec& v, Index n, const char* name) {
    require_size(v, n, name);
    for (Index i = 0; i < n; ++i) {
        if (!(v(i) >= 0.0) || !std::isfinite(v(i))) {
            throw ParameterError(std::string(name) + " must be nonnegative entrywise");
        }
    }
}

}  // namespace

void GridParameters::validate(Index nu, Index mu) const {
    require_positive(R, nu, "R");
    require_positive(L, nu, "L");
    require_positive(C, nu, "C");
    require_positive(Rt, mu, "Rt");
    require_positive(Lt, mu, "Lt");
    require_nonnegative(loads.G, nu, "G_L");
    require_nonnegative(loads.I, nu, "I_L");
    require_nonnegative(loads.P, nu, "P_L");
}

GridParameters GridParameters::four_node_defaults() {
    GridParameters p;
    p.R = Vec::Constant(4, 0.2);
    p.L = Vec::Constant(4, 1.8e-3);
    p.C = Vec::Constant(4, 2.2e-3);
    p.Rt = (Vec(4) << 70e-3, 50e-3, 80e-3, 60e-3).finished();
    p.Lt = (Vec(4) << 2.1e-6, 2.3e-6, 2.0e-6, 1.8e-6).finished();
    p.loads.P = (Vec(4) << 1.0e3, 2.5e3, 1.5e3, 5.0e3).finished();
    p.loads.G = (Vec(4) << 0.08, 0.04, 0.02, 0.08).finished();
    p.loads.I = (Vec(4) << 12.5, 7.5, 5.0, 15.0).finished();
    return p;
}

// ---------------------------------------------------------------------------

DisturbanceProfile::DisturbanceProfile(std::vector<LoadDisturbance> terms) : terms_(std::move(terms)) {}

void DisturbanceProfile::add(const LoadDisturbance& d) { terms_.push_back(d); }

void DisturbanceProfile::validate(Index nu) const {
    for (const LoadDisturbance& d : terms_) {
        if (d.node < 0 || d.node >= nu) {
            throw ParameterError("disturbance node " + std::to_string(d.node) + " out of range");
        }
        if (!std::isfinite(d.amplitude) || !std::isfinite(d.onset) || d.onset < 0.0) {
            throw ParameterError("disturbance amplitude/onset must be finite, onset >= 0");
        }
        if (d.shape == DisturbanceShape::ConvergingSinusoid && !(d.decay > 0.0)) {
            throw ParameterError("converging sinusoid needs a positive decay rate");
        }
    }
}

namespace {

double shape_value(const LoadDisturbance& d, double t) {
    if (t < d.onset) {
        return 0.0;
    }
    switch (d.shape) {
        case DisturbanceShape::Step:
            return d.amplitude;
        case DisturbanceShape::ConvergingSinusoid:
            return d.amplitude * std::exp(-d.decay * (t - d.onset)) * std::sin(d.frequency * t);
        case DisturbanceShape::PersistentSinusoid:
            return d.amplitude * std::sin(d.frequency * t);
    }
    return 0.0;
}

void add_to(LoadSet& out, const LoadDisturbance& d, double v) {
    switch (d.channel) {
        case LoadChannel::Conductance: out.G(d.node) += v; break;
        case LoadChannel::Current: out.I(d.node) += v; break;
        case LoadChannel::Power: out.P(d.node) += v; break;
    }
}

}  // namespace

LoadSet DisturbanceProfile::eval(double t, Index nu) const {
    LoadSet out = LoadSet::zeros(nu);
    accumulate(t, out);
    return out;
}

void DisturbanceProfile::accumulate(double t, LoadSet& out) const {
    for (const LoadDisturbance& d : terms_) {
        add_to(out, d, shape_value(d, t));
    }
}

LoadSet DisturbanceProfile::steady_part(double t, Index nu) const {
    LoadSet out = LoadSet::zeros(nu);
    for (const LoadDisturbance& d : terms_) {
        if (d.shape == DisturbanceShape::Step && t >= d.onset) {
            add_to(out, d, d.amplitude);
        }
    }
    return out;
}

bool DisturbanceProfile::time_varying_at(double t) const {
    return std::any_of(terms_.begin(), terms_.end(), [t](const LoadDisturbance& d) {
        return d.shape != DisturbanceShape::Step && t >= d.onset && d.amplitude != 0.0;
    });
}

bool DisturbanceProfile::has_persistent_variation() const {
    return std::any_of(terms_.begin(), terms_.end(), [](const LoadDisturbance& d) {
        return d.shape == DisturbanceShape::PersistentSinusoid && d.amplitude != 0.0;
    });
}

std::vector<double> DisturbanceProfile::breakpoints() const {
    std::vector<double> bp;
    for (const LoadDisturbance& d : terms_) {
        if (d.onset > 0.0) {
            bp.push_back(d.onset);
        }
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    return bp;
}

// ---------------------------------------------------------------------------

GridModel::GridModel(Topology topology, GridParameters params, DisturbanceProfile disturbance,
                     Vec additive)
    : topo_(std::move(topology)),
      params_(std::move(params)),
      disturbance_(std::move(disturbance)),
      additive_(std::move(additive)) {
    topo_.validate();
    layout_ = {topo_.nu, topo_.mu()};
    params_.validate(layout_.nu, layout_.mu);
    disturbance_.validate(layout_.nu);
    if (additive_.size() == 0) {
        additive_ = Vec::Zero(layout_.size());
    }
    require_size(additive_, layout_.size(), "additive disturbance d");

    incidence_ = build_incidence(topo_);
    inv_l_ = params_.L.cwiseInverse();
    inv_c_ = params_.C.cwiseInverse();
    inv_lt_ = params_.Lt.cwiseInverse();
    hess_.resize(layout_.size());
    hess_ << inv_l_, inv_c_, inv_lt_;
    for (const Edge& e : topo_.phys_edges) {
        tails_.push_back(e.tail);
        heads_.push_back(e.head);
    }
}

LoadSet GridModel::loads_at(double t) const {
    LoadSet out;
    loads_at(t, out);
    return out;
}

void GridModel::loads_at(double t, LoadSet& out) const {
    out.G = params_.loads.G;
    out.I = params_.loads.I;
    out.P = params_.loads.P;
    disturbance_.accumulate(t, out);
}

double GridModel::hamiltonian(const Vec& x) const {
    require_size(x, state_dim(), "state");
    return 0.5 * x.cwiseAbs2().dot(hess_);
}

Vec GridModel::grad_hamiltonian(const Vec& x) const {
    require_size(x, state_dim(), "state");
    return hess_.cwiseProduct(x);
}

void GridModel::output(const Vec& x, Vec& y) const {
    y = x.head(nu()).cwiseProduct(inv_l_);
}

Vec GridModel::output(const Vec& x) const {
    require_size(x, state_dim(), "state");
    Vec y;
    output(x, y);
    return y;
}

Vec GridModel::voltages(const Vec& x) const {
    require_size(x, state_dim(), "state");
    return x.segment(nu(), nu()).cwiseProduct(inv_c_);
}

void GridModel::vector_field(const Vec& x, const Vec& u, const LoadSet& loads, Vec& dx,
                             double time) const {
    const Index n = nu();
    const Index m = mu();
    dx.resize(state_dim());
    const double* phi = x.data();
    const double* q = x.data() + n;
    const double* phit = x.data() + 2 * n;
    double* dphi = dx.data();
    double* dq = dx.data() + n;
    double* dphit = dx.data() + 2 * n;

    for (Index i = 0; i < n; ++i) {
        const double current = phi[i] * inv_l_(i);
        const double v = q[i] * inv_c_(i);
        double cpl = 0.0;
        if (loads.P(i) != 0.0) {
            if (!(v >= guard_voltage_)) {
                std::ostringstream msg;
                msg << "constant-power load guard tripped at node " << i + 1 << ": V = " << v
                    << " V < " << guard_voltage_ << " V (t = " << time << " s)";
                throw CplGuardError(msg.str(), i, v, time);
            }
            cpl = loads.P(i) / v;
        }
        dphi[i] = -params_.R(i) * current - v + u(i) + additive_(i);
        dq[i] = current - loads.G(i) * v - loads.I(i) - cpl + additive_(n + i);
    }
    for (Index k = 0; k < m; ++k) {
        const double it = phit[k] * inv_lt_(k);
        const Index a = tails_[static_cast<std::size_t>(k)];
        const Index b = heads_[static_cast<std::size_t>(k)];
        dq[a] += it;
        dq[b] -= it;
        dphit[k] = -(q[a] * inv_c_(a) - q[b] * inv_c_(b)) - params_.Rt(k) * it + additive_(2 * n + k);
    }
}

void GridModel::vector_field(double t, const Vec& x, const Vec& u, Vec& dx) const {
    require_size(x, state_dim(), "state");
    require_size(u, nu(), "input");
    vector_field(x, u, loads_at(t), dx, t);
}

Mat GridModel::jacobian(const Vec& x, const LoadSet& loads) const {
    const Index n = nu();
    const Index m = mu();
    Mat j = Mat::Zero(state_dim(), state_dim());
    for (Index i = 0; i < n; ++i) {
        const double q = x(n + i);
        j(i, i) = -params_.R(i) * inv_l_(i);
        j(i, n + i) = -inv_c_(i);
        j(n + i, i) = inv_l_(i);
        j(n + i, n + i) = -loads.G(i) * inv_c_(i) + loads.P(i) * params_.C(i) / (q * q);
    }
    for (Index k = 0; k < m; ++k) {
        const Index a = tails_[static_cast<std::size_t>(k)];
        const Index b = heads_[static_cast<std::size_t>(k)];
        j(n + a, 2 * n + k) += inv_lt_(k);
        j(n + b, 2 * n + k) -= inv_lt_(k);
        j(2 * n + k, n + a) = -inv_c_(a);
        j(2 * n + k, n + b) = inv_c_(b);
        j(2 * n + k, 2 * n + k) = -params_.Rt(k) * inv_lt_(k);
    }
    return j;
}

void GridModel::jacobian_times(const Vec& x, const LoadSet& loads, const Vec& v, Vec& out) const {
    const Index n = nu();
    const Index m = mu();
    out.resize(state_dim());
    for (Index i = 0; i < n; ++i) {
        const double q = x(n + i);
        out(i) = -params_.R(i) * inv_l_(i) * v(i) - inv_c_(i) * v(n + i);
        out(n + i) = inv_l_(i) * v(i) +
                     (-loads.G(i) * inv_c_(i) + loads.P(i) * params_.C(i) / (q * q)) * v(n + i);
    }
    for (Index k = 0; k < m; ++k) {
        const Index a = tails_[static_cast<std::size_t>(k)];
        const Index b = heads_[static_cast<std::size_t>(k)];
        const double it = inv_lt_(k) * v(2 * n + k);
        out(n + a) += it;
        out(n + b) -= it;
        out(2 * n + k) = -inv_c_(a) * v(n + a) + inv_c_(b) * v(n + b) - params_.Rt(k) * it;
    }
}

}  // namespace pcsim
