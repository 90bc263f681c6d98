#pragma once

#include "pcsim/common.hpp"
#include "pcsim/graph.hpp"

#include <vector>

namespace pcsim {

/// Per-node load triple in SI units (S, A, W).
struct LoadSet {
    Vec G;
    Vec I;
    Vec P;

    static LoadSet zeros(Index nu) { return {Vec::Zero(nu), Vec::Zero(nu), Vec::Zero(nu)}; }
};

/// Filter, line and nominal load parameters of the DC network. SI units throughout.
struct GridParameters {
    Vec R, L, C;    // per node: filter resistance, inductance, capacitance
    Vec Rt, Lt;     // per line
    LoadSet loads;  // nominal G_L, I_L, P_L

    void validate(Index nu, Index mu) const;

    /// Defaults for the four-node ring. Filter and line values are representative
    /// low-voltage DC values; loads follow the published load table.
    static GridParameters four_node_defaults();
};

enum class LoadChannel { Conductance, Current, Power };

enum class DisturbanceShape {
    Step,                // amplitude for t >= onset
    ConvergingSinusoid,  // amplitude * exp(-decay (t - onset)) * sin(frequency t), t >= onset
    PersistentSinusoid,  // amplitude * sin(frequency t), t >= onset
};

/// One additive load deviation at a node. Amplitude in SI (W for Power).
struct LoadDisturbance {
    Index node = 0;
    LoadChannel channel = LoadChannel::Power;
    DisturbanceShape shape = DisturbanceShape::Step;
    double onset = 0.0;
    double amplitude = 0.0;
    double decay = 0.0;
    double frequency = 0.0;
};

/// Time-varying load deviations; evaluable at any t >= 0.
class DisturbanceProfile {
public:
    DisturbanceProfile() = default;
    explicit DisturbanceProfile(std::vector<LoadDisturbance> terms);

    const std::vector<LoadDisturbance>& terms() const noexcept { return terms_; }
    void add(const LoadDisturbance& d);

    /// Load deltas at time t.
    LoadSet eval(double t, Index nu) const;
    /// Adds the load deltas at time t to `out` (no allocation).
    void accumulate(double t, LoadSet& out) const;

    /// Deltas of step terms only (the sinusoidal parts dropped): the constant
    /// load level the profile settles around after time t.
    LoadSet steady_part(double t, Index nu) const;

    /// True if a sinusoidal term is active at t (loads not locally constant).
    bool time_varying_at(double t) const;

    /// True if some sinusoidal term keeps a non-vanishing amplitude forever.
    bool has_persistent_variation() const;

    /// Sorted distinct onset times (discontinuities of the profile).
    std::vector<double> breakpoints() const;

    void validate(Index nu) const;

private:
    std::vector<LoadDisturbance> terms_;
};

/// Index ranges of the stacked state x = (phi, q, phi_t).
struct StateLayout {
    Index nu = 0;
    Index mu = 0;

    Index size() const noexcept { return 2 * nu + mu; }
    Index phi() const noexcept { return 0; }
    Index q() const noexcept { return nu; }
    Index phit() const noexcept { return 2 * nu; }
};

/// Islanded DC network: x' = (J - R) grad H(x) - [0; I_L + P_L ./ (q./C); 0] + g u + d,
/// with output y = phi ./ L. Load deviations from the profile are added to the
/// nominal loads at evaluation time.
class GridModel {
public:
    GridModel(Topology topology, GridParameters params, DisturbanceProfile disturbance = {},
              Vec additive = {});

    const Topology& topology() const noexcept { return topo_; }
    const GridParameters& params() const noexcept { return params_; }
    const DisturbanceProfile& disturbance() const noexcept { return disturbance_; }
    const StateLayout& layout() const noexcept { return layout_; }
    const Mat& incidence() const noexcept { return incidence_; }
    const Vec& additive() const noexcept { return additive_; }
    Index nu() const noexcept { return layout_.nu; }
    Index mu() const noexcept { return layout_.mu; }
    Index state_dim() const noexcept { return layout_.size(); }

    /// Voltage below which a node with a nonzero constant-power load aborts the run.
    double cpl_guard_voltage() const noexcept { return guard_voltage_; }
    void set_cpl_guard_voltage(double v) { guard_voltage_ = v; }

    LoadSet loads_at(double t) const;
    /// Same as loads_at(t), writing into preallocated storage.
    void loads_at(double t, LoadSet& out) const;

    double hamiltonian(const Vec& x) const;
    Vec grad_hamiltonian(const Vec& x) const;
    /// Diagonal of the constant Hessian diag(L^-1, C^-1, Lt^-1).
    const Vec& hessian_diagonal() const noexcept { return hess_; }
    Mat hessian() const { return hess_.asDiagonal(); }

    void output(const Vec& x, Vec& y) const;
    Vec output(const Vec& x) const;
    Vec voltages(const Vec& x) const;

    /// Vector field with explicit loads; `time` is only used in diagnostics.
    void vector_field(const Vec& x, const Vec& u, const LoadSet& loads, Vec& dx,
                      double time = 0.0) const;
    /// Vector field at time t with loads from the disturbance profile.
    void vector_field(double t, const Vec& x, const Vec& u, Vec& dx) const;

    /// State Jacobian of the vector field (u enters affinely through g = [I;0;0]).
    Mat jacobian(const Vec& x, const LoadSet& loads) const;
    /// Jacobian-vector product J(x) v without forming J.
    void jacobian_times(const Vec& x, const LoadSet& loads, const Vec& v, Vec& out) const;

    /// Load current I_L,i(V) = G V + I + P / V at node i.
    static double load_current(double voltage, double g, double i, double p) {
        return g * voltage + i + p / voltage;
    }

private:
    Topology topo_;
    GridParameters params_;
    DisturbanceProfile disturbance_;
    Vec additive_;
    StateLayout layout_;
    Mat incidence_;
    Vec hess_;
    Vec inv_l_, inv_c_, inv_lt_;
    std::vector<Index> tails_, heads_;
    double guard_voltage_ = 50.0;
};

}  // namespace pcsim
