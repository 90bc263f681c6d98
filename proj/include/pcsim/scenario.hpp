#pragma once

#include "pcsim/certificates.hpp"
#include "pcsim/closed_loop.hpp"
#include "pcsim/controllers.hpp"
#include "pcsim/graph.hpp"
#include "pcsim/grid_model.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pcsim {

struct CertificateToggles {
    bool krasovskii = true;
    bool shifted = true;
    std::optional<Vec> gamma;  // diagonal of Gamma; auto-selected when absent
    long long stride = 1;      // evaluate certificates on every stride-th grid point
};

/// Everything needed to run one closed-loop simulation.
struct ScenarioSpec {
    int id = 0;  // 1..4 for the presets, 0 for custom
    std::string name = "custom";
    Topology topology;
    GridParameters params;
    DisturbanceProfile disturbance;
    Vec additive;  // generic constant disturbance d added to x'
    ControllerSpec controller;
    double dt = 1e-5;
    double t_end = 15.0;
    long long downsample = 0;  // 0: smallest k giving at most 20000 recorded intervals
    double cpl_guard = 50.0;
    CertificateToggles certificates;

    /// First disturbance onset, or NaN without disturbances.
    double step_time() const;
};

/// The four microgrid scenarios: 1 load step, 2 plus a decaying oscillation at node
/// index 2, 3 plus a persistent oscillation at node index 2, 4 load step with M_33 = 80.
ScenarioSpec scenario_preset(int id);

/// One recorded grid point.
struct TrajectoryRow {
    double t = 0.0;
    Vec V, I, u, y;
    double consensus_error = 0.0;
    double voltage_avg = 0.0;
    double V_K = 0.0;
    double W_K = 0.0;
    double H_s = std::numeric_limits<double>::quiet_NaN();
    double margin_K = std::numeric_limits<double>::quiet_NaN();
    double margin_s = std::numeric_limits<double>::quiet_NaN();
    Vec z;  // full closed-loop state
};

struct Trajectory {
    Index nu = 0;
    std::vector<TrajectoryRow> rows;
};

/// Constant-load reference on one segment between disturbance onsets.
struct SegmentReference {
    double t_start = 0.0;
    LoadSet loads;          // step part of the loads on the segment
    bool constant = true;   // loads are constant on the whole segment
    bool has_limit = true;  // a constant equilibrium exists (false for persistent oscillation)
    Vec z_star;             // empty when !has_limit
    Vec z_nominal;          // equilibrium of the step part of the loads (always solved)
    double residual = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
};

/// Recomputable from the recorded rows alone (CSV round-trip reproduces it exactly).
struct Summary {
    std::size_t rows = 0;
    double t_final = 0.0;
    double terminal_consensus_error = 0.0;
    double terminal_voltage_avg = 0.0;
    Vec terminal_currents;
    Vec current_ratios;  // I_i / I_1
    double peak_consensus_error_post_step = std::numeric_limits<double>::quiet_NaN();  // [t_s, t_s + 0.5]
    double max_consensus_error_final_2s = std::numeric_limits<double>::quiet_NaN();
    double current_peak_to_peak_final_1s = std::numeric_limits<double>::quiet_NaN();
    double min_margin_K = std::numeric_limits<double>::quiet_NaN();
    double min_margin_s = std::numeric_limits<double>::quiet_NaN();
};

Summary summarize(const Trajectory& traj, double step_time);

/// Same windows as Summary, streamed over every grid point.
struct GridMetrics {
    long long steps = 0;
    double terminal_consensus_error = 0.0;
    double terminal_voltage_avg = 0.0;
    double peak_consensus_error_post_step = std::numeric_limits<double>::quiet_NaN();
    double max_consensus_error_final_2s = std::numeric_limits<double>::quiet_NaN();
    double current_peak_to_peak_final_1s = std::numeric_limits<double>::quiet_NaN();
    double min_voltage = std::numeric_limits<double>::infinity();
    double min_margin_K = std::numeric_limits<double>::infinity();
    double min_margin_s = std::numeric_limits<double>::infinity();
};

struct CertificateReport {
    bool krasovskii_enabled = false;
    bool shifted_enabled = false;
    std::string krasovskii_note;  // why (parts of) the run were skipped
    std::string shifted_note;
    InequalityMonitor krasovskii{1e-6};
    InequalityMonitor shifted{1e-6};
    EnergyBalance krasovskii_balance{1e-5};
    EnergyBalance shifted_balance{1e-5};
    Vec gamma;
    double max_equilibrium_residual = 0.0;
};

struct ScenarioResult {
    ScenarioSpec spec;
    Trajectory trajectory;
    Summary summary;
    GridMetrics metrics;
    CertificateReport certificates;
    std::vector<SegmentReference> references;
    std::vector<std::string> warnings;
    long long downsample = 1;
    double stiffness_index = 0.0;  // h * spectral radius of the closed-loop Jacobian
    double runtime_s = 0.0;
};

/// Builds the model and controller, starts at the pre-disturbance equilibrium and
/// integrates to t_end. Throws CplGuardError / NumericError / ConvergenceError.
ScenarioResult run_scenario(const ScenarioSpec& spec);

/// Equilibria of every constant-load segment of the scenario (no integration).
std::vector<SegmentReference> scenario_equilibria(const ScenarioSpec& spec);

/// Runs the scenario with the integral-form controller (u' = -M^T L M y) and the
/// xi-form controller (u = -M^T E xi) side by side from matched initial conditions
/// u_int(0) = -M^T E xi(0) and reports the largest input difference on the grid.
struct FormEquivalence {
    double max_input_difference = 0.0;
    double terminal_consensus_value_integral = 0.0;  // mean of M y at t_end
    double terminal_consensus_value_xi = 0.0;
    long long steps = 0;
};
FormEquivalence compare_controller_forms(const ScenarioSpec& spec);

/// Recording interval giving at most 20000 intervals.
long long default_downsample(long long steps);

}  // namespace pcsim
