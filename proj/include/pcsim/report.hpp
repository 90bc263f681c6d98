#pragma once

#include "pcsim/certificates.hpp"
#include "pcsim/config.hpp"
#include "pcsim/scenario.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pcsim {

/// One pass/fail check evaluated on a finished run.
struct CriterionCheck {
    int id = 0;  // acceptance criterion number, 0 for generic checks
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Checks that apply to the run's scenario (presets 1..4 map to their acceptance
/// criteria; custom runs check the enabled certificates).
std::vector<CriterionCheck> scenario_criteria(const ScenarioResult& r);

nlohmann::json summary_to_json(const Summary& s);
/// Inverse of summary_to_json (null reads back as NaN).
Summary summary_from_json(const nlohmann::json& j);

/// Bitwise comparison (NaN equals NaN). On mismatch names the first differing field.
bool summaries_identical(const Summary& a, const Summary& b, std::string* diff = nullptr);

nlohmann::json result_to_json(const ScenarioResult& r, const std::vector<CriterionCheck>& checks);
std::string format_result_text(const ScenarioResult& r, const std::vector<CriterionCheck>& checks);

/// Writes trajectory.csv, states.csv, summary.json, summary.txt and the resolved
/// config.yaml into cfg.out_dir (created if missing).
void write_run_outputs(const ScenarioResult& r, const RunConfig& cfg, const std::vector<CriterionCheck>& checks);

/// Result of re-reading a run directory and re-evaluating it.
struct ReplayReport {
    std::size_t rows = 0;
    Summary stored;
    Summary recomputed;
    bool summary_match = false;
    std::string mismatch;
    InequalityMonitor krasovskii{1e-6};
    InequalityMonitor shifted{1e-6};
    bool krasovskii_enabled = false;
    bool shifted_enabled = false;
    double max_storage_deviation = 0.0;  // logged V_K / H_s vs recomputed, relative to 1 + |V|

    bool passed() const;
};

/// Reads config.yaml, trajectory.csv, states.csv and summary.json from `dir`,
/// recomputes the summary from the CSV rows and re-evaluates both certificates at
/// every stored state.
ReplayReport replay_run_directory(const std::string& dir);

}  // namespace pcsim
