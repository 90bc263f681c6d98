#pragma once

#include "pcsim/scenario.hpp"

#include <optional>
#include <string>

namespace pcsim {

/// Fully resolved run configuration.
struct RunConfig {
    ScenarioSpec spec;
    std::string out_dir = "pcsim_out";
};

/// Values given on the command line; they override the file.
struct ConfigOverrides {
    std::optional<int> scenario;  // 0 = custom
    std::optional<double> dt;
    std::optional<double> t_end;
    std::optional<long long> downsample;
    std::optional<std::string> out_dir;
};

/// Parses a YAML configuration (strict: unknown keys are errors). `source` names the
/// text in error messages, which carry source:line:column and the key path.
/// Base values come from the selected scenario preset (1 when unspecified; "custom"
/// starts from the same grid and controller without disturbances).
RunConfig parse_config_text(const std::string& text, const std::string& source,
                            const ConfigOverrides& overrides = {});
RunConfig parse_config_file(const std::string& path, const ConfigOverrides& overrides = {});

/// Configuration from overrides only (no file).
RunConfig default_config(const ConfigOverrides& overrides = {});

/// Resolved configuration as YAML that parse_config_text reads back to the same spec
/// (doubles written with 17 significant digits).
std::string emit_config_yaml(const RunConfig& cfg);

/// Throws ConfigError if the spec cannot be simulated (bad parameters, disconnected
/// graph, disturbance onset off the integration grid, ...).
void validate_run_config(const RunConfig& cfg, const std::string& source);

}  // namespace pcsim
