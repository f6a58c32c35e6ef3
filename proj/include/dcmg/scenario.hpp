#pragma once

// Scenario configuration: JSON schema, built-in presets, CSV output.
//
// Keys carry their SI unit (`C_farad`, `R_ohm`, `t_second`, ...). Unknown
// keys are rejected.

#include "dcmg/sim_engine.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcmg {

/// Schema or validation errors, each prefixed with the JSON path it refers to.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> errors);
    [[nodiscard]] const std::vector<std::string>& errors() const { return errors_; }

private:
    std::vector<std::string> errors_;
};

/// Demand at a junction, as written in a config. `P_step` watts are
/// converted to a held current with the node voltage when applied.
struct DemandSpec {
    std::size_t node = 0;
    double I = 0.0;       // A
    double P = 0.0;       // W, constant power
    double P_step = 0.0;  // W, converted to current once

    bool operator==(const DemandSpec&) const = default;
};

enum class InitialMode { Equilibrium, Explicit };

struct ScenarioConfig {
    std::string name;
    Network network;
    ControllerConfig controller;
    std::vector<DemandSpec> initial_demand;
    InitialMode initial_mode = InitialMode::Equilibrium;
    std::optional<SystemState> initial_state;  // set for InitialMode::Explicit
    std::vector<Event> events;
    double dt = 1e-5;
    double record_dt = 1e-3;
    double duration = 1.0;
    double nominal_voltage = 0.0;
    std::string output;
    std::uint64_t seed = 0;

    bool operator==(const ScenarioConfig& o) const;
};

[[nodiscard]] ScenarioConfig parse_config(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json to_json(const ScenarioConfig& config);

/// Reads a config file, or a built-in preset when `path_or_preset` names one
/// and no such file exists.
[[nodiscard]] ScenarioConfig load_config(const std::string& path_or_preset);
void save_config(const ScenarioConfig& config, const std::filesystem::path& path);

[[nodiscard]] std::vector<std::string> preset_names();
[[nodiscard]] std::optional<ScenarioConfig> find_preset(const std::string& name);

/// RSE four-node network: DGUs at nodes 2 and 4, passive junctions at 1
/// and 3, lines 1-2, 1-3, 3-4.
[[nodiscard]] Network rse_network(double junction_capacitance = kDefaultJunctionCapacitance);

/// Resolves the initial demand and initial state. Throws ConfigError on
/// feasibility problems (with the offending node or event named).
[[nodiscard]] Scenario build_scenario(const ScenarioConfig& config);

/// Trajectory as CSV text: '#' comment lines, one header row, one row per
/// sample; 17 significant digits, LF line endings.
[[nodiscard]] std::string format_csv(const Trajectory& trajectory);
void emit_csv(const Trajectory& trajectory, const std::filesystem::path& path);

/// Column names of format_csv for a trajectory of this shape.
[[nodiscard]] std::vector<std::string> csv_columns(const Trajectory& trajectory);

}  // namespace dcmg
