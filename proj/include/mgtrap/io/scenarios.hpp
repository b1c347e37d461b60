#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgtrap/io/config.hpp"
#include "mgtrap/io/output.hpp"

namespace mgtrap::io {

using Log = std::function<void(const std::string&)>;

struct ScenarioResult {
    nlohmann::json report;
    nlohmann::json meta;
    ArtifactSet artifacts;  ///< includes report.json and meta.json
};

/// Runs the configured scenario entirely in memory. Physics, fit and
/// integration failures propagate as the library's exceptions.
ScenarioResult run_scenario(const ExperimentConfig& cfg, const Log& log = {});

/// Seeds of the ensemble members: seed, seed + 1, ...
std::vector<std::uint64_t> member_seeds(const ExperimentConfig& cfg);

/// Simulation settings with the field model calibrated or built when in field mode.
dynamics::SimulationConfig simulation_for(const ExperimentConfig& cfg);

/// Arrival times for the configured charge schedule (explicit or drawn for `seed`).
std::vector<dynamics::ChargeEvent> charge_schedule(const ChargeSettings& ch, std::uint64_t seed);

/// Controller with solved phases and gains.
control::ControllerConfig resolved_controller(const ExperimentConfig& cfg, const dynamics::SimulationConfig& sim);

}  // namespace mgtrap::io
