#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "mgtrap/control/controller.hpp"
#include "mgtrap/control/detector.hpp"
#include "mgtrap/dynamics/simulation.hpp"
#include "mgtrap/field/field_model.hpp"

namespace mgtrap::io {

inline constexpr int kSchemaVersion = 1;

enum class Scenario { thermalize, calibrate_mass, cool, charge_sim, calibrate_field };

std::string scenario_name(Scenario s);

struct FieldSettings {
    field::MultipoleCoefficients terms = field::default_term_selection();
    bool calibrate = true;  ///< coefficients absent: solve them from the target frequencies
    double validity_radius_m = 1e-3;
    double slice_half_width_m = 50e-6;
    int slice_points = 101;
};

/// Electron arrivals drawn as a dead-time Poisson process.
struct PoissonArrivals {
    int count = 5;
    double first_s = 30.0;
    double mean_interval_s = 20.0;
    double dead_time_s = 10.0;
    int delta_e = -1;
    double tail_s = 40.0;  ///< recorded after the last arrival
};

struct ChargeSettings {
    int initial_e = 5;
    std::vector<dynamics::ChargeEvent> events;
    std::optional<PoissonArrivals> poisson;
};

struct AnalysisSettings {
    std::optional<double> settle_s;
    double fit_half_width_linewidths = 10.0;
    double band_half_width_linewidths = 5.0;
    std::size_t mass_blocks = 20;
    std::size_t histogram_bins = 40;
    double lockin_time_constant_s = 1.0;
    double step_threshold = 6.0;
    double min_dwell_time_constants = 5.0;
};

struct ExperimentConfig {
    Scenario scenario = Scenario::thermalize;
    std::uint64_t seed = 1;
    std::optional<std::string> output_dir;
    std::size_t ensemble_size = 1;

    dynamics::SimulationConfig sim;
    field::TrapFrequencies target_frequencies{59.6, 96.9, 7.01};
    FieldSettings field;

    control::DetectorConfig detector;
    std::optional<control::ControllerConfig> controller;
    /// Per-axis cooled linewidth (Hz) used to solve the feedback gain.
    std::array<std::optional<double>, 3> target_linewidth_hz;
    /// Per-axis phase left to be solved so the loop is velocity proportional.
    std::array<bool, 3> auto_phase{false, false, false};

    std::optional<ChargeSettings> charge;
    AnalysisSettings analysis;

    nlohmann::json document;  ///< the source document with any seed override applied
    std::string hash;         ///< FNV-1a of the document without seed and output_dir
};

/// Checks every key and returns all problems found, each prefixed with its
/// key path. An empty list means the document is valid.
std::vector<std::string> diagnose(const nlohmann::json& doc);

/// Throws ConfigError carrying all diagnostics.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Throws IoError when the file cannot be read, ConfigError for malformed JSON.
nlohmann::json read_json(const std::filesystem::path& path);

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = {});

std::string config_hash(const nlohmann::json& doc);

}  // namespace mgtrap::io
