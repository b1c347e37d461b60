#pragma once

#include <optional>
#include <span>
#include <vector>

namespace mgtrap::analysis {

struct StepDetectionConfig {
    double time_constant_s = 1.0;
    double min_dwell_time_constants = 5.0;  ///< also the width of each comparison window
    double threshold = 6.0;                 ///< |t| needed to accept a step
    double ambiguous_fraction = 0.5;        ///< peaks above this fraction of the threshold are flagged
    double settle_time_constants = 6.0;     ///< ignored start-up of the lock-in output
    double guard_time_constants = 3.0;      ///< excluded around a step when measuring levels
    std::optional<double> quantum;          ///< expected response per electron, if known
};

struct ChargeStep {
    double t = 0.0;
    double level_before = 0.0;
    double level_after = 0.0;
    double t_statistic = 0.0;
    double electrons = 0.0;  ///< |after - before| / quantum
};

struct StepReport {
    std::vector<ChargeStep> steps;
    std::vector<double> ambiguous_times;  ///< sub-threshold peaks, or steps not one quantum high
    double quantum = 0.0;
    double initial_level = 0.0;
    double final_level = 0.0;
    bool reached_zero = false;
    std::optional<double> zero_time;  ///< first time the level sits at zero
    double noise_sigma = 0.0;

    bool ambiguous() const { return !ambiguous_times.empty(); }
};

/// Changepoints in a lock-in amplitude record by a rolling two-sample
/// t-test between adjacent windows of `min_dwell` length. The noise scale
/// is a robust estimate from lagged differences, and the window means are
/// treated as having 2 tau correlation time.
StepReport detect_charge_steps(std::span<const double> amplitude, double sample_rate_hz,
                               const StepDetectionConfig& cfg);

}  // namespace mgtrap::analysis
