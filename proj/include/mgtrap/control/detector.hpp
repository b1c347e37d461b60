#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "mgtrap/dynamics/rng.hpp"

namespace mgtrap::control {

/// Quadrant-photodiode emulation. Difference signals give y and z; the sum
/// signal gives an uncalibrated x response.
struct DetectorConfig {
    Eigen::Vector3d volts_per_meter{1e6, 1e6, 1e6};
    Eigen::Vector3d noise_psd_V2_per_Hz = Eigen::Vector3d::Zero();  ///< one-sided, per channel
    double sample_rate_hz = 5000.0;
    std::optional<double> saturation_V;

    /// Throws ModelError. `max_trap_frequency_hz` enforces the Nyquist rule.
    void validate(double max_trap_frequency_hz = 0.0) const;
};

struct DetectorReading {
    Eigen::Vector3d volts = Eigen::Vector3d::Zero();
    bool saturated = false;
};

class Detector {
public:
    Detector(DetectorConfig cfg, std::uint64_t seed);

    /// v_i = cal_i x_i + n_i, with n_i white of standard deviation sqrt(S fs / 2).
    DetectorReading detect(const Eigen::Vector3d& displacement);

    const DetectorConfig& config() const { return cfg_; }

private:
    DetectorConfig cfg_;
    Eigen::Vector3d sigma_;
    dynamics::NormalStream nx_, ny_, nz_;
};

}  // namespace mgtrap::control
