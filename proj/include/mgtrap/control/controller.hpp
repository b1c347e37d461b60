#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mgtrap/control/detector.hpp"
#include "mgtrap/control/filters.hpp"
#include "mgtrap/dynamics/simulation.hpp"

namespace mgtrap::control {

struct AxisFeedback {
    double center_hz = 0.0;
    double bandwidth_hz = 0.0;
    double phase_deg = 90.0;  ///< +90 makes the filtered signal proportional to velocity
    double gain_N_per_V = 0.0;
};

struct ControllerConfig {
    std::array<std::optional<AxisFeedback>, 3> axes;
    Eigen::Vector3d actuator_direction{0.0, 1.0, 0.0};  ///< unit vector of the pushing beam
    double force_offset_N = 0.0;
    double force_min_N = 0.0;
    double force_max_N = 1e-12;
    int latency_samples = 1;
    double sample_rate_hz = 5000.0;

    /// Throws ConfigError listing every violated invariant.
    void validate() const;
    std::vector<std::string> diagnostics() const;
};

/// Band-pass, phase shift and gain per axis, with a pipeline delay of
/// `latency_samples`. The modulation is -gain * (shifted, filtered signal),
/// so a positive gain with +90 degrees opposes the velocity seen along the
/// actuator direction.
class Controller {
public:
    explicit Controller(const ControllerConfig& cfg);

    /// One sample of channel voltages in, per-axis modulation (N) out.
    Eigen::Vector3d step(const Eigen::Vector3d& volts);
    void reset();

    const ControllerConfig& config() const { return cfg_; }

private:
    ControllerConfig cfg_;
    std::array<double, 3> enabled_{};
    std::array<double, 3> sign_{};
    std::array<double, 3> bp_b0_{}, bp_b1_{}, bp_b2_{}, bp_a1_{}, bp_a2_{}, bp_s1_{}, bp_s2_{};
    std::array<double, 3> ap_b0_{}, ap_b1_{}, ap_b2_{}, ap_a1_{}, ap_a2_{}, ap_s1_{}, ap_s2_{};
    std::deque<Eigen::Vector3d> pipeline_;
};

struct ActuatorOutput {
    Eigen::Vector3d force = Eigen::Vector3d::Zero();
    bool clamped = false;
};

/// command = F0 + sum of modulations, clamped to [F_min, F_max], applied
/// along the actuator direction.
ActuatorOutput actuate(const Eigen::Vector3d& modulation, const ControllerConfig& cfg);

/// Raw detector channel record (t, v_x, v_y, v_z).
struct ChannelRecord {
    std::size_t decimation = 1;
    std::vector<double> t;
    std::array<std::vector<double>, 3> volts;
    std::size_t saturated_samples = 0;
    std::size_t clamped_samples = 0;
};

/// Detector, controller and actuator as a simulation hook.
class FeedbackLoop : public dynamics::ControllerHook {
public:
    FeedbackLoop(const DetectorConfig& det, const ControllerConfig& ctrl, std::uint64_t seed,
                 std::shared_ptr<ChannelRecord> record = nullptr);

    double sample_period() const override { return 1.0 / controller_.config().sample_rate_hz; }
    Eigen::Vector3d on_sample(double t, const Eigen::Vector3d& displacement) override;

private:
    Detector detector_;
    Controller controller_;
    std::shared_ptr<ChannelRecord> record_;
    std::size_t count_ = 0;
};

dynamics::HookFactory feedback_factory(const DetectorConfig& det, const ControllerConfig& ctrl);

/// Discrete loop transfer from displacement to the per-axis filtered signal
/// (before gain), including phase-shifter sign, latency and zero-order hold.
std::complex<double> loop_response(const ControllerConfig& cfg, int axis, double f_hz);

struct LoopEffect {
    double damping_rate = 0.0;   ///< g_eff, rad/s
    double frequency_hz = 0.0;   ///< resonance including the feedback spring
};

/// Linearized action of the loop on one axis: F = -G H x with
/// G = gain * cal * direction cosine, giving g_eff = G Im H / (m w) and
/// w'^2 = w0^2 + G Re H / m (evaluated self-consistently at w').
LoopEffect loop_effect(const ControllerConfig& cfg, const DetectorConfig& det, int axis, double mass_kg,
                       double natural_hz);

/// Gain (N/V) that makes Gamma + g_eff = 2 pi target_linewidth_hz.
double gain_for_linewidth(const ControllerConfig& cfg, const DetectorConfig& det, int axis, double mass_kg,
                          double natural_hz, double natural_damping_rate, double target_linewidth_hz);

}  // namespace mgtrap::control
