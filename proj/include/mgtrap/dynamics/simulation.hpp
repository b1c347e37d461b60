#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mgtrap/dynamics/environment.hpp"
#include "mgtrap/dynamics/rng.hpp"
#include "mgtrap/field/field_model.hpp"

namespace mgtrap::dynamics {

struct SimState {
    double t = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();  ///< displacement from equilibrium, m
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
};

/// Per-axis thermal noise streams for one particle.
class AxisNoise {
public:
    explicit AxisNoise(std::uint64_t seed);
    Eigen::Vector3d draw();

private:
    NormalStream x_, y_, z_;
};

using ForceFn = std::function<Eigen::Vector3d(const Eigen::Vector3d& position, double t)>;

struct StepParams {
    double mass_kg = 0.0;
    double damping_rate = 0.0;  ///< Gamma, rad/s (velocity damping)
    double temperature_K = 0.0;
    double dt_s = 0.0;
    double excess_force_psd = 0.0;  ///< one-sided white force noise, N^2/Hz
};

/// One BAOAB step: half kick, half drift, exact Ornstein-Uhlenbeck velocity
/// update with factor exp(-Gamma dt) and variance (kB T / m)(1 - exp(-2 Gamma dt)),
/// half drift, half kick. Throws IntegrationError on non-finite state or force.
void step(SimState& state, const ForceFn& force, const StepParams& params, AxisNoise& noise);

/// Position ~ N(0, kB T / (m w_i^2)), velocity ~ N(0, kB T / m) per axis.
SimState sample_boltzmann_init(const field::Particle& p, const field::TrapFrequencies& f, const Environment& env,
                               std::uint64_t seed);

/// Closed-loop hook called at its own sample rate. The returned force is held
/// until the next call.
class ControllerHook {
public:
    virtual ~ControllerHook() = default;
    virtual double sample_period() const = 0;
    virtual Eigen::Vector3d on_sample(double t, const Eigen::Vector3d& displacement) = 0;
};

using HookFactory = std::function<std::unique_ptr<ControllerHook>(std::uint64_t seed)>;

enum class TrapMode { harmonic, field };

/// A charge change at a given time (single-electron arrivals).
struct ChargeEvent {
    double t = 0.0;
    int charge_e = 0;
};

enum class InitialCondition { boltzmann, explicit_state };

struct SimulationConfig {
    TrapMode mode = TrapMode::harmonic;
    field::TrapFrequencies frequencies{59.6, 96.9, 7.01};  ///< harmonic mode springs
    std::shared_ptr<const field::FieldModel> field;         ///< field mode
    field::Particle particle = field::Particle::default_silica();
    Environment environment{};
    std::optional<double> damping_rate;  ///< rad/s; computed from pressure when empty
    double excess_force_psd = 0.0;       ///< N^2/Hz, one-sided
    double gravity = constants::gravity;

    std::optional<DriveConfig> drive;
    std::vector<ChargeEvent> charge_events;

    double duration_s = 1.0;
    double dt_s = 2e-5;
    double sample_period_s = 1e-3;

    InitialCondition initial = InitialCondition::boltzmann;
    SimState initial_state{};

    /// Abort (without error) when any displacement exceeds this, m.
    std::optional<double> amplitude_guard_m;

    std::string config_hash;
};

struct TrajectoryMetadata {
    std::uint64_t seed = 0;
    std::string config_hash;
    double dt_s = 0.0;
    double duration_s = 0.0;
    double damping_rate = 0.0;
    Eigen::Vector3d equilibrium = Eigen::Vector3d::Zero();
    bool guard_tripped = false;
    double stop_time_s = 0.0;
    std::vector<ChargeEvent> charge_events;
};

/// Uniformly sampled record. Positions are displacements from the unforced
/// equilibrium.
struct Trajectory {
    double sample_period = 0.0;
    std::vector<double> t;
    std::array<std::vector<double>, 3> position;
    std::array<std::vector<double>, 3> velocity;
    TrajectoryMetadata meta;

    std::size_t size() const { return t.size(); }
};

/// Resolved damping rate for a configuration.
double resolve_damping(const SimulationConfig& cfg);

/// Trap frequencies the configuration implies (harmonic springs or the
/// Hessian of the field model).
field::TrapFrequencies resolve_frequencies(const SimulationConfig& cfg);

/// Runs one realisation. Bit-identical for identical (config, seed).
Trajectory simulate(const SimulationConfig& cfg, std::uint64_t seed, const HookFactory& hook = {});

/// Runs independent realisations side by side in SIMD lanes. Member k is
/// bit-identical to simulate(cfg, seeds[k], hook).
std::vector<Trajectory> simulate_ensemble(const SimulationConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                          const HookFactory& hook = {});

}  // namespace mgtrap::dynamics
