#include "mgtrap/dynamics/environment.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mgtrap/errors.hpp"

namespace mgtrap::dynamics {

double epstein_coefficient(Accommodation a) {
    const double base = 8.0 / std::numbers::pi;
    return a == Accommodation::diffuse ? base * (1.0 + std::numbers::pi / 8.0) : base;
}

double mean_molecular_speed(const Environment& env) {
    return std::sqrt(8.0 * constants::boltzmann * env.temperature_K /
                     (std::numbers::pi * env.gas_molecular_mass_kg));
}

double knudsen_number(const Environment& env, const field::Particle& p) {
    if (env.pressure_Pa <= 0.0) return std::numeric_limits<double>::infinity();
    const double d = env.gas_molecule_diameter_m;
    const double mean_free_path =
        constants::boltzmann * env.temperature_K / (std::sqrt(2.0) * std::numbers::pi * d * d * env.pressure_Pa);
    return mean_free_path / p.radius();
}

double damping_from_pressure(const Environment& env, const field::Particle& p) {
    if (!(env.temperature_K > 0.0)) throw ModelError("environment temperature must be positive");
    if (env.pressure_Pa < 0.0) throw ModelError("pressure must be non-negative");
    if (env.pressure_Pa == 0.0) return 0.0;
    const double kn = knudsen_number(env, p);
    if (kn < env.min_knudsen) {
        std::ostringstream os;
        os << "pressure " << env.pressure_Pa << " Pa is outside the free-molecular regime (Knudsen number "
           << kn << " < " << env.min_knudsen << "); supply the damping rate directly";
        throw RegimeError(os.str());
    }
    return epstein_coefficient(env.accommodation) * env.pressure_Pa /
           (p.density() * p.radius() * mean_molecular_speed(env));
}

DriveConfig DriveConfig::from_voltage(double voltage_V, double effective_gap_m, double frequency_hz,
                                      const Eigen::Vector3d& axis) {
    if (!(effective_gap_m > 0.0)) throw ModelError("effective electrode gap must be positive");
    DriveConfig d;
    d.field_amplitude_V_per_m = std::abs(voltage_V) / effective_gap_m;
    d.frequency_hz = frequency_hz;
    d.axis = axis;
    d.validate();
    return d;
}

void DriveConfig::validate() const {
    if (!(field_amplitude_V_per_m >= 0.0)) throw ModelError("drive amplitude must be non-negative");
    if (!(frequency_hz >= 0.0)) throw ModelError("drive frequency must be non-negative");
    if (std::abs(axis.norm() - 1.0) > 1e-9) throw ModelError("drive axis must be a unit vector");
}

Eigen::Vector3d electric_drive_force(double charge_C, const DriveConfig& drive, double t) {
    return charge_C * drive.field_amplitude_V_per_m * std::sin(constants::two_pi * drive.frequency_hz * t) *
           drive.axis;
}

}  // namespace mgtrap::dynamics
