#pragma once

#include <Eigen/Core>

#include "mgtrap/field/field_model.hpp"

namespace mgtrap::dynamics {

enum class Accommodation {
    diffuse,   ///< c_E = 8/pi (1 + pi/8)
    specular,  ///< c_E = 8/pi
};

struct Environment {
    double temperature_K = 295.0;
    double pressure_Pa = 0.0;
    double gas_molecular_mass_kg = 4.6518e-26;  ///< N2
    double gas_molecule_diameter_m = 3.7e-10;   ///< kinetic diameter of N2
    Accommodation accommodation = Accommodation::diffuse;
    double min_knudsen = 10.0;  ///< below this the free-molecular formula is refused
};

double epstein_coefficient(Accommodation a);

/// Mean molecular speed sqrt(8 kB T / (pi m_gas)).
double mean_molecular_speed(const Environment& env);

/// Gas mean free path over particle radius.
double knudsen_number(const Environment& env, const field::Particle& p);

/// Epstein free-molecular velocity damping rate Gamma = c_E P / (rho r c_bar)
/// in rad/s. Throws RegimeError when the Knudsen number is below
/// `env.min_knudsen`; the caller should then supply Gamma directly.
double damping_from_pressure(const Environment& env, const field::Particle& p);

/// Sinusoidal electric drive. The field amplitude is a voltage across an
/// effective gap; the gap is a model parameter.
struct DriveConfig {
    double field_amplitude_V_per_m = 0.0;
    double frequency_hz = 1.0;
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();

    static DriveConfig from_voltage(double voltage_V, double effective_gap_m, double frequency_hz,
                                    const Eigen::Vector3d& axis);
    void validate() const;
};

/// F = q E0 sin(2 pi f t) axis.
Eigen::Vector3d electric_drive_force(double charge_C, const DriveConfig& drive, double t);

}  // namespace mgtrap::dynamics
