#include "mgtrap/analysis/thermo.hpp"

#include "mgtrap/constants.hpp"
#include "mgtrap/errors.hpp"

namespace mgtrap::analysis {

double effective_temperature(double mass_kg, double omega, double mean_square_m2) {
    if (!(mass_kg > 0.0) || !(omega > 0.0)) throw ModelError("mass and frequency must be positive");
    if (!(mean_square_m2 >= 0.0)) throw ModelError("mean square displacement must be non-negative");
    return mass_kg * omega * omega * mean_square_m2 / constants::boltzmann;
}

double phonon_occupation(double temperature_K, double omega) {
    if (!(temperature_K > 0.0) || !(omega > 0.0)) throw ModelError("temperature and frequency must be positive");
    return constants::boltzmann * temperature_K / (constants::hbar * omega);
}

double damping_bound(double t_eff, double t_bath, double cooled_rate) {
    if (!(t_eff > 0.0) || !(t_bath >= t_eff)) throw ModelError("damping bound needs T >= T' > 0");
    if (!(cooled_rate >= 0.0)) throw ModelError("cooled damping rate must be non-negative");
    return cooled_rate * t_eff / t_bath;
}

}  // namespace mgtrap::analysis
