#pragma once

namespace mgtrap::analysis {

/// T' = m w^2 <x^2> / kB
double effective_temperature(double mass_kg, double omega, double mean_square_m2);

/// n = kB T' / (hbar w)
double phonon_occupation(double temperature_K, double omega);

/// Upper bound on the natural damping, Gamma <= Gamma' T' / T (rad/s in, rad/s out).
double damping_bound(double effective_temperature_K, double bath_temperature_K, double cooled_damping_rate);

}  // namespace mgtrap::analysis
