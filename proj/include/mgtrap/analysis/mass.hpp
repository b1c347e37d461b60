#pragma once

#include <span>
#include <string>
#include <vector>

namespace mgtrap::analysis {

struct AxisMass {
    double mass = 0.0;
    double sigma = 0.0;
    double variance = 0.0;  ///< m^2
    std::size_t samples = 0;
};

struct MassEstimate {
    double mass = 0.0;   ///< average of the y and z estimates, kg
    double sigma = 0.0;
    AxisMass y, z;
    bool consistent = true;  ///< false when the axes disagree by more than 3 sigma
    std::string method;
};

/// Maximum-likelihood position variance per axis, m_i = kB T / (w_i^2 <x_i^2>).
/// Uncertainty from the scatter of `blocks` contiguous batch variances.
MassEstimate extract_mass(std::span<const double> y, std::span<const double> z, double fy_hz, double fz_hz,
                          double temperature_K, std::size_t blocks = 20);

/// Cross-check mirroring the squared-displacement histograms: the density of
/// u = x^2 is proportional to u^(-1/2) exp(-u / (2 sigma^2)); a weighted line fit of
/// ln(count / (width sqrt(u))) against u gives sigma^2.
AxisMass mass_from_square_histogram(std::span<const double> x, double f_hz, double temperature_K,
                                    std::size_t bins = 40);

MassEstimate extract_mass_histogram(std::span<const double> y, std::span<const double> z, double fy_hz,
                                    double fz_hz, double temperature_K, std::size_t bins = 40);

}  // namespace mgtrap::analysis
