#pragma once

#include <span>
#include <vector>

#include "mgtrap/control/filters.hpp"

namespace mgtrap::analysis {

/// Forward-backward filtering through a cascade of sections with odd
/// reflection padding at both ends; the result has zero phase.
std::vector<double> filtfilt(const std::vector<control::Biquad>& sections, std::span<const double> x,
                             std::size_t padding);

/// Variance of the record after zero-phase fourth-order Butterworth
/// band-pass filtering to [low, high].
double mean_square_from_band(std::span<const double> samples, double sample_rate_hz, double low_hz, double high_hz);

}  // namespace mgtrap::analysis
