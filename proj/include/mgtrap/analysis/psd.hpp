#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mgtrap::analysis {

struct PsdEstimate {
    std::vector<double> f;    ///< Hz
    std::vector<double> psd;  ///< one-sided density, units^2 / Hz
    double sample_rate_hz = 0.0;
    double resolution_hz = 0.0;
    std::size_t segment_length = 0;
    std::size_t segments = 0;
    double overlap = 0.5;
    std::string window = "hann";

    /// Sum of psd * resolution over all bins.
    double integral() const;
    /// Same, restricted to f in [lo, hi].
    double integral(double lo_hz, double hi_hz) const;
};

/// Welch average of periodic-Hann-windowed, mean-removed segments with 50%
/// overlap, scaled so that the integral equals the signal variance. Throws
/// DomainError when fewer than two segments fit in the record.
PsdEstimate welch_psd(std::span<const double> samples, double sample_rate_hz, std::size_t segment_length);

/// Power-of-two segment length giving at least ten bins across `linewidth_hz`,
/// capped so that the record still holds `min_segments` segments.
std::size_t segment_length_for(double sample_rate_hz, double linewidth_hz, std::size_t record_length,
                               std::size_t min_segments = 8);

}  // namespace mgtrap::analysis
