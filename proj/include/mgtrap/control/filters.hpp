#pragma once

#include <complex>
#include <vector>

namespace mgtrap::control {

/// Normalized second-order section, a0 = 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    /// H(e^{i w}) at w = 2 pi f / fs.
    std::complex<double> response(double f_hz, double sample_rate_hz) const;
    bool stable() const;
};

/// Band-pass with unit gain and zero phase at the centre, from the bilinear
/// transform of s (w0/Q) / (s^2 + s w0/Q + w0^2) pre-warped at the centre.
/// Q = center / bandwidth. Throws ModelError for unusable parameters.
Biquad design_bandpass(double center_hz, double bandwidth_hz, double sample_rate_hz);

/// Phase shifter with unit magnitude at all frequencies and phase exactly
/// `phase_deg` at `center_hz` (positive = lead). Realized as a first-order
/// all-pass (a + z^-1) / (1 + a z^-1), preceded by a sign inversion when a
/// lead is requested, since the all-pass alone can only lag.
struct PhaseShifter {
    Biquad section;       ///< b0 = a, b1 = 1, a1 = a; identity when bypassed
    double sign = 1.0;

    std::complex<double> response(double f_hz, double sample_rate_hz) const;
};

PhaseShifter design_phase_shifter(double phase_deg, double center_hz, double sample_rate_hz);

/// Butterworth band-pass of order 2n (n second-order sections) via the
/// bilinear transform; used for zero-phase filtering in analysis.
std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                                                double sample_rate_hz);

}  // namespace mgtrap::control
