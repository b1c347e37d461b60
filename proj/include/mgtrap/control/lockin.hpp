#pragma once

#include <span>
#include <vector>

namespace mgtrap::control {

struct LockInConfig {
    double reference_hz = 1.0;
    double time_constant_s = 1.0;

    void validate() const;
};

/// X and Y quadratures of A sin(2 pi f t + phi) converge to A cos(phi) and
/// A sin(phi); R = A.
struct LockInOutput {
    double sample_rate_hz = 0.0;
    std::vector<double> t;
    std::vector<double> x, y;
    std::vector<double> r;
    std::vector<double> phase_rad;
};

/// Mixes with 2 sin and 2 cos of the reference, removes the 2f product with a
/// one-period moving average and then applies a single-pole low-pass of the
/// configured time constant. Throws DomainError when the record is shorter
/// than five time constants.
LockInOutput lock_in(std::span<const double> signal, double sample_rate_hz, const LockInConfig& cfg,
                     double t0 = 0.0);

/// Steady-state amplitude response to a tone offset by `offset_hz` from the
/// reference (moving average times low-pass magnitude).
double lock_in_offset_response(double offset_hz, double sample_rate_hz, const LockInConfig& cfg);

}  // namespace mgtrap::control
