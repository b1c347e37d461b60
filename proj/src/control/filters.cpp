#include "mgtrap/control/filters.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mgtrap/errors.hpp"

namespace mgtrap::control {

namespace {

constexpr double pi = std::numbers::pi;

void check_frequency(double f_hz, double sample_rate_hz, const char* what) {
    if (!(sample_rate_hz > 0.0)) throw ModelError("sample rate must be positive");
    if (!(f_hz > 0.0) || !(f_hz < 0.5 * sample_rate_hz)) {
        std::ostringstream os;
        os << what << " " << f_hz << " Hz must lie strictly between 0 and the Nyquist frequency "
           << 0.5 * sample_rate_hz << " Hz";
        throw ModelError(os.str());
    }
}

}  // namespace

std::complex<double> Biquad::response(double f_hz, double sample_rate_hz) const {
    const std::complex<double> z1 = std::polar(1.0, -2.0 * pi * f_hz / sample_rate_hz);
    const std::complex<double> z2 = z1 * z1;
    return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

bool Biquad::stable() const {
    // Jury conditions for z^2 + a1 z + a2.
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

Biquad design_bandpass(double center_hz, double bandwidth_hz, double sample_rate_hz) {
    check_frequency(center_hz, sample_rate_hz, "band-pass centre");
    if (!(bandwidth_hz > 0.0)) throw ModelError("band-pass bandwidth must be positive");
    const double w0 = 2.0 * pi * center_hz / sample_rate_hz;
    const double q = center_hz / bandwidth_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    Biquad b;
    b.b0 = alpha / a0;
    b.b1 = 0.0;
    b.b2 = -alpha / a0;
    b.a1 = -2.0 * std::cos(w0) / a0;
    b.a2 = (1.0 - alpha) / a0;
    if (!b.stable()) throw ModelError("band-pass design has poles on or outside the unit circle");
    return b;
}

std::complex<double> PhaseShifter::response(double f_hz, double sample_rate_hz) const {
    return sign * section.response(f_hz, sample_rate_hz);
}

PhaseShifter design_phase_shifter(double phase_deg, double center_hz, double sample_rate_hz) {
    check_frequency(center_hz, sample_rate_hz, "phase shifter centre");
    if (!std::isfinite(phase_deg)) throw ModelError("phase shift must be finite");
    double lead = std::remainder(phase_deg, 360.0);
    if (lead <= -180.0) lead += 360.0;

    PhaseShifter p;
    double lag_deg = 0.0;
    if (lead > 0.0) {
        p.sign = -1.0;
        lag_deg = 180.0 - lead;
    } else {
        lag_deg = -lead;
    }
    if (lag_deg >= 180.0) {
        p.sign = -p.sign;
        lag_deg -= 180.0;
    }
    if (lag_deg == 0.0) return p;

    const double w = 2.0 * pi * center_hz / sample_rate_hz;
    const double theta = lag_deg * pi / 180.0;
    const double a = std::sin(0.5 * (w - theta)) / std::sin(0.5 * (w + theta));
    p.section.b0 = a;
    p.section.b1 = 1.0;
    p.section.a1 = a;
    if (!p.section.stable()) throw ModelError("phase shifter design has a pole on or outside the unit circle");
    return p;
}

std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                                                double sample_rate_hz) {
    if (prototype_order < 1) throw ModelError("filter order must be at least 1");
    check_frequency(low_hz, sample_rate_hz, "band edge");
    check_frequency(high_hz, sample_rate_hz, "band edge");
    if (!(high_hz > low_hz)) throw ModelError("band upper edge must exceed the lower edge");

    const double k = 2.0 * sample_rate_hz;
    const double w1 = k * std::tan(pi * low_hz / sample_rate_hz);
    const double w2 = k * std::tan(pi * high_hz / sample_rate_hz);
    const double w0_sq = w1 * w2;
    const double bw = w2 - w1;

    std::vector<std::complex<double>> zpoles;
    for (int i = 0; i < prototype_order; ++i) {
        const double ang = pi / 2.0 + pi * (2.0 * i + 1.0) / (2.0 * prototype_order);
        const std::complex<double> p = std::polar(1.0, ang);
        // s^2 - p bw s + w0^2 = 0
        const std::complex<double> half = 0.5 * p * bw;
        const std::complex<double> root = std::sqrt(half * half - w0_sq);
        for (const auto s : {half + root, half - root}) zpoles.push_back((k + s) / (k - s));
    }

    const double fc = std::sqrt(w0_sq) / k;  // tan of the digital centre half-angle
    const double center_hz = sample_rate_hz / pi * std::atan(fc);

    std::vector<Biquad> sections;
    for (const auto& z : zpoles) {
        if (z.imag() <= 0.0) continue;
        Biquad b;
        b.b0 = 1.0;
        b.b1 = 0.0;
        b.b2 = -1.0;
        b.a1 = -2.0 * z.real();
        b.a2 = std::norm(z);
        const double g = 1.0 / std::abs(b.response(center_hz, sample_rate_hz));
        b.b0 = g;
        b.b2 = -g;
        sections.push_back(b);
    }
    if (static_cast<int>(sections.size()) != prototype_order)
        throw ModelError("band-pass too wide for a complex-pole Butterworth design");
    return sections;
}

}  // namespace mgtrap::control
