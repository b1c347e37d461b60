#include "mgtrap/control/lockin.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::control {

void LockInConfig::validate() const {
    if (!(reference_hz > 0.0)) throw ModelError("lock-in reference frequency must be positive");
    if (!(time_constant_s > 0.0)) throw ModelError("lock-in time constant must be positive");
    if (time_constant_s * reference_hz < 1.0)
        throw ModelError("lock-in time constant must be long compared with the reference period");
}

namespace {

std::size_t period_samples(double sample_rate_hz, double reference_hz) {
    const auto n = static_cast<std::size_t>(std::llround(sample_rate_hz / reference_hz));
    return n == 0 ? 1 : n;
}

std::vector<double> moving_average(const std::vector<double>& in, std::size_t n) {
    std::vector<double> out(in.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) {
        acc += in[i];
        if (i >= n) acc -= in[i - n];
        out[i] = acc / static_cast<double>(std::min(i + 1, n));
    }
    return out;
}

void low_pass(std::vector<double>& v, double alpha) {
    double s = 0.0;
    for (double& e : v) {
        s += alpha * (e - s);
        e = s;
    }
}

}  // namespace

LockInOutput lock_in(std::span<const double> signal, double sample_rate_hz, const LockInConfig& cfg, double t0) {
    cfg.validate();
    if (!(sample_rate_hz > 2.0 * cfg.reference_hz)) throw ModelError("lock-in needs fs above twice the reference");
    const double length = static_cast<double>(signal.size()) / sample_rate_hz;
    if (length < 5.0 * cfg.time_constant_s) {
        std::ostringstream os;
        os << "lock-in record of " << length << " s is shorter than five time constants ("
           << 5.0 * cfg.time_constant_s << " s)";
        throw DomainError(os.str());
    }

    const std::size_t n = signal.size();
    std::vector<double> ref_s(n), ref_c(n), mx(n), my(n);
    const double w = 2.0 * std::numbers::pi * cfg.reference_hz;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = t0 + static_cast<double>(i) / sample_rate_hz;
        ref_s[i] = 2.0 * std::sin(w * t);
        ref_c[i] = 2.0 * std::cos(w * t);
    }
    const auto& k = simd::kernels();
    k.multiply(signal, ref_s, mx);
    k.multiply(signal, ref_c, my);

    const std::size_t period = period_samples(sample_rate_hz, cfg.reference_hz);
    LockInOutput out;
    out.sample_rate_hz = sample_rate_hz;
    out.x = moving_average(mx, period);
    out.y = moving_average(my, period);
    const double alpha = -std::expm1(-1.0 / (sample_rate_hz * cfg.time_constant_s));
    low_pass(out.x, alpha);
    low_pass(out.y, alpha);

    out.t.resize(n);
    out.r.resize(n);
    out.phase_rad.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.t[i] = t0 + static_cast<double>(i) / sample_rate_hz;
        out.r[i] = std::hypot(out.x[i], out.y[i]);
        out.phase_rad[i] = std::atan2(out.y[i], out.x[i]);
    }
    return out;
}

double lock_in_offset_response(double offset_hz, double sample_rate_hz, const LockInConfig& cfg) {
    const double wt = 2.0 * std::numbers::pi * offset_hz / sample_rate_hz;
    const auto n = static_cast<double>(period_samples(sample_rate_hz, cfg.reference_hz));
    const double boxcar = offset_hz == 0.0 ? 1.0 : std::abs(std::sin(0.5 * wt * n) / (n * std::sin(0.5 * wt)));
    const double alpha = -std::expm1(-1.0 / (sample_rate_hz * cfg.time_constant_s));
    const std::complex<double> z1 = std::polar(1.0, -wt);
    const double rc = std::abs(alpha / (1.0 - (1.0 - alpha) * z1));
    return boxcar * rc;
}

}  // namespace mgtrap::control
