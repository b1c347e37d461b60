#include "mgtrap/analysis/band.hpp"

#include <algorithm>
#include <cmath>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::analysis {

namespace {

void run_cascade(const std::vector<control::Biquad>& sections, std::vector<double>& v) {
    for (const auto& q : sections) {
        // Start from the steady state for a constant input equal to v[0].
        const double dc = (q.b0 + q.b1 + q.b2) / (1.0 + q.a1 + q.a2);
        const double y0 = dc * v.front();
        double s2 = q.b2 * v.front() - q.a2 * y0;
        double s1 = q.b1 * v.front() - q.a1 * y0 + s2;
        for (double& e : v) {
            const double x = e;
            const double y = q.b0 * x + s1;
            s1 = (q.b1 * x - q.a1 * y) + s2;
            s2 = q.b2 * x - q.a2 * y;
            e = y;
        }
    }
}

}  // namespace

std::vector<double> filtfilt(const std::vector<control::Biquad>& sections, std::span<const double> x,
                             std::size_t padding) {
    if (x.empty()) return {};
    const std::size_t pad = std::min(padding, x.size() - 1);
    std::vector<double> v;
    v.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i > 0; --i) v.push_back(2.0 * x.front() - x[i]);
    v.insert(v.end(), x.begin(), x.end());
    for (std::size_t i = 1; i <= pad; ++i) v.push_back(2.0 * x.back() - x[x.size() - 1 - i]);
    run_cascade(sections, v);
    std::reverse(v.begin(), v.end());
    run_cascade(sections, v);
    std::reverse(v.begin(), v.end());
    return {v.begin() + static_cast<std::ptrdiff_t>(pad), v.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

double mean_square_from_band(std::span<const double> samples, double fs, double low_hz, double high_hz) {
    if (!(high_hz > low_hz) || !(low_hz > 0.0)) throw DomainError("band is empty");
    if (!(high_hz < 0.5 * fs)) throw DomainError("band extends beyond the Nyquist frequency");
    if (samples.size() < 16) throw DomainError("record too short for band filtering");
    const auto sections = control::design_butterworth_bandpass(2, low_hz, high_hz, fs);
    const auto pad = static_cast<std::size_t>(std::ceil(3.0 * fs / (high_hz - low_hz)));
    const auto y = filtfilt(sections, samples, std::max<std::size_t>(pad, 15));
    const auto& k = simd::kernels();
    const double mean = k.sum(y) / static_cast<double>(y.size());
    return k.sum_sq_dev(y, mean) / static_cast<double>(y.size());
}

}  // namespace mgtrap::analysis
