#include "mgtrap/analysis/psd.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::analysis {

double PsdEstimate::integral() const {
    double s = 0.0;
    for (double p : psd) s += p;
    return s * resolution_hz;
}

double PsdEstimate::integral(double lo_hz, double hi_hz) const {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] >= lo_hz && f[i] <= hi_hz) s += psd[i];
    return s * resolution_hz;
}

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
        out_.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1))));
        if (!in_ || !out_) throw std::bad_alloc();
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_.get(), out_.get(), FFTW_ESTIMATE);
        if (!plan_) throw Error("FFT planning failed");
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::span<double> input() { return {in_.get(), n_}; }
    std::span<const std::complex<double>> execute() {
        fftw_execute(plan_);
        return {reinterpret_cast<const std::complex<double>*>(out_.get()), n_ / 2 + 1};
    }

private:
    std::size_t n_;
    std::unique_ptr<double, FftwDeleter> in_;
    std::unique_ptr<fftw_complex, FftwDeleter> out_;
    fftw_plan plan_ = nullptr;
};

}  // namespace

PsdEstimate welch_psd(std::span<const double> x, double fs, std::size_t n) {
    if (!(fs > 0.0)) throw DomainError("sample rate must be positive");
    if (n < 4) throw DomainError("segment length must be at least 4");
    if (x.size() < n) {
        std::ostringstream os;
        os << "record of " << x.size() << " samples is shorter than one segment (" << n << ")";
        throw DomainError(os.str());
    }
    const std::size_t hop = n / 2;
    const std::size_t segments = (x.size() - n) / hop + 1;
    if (segments < 2) throw DomainError("record holds fewer than two Welch segments");

    std::vector<double> window(n);
    for (std::size_t i = 0; i < n; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    const auto& k = simd::kernels();
    const double window_power = k.dot(window, window);

    RealFft fft(n);
    const std::size_t bins = n / 2 + 1;
    std::vector<double> acc(bins, 0.0);
    for (std::size_t s = 0; s < segments; ++s) {
        const auto seg = x.subspan(s * hop, n);
        const double mean = k.sum(seg) / static_cast<double>(n);
        auto in = fft.input();
        for (std::size_t i = 0; i < n; ++i) in[i] = seg[i] - mean;
        k.multiply(in, window, in);
        k.power_accumulate(fft.execute(), acc);
    }

    PsdEstimate e;
    e.sample_rate_hz = fs;
    e.resolution_hz = fs / static_cast<double>(n);
    e.segment_length = n;
    e.segments = segments;
    e.f.resize(bins);
    e.psd.resize(bins);
    const double scale = 1.0 / (fs * window_power * static_cast<double>(segments));
    for (std::size_t i = 0; i < bins; ++i) {
        e.f[i] = static_cast<double>(i) * e.resolution_hz;
        const bool edge = i == 0 || (n % 2 == 0 && i == bins - 1);
        e.psd[i] = acc[i] * scale * (edge ? 1.0 : 2.0);
    }
    return e;
}

std::size_t segment_length_for(double fs, double linewidth_hz, std::size_t record_length, std::size_t min_segments) {
    if (!(fs > 0.0) || !(linewidth_hz > 0.0)) throw DomainError("sample rate and linewidth must be positive");
    std::size_t n = 16;
    while (fs / static_cast<double>(n) > linewidth_hz / 10.0) n *= 2;
    const std::size_t cap_segments = std::max<std::size_t>(min_segments, 2);
    while (n > 16 && (record_length < n || (record_length - n) / (n / 2) + 1 < cap_segments)) n /= 2;
    return n;
}

}  // namespace mgtrap::analysis
