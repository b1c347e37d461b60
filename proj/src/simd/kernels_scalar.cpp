#include "mgtrap/simd/kernels.hpp"

#include <cassert>

namespace mgtrap::simd {
namespace {

void harmonic_baoab(const HarmonicLanes& l, std::span<const double> ext_next,
                    std::span<const double> noise, double half_dt) {
    const std::size_t n = l.x.size();
    for (std::size_t i = 0; i < n; ++i) {
        double x = l.x[i];
        double v = l.v[i];
        v = v + half_dt * l.acc[i];
        x = x + half_dt * v;
        v = l.c1[i] * v + l.c2[i] * noise[i];
        x = x + half_dt * v;
        const double a = ext_next[i] - l.omega_sq[i] * x;
        v = v + half_dt * a;
        l.x[i] = x;
        l.v[i] = v;
        l.acc[i] = a;
    }
}

void kick(std::span<double> v, std::span<const double> a, double h) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] + h * a[i];
}

void drift(std::span<double> x, std::span<const double> v, double h) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = x[i] + h * v[i];
}

void ou(std::span<double> v, std::span<const double> c1, std::span<const double> c2,
        std::span<const double> noise) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = c1[i] * v[i] + c2[i] * noise[i];
}

void biquad(const BiquadLanes& q, std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) {
        const double x = in[i];
        const double y = q.b0[i] * x + q.s1[i];
        q.s1[i] = (q.b1[i] * x - q.a1[i] * y) + q.s2[i];
        q.s2[i] = q.b2[i] * x - q.a2[i] * y;
        out[i] = y;
    }
}

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
}

void power_accumulate(std::span<const std::complex<double>> spec, std::span<double> acc) {
    for (std::size_t i = 0; i < acc.size(); ++i) {
        const double re = spec[i].real();
        const double im = spec[i].imag();
        acc[i] = acc[i] + (re * re + im * im);
    }
}

void dho_model(std::span<const double> f, double amplitude, double f0, double gamma,
               std::span<double> model, std::span<double> d_ln_a, std::span<double> d_f0,
               std::span<double> d_gamma) {
    const double f0_sq = f0 * f0;
    const double g_sq = gamma * gamma;
    const double m4f0 = -4.0 * f0;
    const double m2g = -2.0 * gamma;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const double f_sq = f[i] * f[i];
        const double d = f0_sq - f_sq;
        const double den = d * d + g_sq * f_sq;
        const double m = amplitude / den;
        const double m_over_den = m / den;
        model[i] = m;
        d_ln_a[i] = m;
        d_f0[i] = (m4f0 * d) * m_over_den;
        d_gamma[i] = (m2g * f_sq) * m_over_den;
    }
}

double sum(std::span<const double> x) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t blocks = x.size() / 4 * 4;
    for (std::size_t i = 0; i < blocks; i += 4) {
        acc[0] += x[i];
        acc[1] += x[i + 1];
        acc[2] += x[i + 2];
        acc[3] += x[i + 3];
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (std::size_t i = blocks; i < x.size(); ++i) total += x[i];
    return total;
}

double sum_sq_dev(std::span<const double> x, double mean) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t blocks = x.size() / 4 * 4;
    for (std::size_t i = 0; i < blocks; i += 4) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double d = x[i + j] - mean;
            acc[j] += d * d;
        }
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (std::size_t i = blocks; i < x.size(); ++i) {
        const double d = x[i] - mean;
        total += d * d;
    }
    return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t blocks = a.size() / 4 * 4;
    for (std::size_t i = 0; i < blocks; i += 4) {
        for (std::size_t j = 0; j < 4; ++j) acc[j] += a[i + j] * b[i + j];
    }
    double total = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (std::size_t i = blocks; i < a.size(); ++i) total += a[i] * b[i];
    return total;
}

}  // namespace

namespace detail {

const KernelTable& scalar_table() {
    static const KernelTable table{
        Isa::scalar, harmonic_baoab, kick, drift, ou, biquad, multiply,
        power_accumulate, dho_model, sum, sum_sq_dev, dot,
    };
    return table;
}

}  // namespace detail
}  // namespace mgtrap::simd
