// Compiled with -mavx2 only. Expression order mirrors kernels_scalar.cpp
// exactly so that results are bit-identical.

#include "mgtrap/simd/kernels.hpp"

#include <immintrin.h>

namespace mgtrap::simd {
namespace {

constexpr std::size_t W = 4;

inline __m256d load(const double* p) { return _mm256_loadu_pd(p); }
inline void store(double* p, __m256d v) { _mm256_storeu_pd(p, v); }

void harmonic_baoab(const HarmonicLanes& l, std::span<const double> ext_next,
                    std::span<const double> noise, double half_dt) {
    const std::size_t n = l.x.size();
    const std::size_t blocks = n / W * W;
    const __m256d h = _mm256_set1_pd(half_dt);
    for (std::size_t i = 0; i < blocks; i += W) {
        __m256d x = load(&l.x[i]);
        __m256d v = load(&l.v[i]);
        v = _mm256_add_pd(v, _mm256_mul_pd(h, load(&l.acc[i])));
        x = _mm256_add_pd(x, _mm256_mul_pd(h, v));
        v = _mm256_add_pd(_mm256_mul_pd(load(&l.c1[i]), v),
                          _mm256_mul_pd(load(&l.c2[i]), load(&noise[i])));
        x = _mm256_add_pd(x, _mm256_mul_pd(h, v));
        const __m256d a = _mm256_sub_pd(load(&ext_next[i]), _mm256_mul_pd(load(&l.omega_sq[i]), x));
        v = _mm256_add_pd(v, _mm256_mul_pd(h, a));
        store(&l.x[i], x);
        store(&l.v[i], v);
        store(&l.acc[i], a);
    }
    for (std::size_t i = blocks; i < n; ++i) {
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
    const std::size_t blocks = v.size() / W * W;
    const __m256d hv = _mm256_set1_pd(h);
    for (std::size_t i = 0; i < blocks; i += W)
        store(&v[i], _mm256_add_pd(load(&v[i]), _mm256_mul_pd(hv, load(&a[i]))));
    for (std::size_t i = blocks; i < v.size(); ++i) v[i] = v[i] + h * a[i];
}

void drift(std::span<double> x, std::span<const double> v, double h) {
    const std::size_t blocks = x.size() / W * W;
    const __m256d hv = _mm256_set1_pd(h);
    for (std::size_t i = 0; i < blocks; i += W)
        store(&x[i], _mm256_add_pd(load(&x[i]), _mm256_mul_pd(hv, load(&v[i]))));
    for (std::size_t i = blocks; i < x.size(); ++i) x[i] = x[i] + h * v[i];
}

void ou(std::span<double> v, std::span<const double> c1, std::span<const double> c2,
        std::span<const double> noise) {
    const std::size_t blocks = v.size() / W * W;
    for (std::size_t i = 0; i < blocks; i += W) {
        store(&v[i], _mm256_add_pd(_mm256_mul_pd(load(&c1[i]), load(&v[i])),
                                   _mm256_mul_pd(load(&c2[i]), load(&noise[i]))));
    }
    for (std::size_t i = blocks; i < v.size(); ++i) v[i] = c1[i] * v[i] + c2[i] * noise[i];
}

void biquad(const BiquadLanes& q, std::span<const double> in, std::span<double> out) {
    const std::size_t blocks = in.size() / W * W;
    for (std::size_t i = 0; i < blocks; i += W) {
        const __m256d x = load(&in[i]);
        const __m256d y = _mm256_add_pd(_mm256_mul_pd(load(&q.b0[i]), x), load(&q.s1[i]));
        const __m256d s1 = _mm256_add_pd(
            _mm256_sub_pd(_mm256_mul_pd(load(&q.b1[i]), x), _mm256_mul_pd(load(&q.a1[i]), y)),
            load(&q.s2[i]));
        const __m256d s2 =
            _mm256_sub_pd(_mm256_mul_pd(load(&q.b2[i]), x), _mm256_mul_pd(load(&q.a2[i]), y));
        store(&q.s1[i], s1);
        store(&q.s2[i], s2);
        store(&out[i], y);
    }
    for (std::size_t i = blocks; i < in.size(); ++i) {
        const double x = in[i];
        const double y = q.b0[i] * x + q.s1[i];
        q.s1[i] = (q.b1[i] * x - q.a1[i] * y) + q.s2[i];
        q.s2[i] = q.b2[i] * x - q.a2[i] * y;
        out[i] = y;
    }
}

void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out) {
    const std::size_t blocks = out.size() / W * W;
    for (std::size_t i = 0; i < blocks; i += W)
        store(&out[i], _mm256_mul_pd(load(&a[i]), load(&b[i])));
    for (std::size_t i = blocks; i < out.size(); ++i) out[i] = a[i] * b[i];
}

void power_accumulate(std::span<const std::complex<double>> spec, std::span<double> acc) {
    const std::size_t blocks = acc.size() / W * W;
    const double* raw = reinterpret_cast<const double*>(spec.data());
    for (std::size_t i = 0; i < blocks; i += W) {
        const __m256d c01 = load(raw + 2 * i);
        const __m256d c23 = load(raw + 2 * i + 4);
        const __m256d p = _mm256_hadd_pd(_mm256_mul_pd(c01, c01), _mm256_mul_pd(c23, c23));
        // (p0, p2, p1, p3) -> (p0, p1, p2, p3)
        const __m256d ordered = _mm256_permute4x64_pd(p, 0b11011000);
        store(&acc[i], _mm256_add_pd(load(&acc[i]), ordered));
    }
    for (std::size_t i = blocks; i < acc.size(); ++i) {
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
    const __m256d vf0_sq = _mm256_set1_pd(f0_sq);
    const __m256d vg_sq = _mm256_set1_pd(g_sq);
    const __m256d vm4f0 = _mm256_set1_pd(m4f0);
    const __m256d vm2g = _mm256_set1_pd(m2g);
    const __m256d va = _mm256_set1_pd(amplitude);
    const std::size_t blocks = f.size() / W * W;
    for (std::size_t i = 0; i < blocks; i += W) {
        const __m256d fv = load(&f[i]);
        const __m256d f_sq = _mm256_mul_pd(fv, fv);
        const __m256d d = _mm256_sub_pd(vf0_sq, f_sq);
        const __m256d den = _mm256_add_pd(_mm256_mul_pd(d, d), _mm256_mul_pd(vg_sq, f_sq));
        const __m256d m = _mm256_div_pd(va, den);
        const __m256d m_over_den = _mm256_div_pd(m, den);
        store(&model[i], m);
        store(&d_ln_a[i], m);
        store(&d_f0[i], _mm256_mul_pd(_mm256_mul_pd(vm4f0, d), m_over_den));
        store(&d_gamma[i], _mm256_mul_pd(_mm256_mul_pd(vm2g, f_sq), m_over_den));
    }
    for (std::size_t i = blocks; i < f.size(); ++i) {
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

inline double combine(__m256d acc) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

double sum(std::span<const double> x) {
    const std::size_t blocks = x.size() / W * W;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < blocks; i += W) acc = _mm256_add_pd(acc, load(&x[i]));
    double total = combine(acc);
    for (std::size_t i = blocks; i < x.size(); ++i) total += x[i];
    return total;
}

double sum_sq_dev(std::span<const double> x, double mean) {
    const std::size_t blocks = x.size() / W * W;
    const __m256d mv = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < blocks; i += W) {
        const __m256d d = _mm256_sub_pd(load(&x[i]), mv);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double total = combine(acc);
    for (std::size_t i = blocks; i < x.size(); ++i) {
        const double d = x[i] - mean;
        total += d * d;
    }
    return total;
}

double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t blocks = a.size() / W * W;
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t i = 0; i < blocks; i += W)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(load(&a[i]), load(&b[i])));
    double total = combine(acc);
    for (std::size_t i = blocks; i < a.size(); ++i) total += a[i] * b[i];
    return total;
}

}  // namespace

namespace detail {

const KernelTable& avx2_table() {
    static const KernelTable table{
        Isa::avx2, harmonic_baoab, kick, drift, ou, biquad, multiply,
        power_accumulate, dho_model, sum, sum_sq_dev, dot,
    };
    return table;
}

}  // namespace detail
}  // namespace mgtrap::simd
