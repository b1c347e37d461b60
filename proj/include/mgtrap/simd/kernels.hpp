#pragma once

// Data-parallel inner loops shared by the integrator, the controller and the
// spectral analysis. Every kernel has a scalar reference implementation and,
// on x86-64, an AVX2 variant. The variant is chosen once at runtime.
//
// Both variants produce bit-identical results: kernels are elementwise except
// for the reductions, which are defined with four strided partial sums that
// are combined as (s0 + s1) + (s2 + s3) before the tail is added in order.
// No variant uses fused multiply-add.

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>

namespace mgtrap::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

/// State of N independent one-dimensional oscillators stored as arrays.
struct HarmonicLanes {
    std::span<double> x;
    std::span<double> v;
    std::span<double> acc;              ///< acceleration at the current x (cached)
    std::span<const double> omega_sq;   ///< spring constant / mass, rad^2/s^2
    std::span<const double> c1;         ///< exp(-gamma dt)
    std::span<const double> c2;         ///< velocity noise amplitude, m/s
};

/// Direct-form II transposed second-order sections, one per lane.
struct BiquadLanes {
    std::span<const double> b0, b1, b2, a1, a2;
    std::span<double> s1, s2;
};

struct KernelTable {
    Isa isa;

    // One BAOAB step of harmonic lanes. `ext_next` is the external
    // acceleration at the end of the step, `noise` standard normals.
    void (*harmonic_baoab)(const HarmonicLanes& lanes, std::span<const double> ext_next,
                           std::span<const double> noise, double half_dt);

    // v += h * a
    void (*kick)(std::span<double> v, std::span<const double> a, double h);
    // x += h * v
    void (*drift)(std::span<double> x, std::span<const double> v, double h);
    // v = c1 * v + c2 * noise
    void (*ou)(std::span<double> v, std::span<const double> c1, std::span<const double> c2,
               std::span<const double> noise);

    // One input sample per lane through one biquad per lane.
    void (*biquad)(const BiquadLanes& q, std::span<const double> in, std::span<double> out);

    // out = a * b
    void (*multiply)(std::span<const double> a, std::span<const double> b, std::span<double> out);
    // acc += |spec|^2
    void (*power_accumulate)(std::span<const std::complex<double>> spec, std::span<double> acc);

    // Damped-oscillator spectrum A / ((f0^2 - f^2)^2 + g^2 f^2) and its partial
    // derivatives with respect to ln A, f0 and g.
    void (*dho_model)(std::span<const double> f, double amplitude, double f0, double gamma,
                      std::span<double> model, std::span<double> d_ln_a, std::span<double> d_f0,
                      std::span<double> d_gamma);

    double (*sum)(std::span<const double> x);
    // sum (x - mean)^2
    double (*sum_sq_dev)(std::span<const double> x, double mean);
    double (*dot)(std::span<const double> a, std::span<const double> b);
};

bool isa_supported(Isa isa);

/// Kernels for an explicit ISA. Throws std::invalid_argument when the CPU or
/// the build does not support it.
const KernelTable& kernels_for(Isa isa);

/// Kernels for the best supported ISA. The MGTRAP_SIMD environment variable
/// ("scalar" or "avx2") overrides the choice.
const KernelTable& kernels();

Isa active_isa();

namespace detail {
const KernelTable& scalar_table();
#if defined(MGTRAP_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace mgtrap::simd
