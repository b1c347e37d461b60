#include "mgtrap/analysis/mass.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mgtrap/constants.hpp"
#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::analysis {

namespace {

double omega_sq(double f_hz) { return std::pow(2.0 * std::numbers::pi * f_hz, 2); }

AxisMass axis_mass(std::span<const double> x, double f_hz, double temperature_K, std::size_t blocks) {
    if (!(f_hz > 0.0) || !(temperature_K > 0.0)) throw ModelError("frequency and temperature must be positive");
    if (blocks < 2) throw ModelError("need at least two blocks");
    if (x.size() < 10 * blocks) throw DomainError("record too short for mass extraction");
    const auto& k = simd::kernels();
    const double n = static_cast<double>(x.size());
    const double mean = k.sum(x) / n;
    AxisMass a;
    a.samples = x.size();
    a.variance = k.sum_sq_dev(x, mean) / n;
    if (!(a.variance > 0.0)) throw DomainError("record has zero variance");
    a.mass = constants::boltzmann * temperature_K / (omega_sq(f_hz) * a.variance);

    const std::size_t len = x.size() / blocks;
    std::vector<double> vars(blocks);
    for (std::size_t b = 0; b < blocks; ++b) vars[b] = k.sum_sq_dev(x.subspan(b * len, len), mean) / len;
    const double vm = k.sum(vars) / static_cast<double>(blocks);
    const double sd = std::sqrt(k.sum_sq_dev(vars, vm) / static_cast<double>(blocks - 1));
    a.sigma = a.mass * sd / std::sqrt(static_cast<double>(blocks)) / a.variance;
    return a;
}

MassEstimate combine(AxisMass y, AxisMass z, std::string method) {
    MassEstimate e;
    e.y = y;
    e.z = z;
    e.mass = 0.5 * (y.mass + z.mass);
    e.sigma = 0.5 * std::hypot(y.sigma, z.sigma);
    e.consistent = std::abs(y.mass - z.mass) <= 3.0 * std::hypot(y.sigma, z.sigma);
    e.method = std::move(method);
    return e;
}

}  // namespace

MassEstimate extract_mass(std::span<const double> y, std::span<const double> z, double fy_hz, double fz_hz,
                          double temperature_K, std::size_t blocks) {
    return combine(axis_mass(y, fy_hz, temperature_K, blocks), axis_mass(z, fz_hz, temperature_K, blocks),
                   "variance");
}

AxisMass mass_from_square_histogram(std::span<const double> x, double f_hz, double temperature_K, std::size_t bins) {
    if (x.size() < 100 || bins < 4) throw DomainError("record too short for a histogram fit");
    const auto& k = simd::kernels();
    const double mean = k.sum(x) / static_cast<double>(x.size());
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = (x[i] - mean) * (x[i] - mean);
    const double var_guess = k.sum(u) / static_cast<double>(u.size());
    const double top = 8.0 * var_guess;
    const double width = top / static_cast<double>(bins);
    std::vector<double> counts(bins, 0.0);
    for (double v : u)
        if (v < top) counts[std::min(bins - 1, static_cast<std::size_t>(v / width))] += 1.0;

    // Weighted least squares of ln(c / (width sqrt(u_mid))) = a - u / (2 s^2), weight = count.
    double sw = 0, su = 0, sy = 0, suu = 0, suy = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (counts[b] < 5.0) continue;
        const double lo = b * width, hi = lo + width;
        // exact integral of u^(-1/2) over the bin replaces width * sqrt(mid)
        const double norm = 2.0 * (std::sqrt(hi) - std::sqrt(lo));
        const double mid = 0.5 * (lo + hi);
        const double yv = std::log(counts[b] / norm);
        const double w = counts[b];
        sw += w;
        su += w * mid;
        sy += w * yv;
        suu += w * mid * mid;
        suy += w * mid * yv;
    }
    const double det = sw * suu - su * su;
    if (!(det > 0.0)) throw FitError("squared-displacement histogram has too few populated bins");
    const double slope = (sw * suy - su * sy) / det;
    if (!(slope < 0.0)) throw FitError("squared-displacement histogram does not decay");
    AxisMass a;
    a.samples = x.size();
    a.variance = -0.5 / slope;
    a.mass = constants::boltzmann * temperature_K / (omega_sq(f_hz) * a.variance);
    const double slope_sigma = std::sqrt(sw / det);
    a.sigma = a.mass * slope_sigma / std::abs(slope);
    return a;
}

MassEstimate extract_mass_histogram(std::span<const double> y, std::span<const double> z, double fy_hz,
                                    double fz_hz, double temperature_K, std::size_t bins) {
    return combine(mass_from_square_histogram(y, fy_hz, temperature_K, bins),
                   mass_from_square_histogram(z, fz_hz, temperature_K, bins), "square-histogram");
}

}  // namespace mgtrap::analysis
