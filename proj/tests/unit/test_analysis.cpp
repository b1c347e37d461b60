#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mgtrap/analysis/band.hpp"
#include "mgtrap/analysis/fit.hpp"
#include "mgtrap/analysis/mass.hpp"
#include "mgtrap/analysis/psd.hpp"
#include "mgtrap/analysis/steps.hpp"
#include "mgtrap/analysis/thermo.hpp"
#include "mgtrap/constants.hpp"
#include "mgtrap/control/lockin.hpp"
#include "mgtrap/dynamics/simulation.hpp"
#include "mgtrap/errors.hpp"

using namespace mgtrap;
using namespace mgtrap::analysis;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr double kB = 1.380649e-23;

double variance(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Damped-oscillator spectrum on a uniform grid, each bin scaled by a draw of `noise`.
template <class Noise>
PsdEstimate synthetic(double a, double f0, double g, double df, double fmax, Noise&& noise) {
    PsdEstimate e;
    e.resolution_hz = df;
    for (double f = df; f <= fmax; f += df) {
        e.f.push_back(f);
        e.psd.push_back(dho_psd(f, a, f0, g) * noise());
    }
    return e;
}

dynamics::SimulationConfig thermal(double gamma_hz, double duration) {
    dynamics::SimulationConfig c;
    c.damping_rate = two_pi * gamma_hz;
    c.duration_s = duration;
    c.dt_s = 1e-4;
    c.sample_period_s = 1e-3;
    return c;
}

std::vector<std::uint64_t> seeds(std::uint64_t n) {
    std::vector<std::uint64_t> s(n);
    for (std::uint64_t i = 0; i < n; ++i) s[i] = 100 + i;
    return s;
}

}  // namespace

TEST_CASE("Welch PSD of a bin-centred sinusoid integrates to one half") {
    const double fs = 1000.0;
    const std::size_t n = 1024;
    const double f0 = 100.0 * fs / n;
    std::vector<double> v(n * 32);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(two_pi * f0 * i / fs);
    const auto p = welch_psd(v, fs, n);
    CHECK(p.integral() == doctest::Approx(0.5).epsilon(0.01));
    CHECK(p.resolution_hz == doctest::Approx(fs / n));
    CHECK(p.segments == 63);
    const auto peak = std::max_element(p.psd.begin(), p.psd.end()) - p.psd.begin();
    CHECK(p.f[static_cast<std::size_t>(peak)] == doctest::Approx(f0));
    CHECK(p.integral(f0 - 5.0, f0 + 5.0) == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("Welch PSD of white noise is flat and integrates to the variance") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 0.7);
    std::vector<double> v(1 << 18);
    for (auto& x : v) x = n(rng);
    const double fs = 2000.0;
    const auto p = welch_psd(v, fs, 512);
    CHECK(p.integral() == doctest::Approx(0.49).epsilon(0.02));
    CHECK(p.integral() == doctest::Approx(variance(v)).epsilon(0.02));
    const double level = 2.0 * 0.49 / fs;
    double mean = 0.0;
    for (std::size_t i = 1; i + 1 < p.psd.size(); ++i) mean += p.psd[i];
    mean /= static_cast<double>(p.psd.size() - 2);
    CHECK(mean == doctest::Approx(level).epsilon(0.02));
}

TEST_CASE("Welch PSD preconditions") {
    std::vector<double> v(1000, 1.0);
    CHECK_THROWS_AS(welch_psd(v, 1000.0, 1024), DomainError);
    CHECK_THROWS_AS(welch_psd(v, 1000.0, 800), DomainError);
    CHECK_NOTHROW(welch_psd(v, 1000.0, 500));
    CHECK_THROWS_AS(welch_psd(v, 0.0, 100), DomainError);
}

TEST_CASE("segment length gives ten bins across the linewidth") {
    const auto n = segment_length_for(1000.0, 1.0, 1'000'000);
    CHECK(n == 16384);
    CHECK(1000.0 / static_cast<double>(n) <= 0.1);
    const auto capped = segment_length_for(1000.0, 0.01, 100'000, 8);
    CHECK((100'000 - capped) / (capped / 2) + 1 >= 8);
    CHECK(capped == 16384);
    CHECK((capped & (capped - 1)) == 0);
}

TEST_CASE("thermal simulation: PSD peak, Parseval, FDT shape and equipartition") {
    const double g = 2.0;
    auto cfg = thermal(g, 100.0);
    const auto runs = dynamics::simulate_ensemble(cfg, seeds(16));
    const double m = cfg.particle.mass();
    const double w = two_pi * 96.9;
    double var_sum = 0.0, int_sum = 0.0, fit_ms = 0.0, fit_g = 0.0, fit_f = 0.0;
    PsdEstimate avg;
    for (const auto& r : runs) {
        const auto& y = r.position[1];
        const auto p = welch_psd(y, 1000.0, 4096);
        var_sum += variance(y);
        int_sum += p.integral();
        if (avg.f.empty()) avg = p;
        else
            for (std::size_t i = 0; i < p.psd.size(); ++i) avg.psd[i] += p.psd[i];
        CHECK(p.integral() == doctest::Approx(variance(y)).epsilon(0.02));
    }
    for (auto& v : avg.psd) v /= static_cast<double>(runs.size());
    const auto peak = std::max_element(avg.psd.begin(), avg.psd.end()) - avg.psd.begin();
    CHECK(std::abs(avg.f[static_cast<std::size_t>(peak)] - 96.9) <= 2.0 * avg.resolution_hz);

    const auto fit = fit_psd(avg, {96.9 - 10 * g, 96.9 + 10 * g});
    fit_ms = fit.mean_square();
    fit_g = fit.gamma;
    fit_f = fit.f0;
    const double kt = kB * 295.0 / (m * w * w);
    CHECK(fit_f == doctest::Approx(96.9).epsilon(0.002));
    CHECK(fit_g == doctest::Approx(g).epsilon(0.05));
    CHECK(fit_ms == doctest::Approx(kt).epsilon(0.03));
    CHECK(effective_temperature(m, w, var_sum / runs.size()) == doctest::Approx(295.0).epsilon(0.03));
    CHECK(int_sum / runs.size() == doctest::Approx(kt).epsilon(0.03));
}

TEST_CASE("PSD fit recovers a resonance from data with 1% noise") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 0.01);
    const auto est = synthetic(3.0e-9, 96.5, 7.0, 0.1, 250.0, [&] { return 1.0 + n(rng); });
    const auto fit = fit_psd(est, {96.5 - 35.0, 96.5 + 35.0});
    CHECK(fit.f0 == doctest::Approx(96.5).epsilon(0.02));
    CHECK(fit.gamma == doctest::Approx(7.0).epsilon(0.02));
    CHECK_FALSE(fit.gamma_at_bound);
    CHECK(fit.gamma > 0.0);
    CHECK(fit.f0 > 61.5);
    CHECK(fit.f0 < 131.5);
}

TEST_CASE("PSD fit is exact on noiseless data") {
    const auto est = synthetic(1.7e-12, 6.7, 1.5, 0.01, 30.0, [] { return 1.0; });
    const auto fit = fit_psd(est, {0.5, 15.0});
    CHECK(fit.f0 == doctest::Approx(6.7).epsilon(1e-8));
    CHECK(fit.gamma == doctest::Approx(1.5).epsilon(1e-8));
    CHECK(fit.amplitude == doctest::Approx(1.7e-12).epsilon(1e-8));
    CHECK(fit.mean_square() == doctest::Approx(1.7e-12 * std::numbers::pi / (2 * 1.5 * 6.7 * 6.7)).epsilon(1e-8));
    const auto again = fit_psd(est, {0.5, 15.0});
    CHECK(again.f0 == fit.f0);
    CHECK(again.gamma == fit.gamma);
}

TEST_CASE("PSD fit covariance covers the truth") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uf(20.0, 150.0), ug(0.5, 10.0), ua(-2.0, 2.0);
    int covered = 0;
    const int trials = 100;
    for (int k = 0; k < trials; ++k) {
        const double f0 = uf(rng), g = ug(rng), a = std::pow(10.0, ua(rng));
        const double df = g / 10.0;
        // averaged periodogram statistics: gamma distribution with 16 degrees
        std::gamma_distribution<double> noise(16.0, 1.0 / 16.0);
        const auto est = synthetic(a, f0, g, df, f0 + 15 * g, [&] { return noise(rng); });
        const auto fit = fit_psd(est, {std::max(df, f0 - 10 * g), f0 + 10 * g});
        if (std::abs(fit.f0 - f0) <= 3 * fit.sigma_f0() && std::abs(fit.gamma - g) <= 3 * fit.sigma_gamma()) ++covered;
    }
    CHECK(covered >= 95);
}

TEST_CASE("spur rejection drops a line from another mode and recovers the resonance") {
    std::mt19937_64 rng(5);
    std::gamma_distribution<double> noise(32.0, 1.0 / 32.0);
    auto est = synthetic(3.0e-9, 96.5, 7.0, 0.25, 250.0, [&] { return noise(rng); });
    for (std::size_t i = 0; i < est.f.size(); ++i)
        if (std::abs(est.f[i] - 119.25) < 0.3) est.psd[i] *= 1e4;
    FitOptions opt;
    opt.f0_guess = 96.5;
    opt.gamma_guess = 7.0;
    opt.spur_ratio = 10.0;
    const auto fit = fit_psd(est, {26.5, 166.5}, opt);
    REQUIRE_FALSE(fit.rejected_hz.empty());
    for (double f : fit.rejected_hz) CHECK(std::abs(f - 119.25) < 0.3);
    CHECK(fit.f0 == doctest::Approx(96.5).epsilon(0.01));
    CHECK(fit.gamma == doctest::Approx(7.0).epsilon(0.05));
}

TEST_CASE("spur rejection leaves clean data untouched") {
    const auto est = synthetic(1.7e-12, 6.7, 1.5, 0.01, 30.0, [] { return 1.0; });
    FitOptions opt;
    opt.spur_ratio = 10.0;
    const auto fit = fit_psd(est, {0.5, 15.0}, opt);
    CHECK(fit.rejected_hz.empty());
    CHECK(fit.gamma == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("PSD fit errors") {
    const auto est = synthetic(1.0, 10.0, 1.0, 0.5, 40.0, [] { return 1.0; });
    CHECK_THROWS_AS(fit_psd(est, {12.0, 11.0}), DomainError);
    CHECK_THROWS_AS(fit_psd(est, {10.0, 11.0}), FitError);
    auto bad = est;
    bad.psd[20] = -1.0;
    CHECK_THROWS_AS(fit_psd(bad, {5.0, 15.0}), FitError);
}

TEST_CASE("PSD fit flags a width at its bound") {
    // one-bin-wide spike: width collapses to the lower bound
    PsdEstimate e;
    e.resolution_hz = 1.0;
    for (int i = 1; i <= 60; ++i) {
        e.f.push_back(i);
        e.psd.push_back(i == 30 ? 1e6 : 1.0 + 1e-3 * (i % 3));
    }
    try {
        const auto fit = fit_psd(e, {10.0, 50.0});
        CHECK(fit.gamma_at_bound);
    } catch (const FitError& err) {
        CHECK_FALSE(err.residual_trace.empty());
    }
}

TEST_CASE("effective temperature examples") {
    const double t = effective_temperature(3.10e-15, two_pi * 96.5, 1.45e-17);
    CHECK(std::round(t * 1e4) / 1e4 == doctest::Approx(1.2e-3));
    CHECK(t == doctest::Approx(3.10e-15 * std::pow(two_pi * 96.5, 2) * 1.45e-17 / kB).epsilon(1e-12));
    CHECK(effective_temperature(3.10e-15, two_pi * 96.5, 0.0) == 0.0);
    CHECK_THROWS_AS(effective_temperature(-1.0, 1.0, 1.0), ModelError);
}

TEST_CASE("phonon occupation") {
    const double hbar = 1.054572e-34;
    const double ny = phonon_occupation(1.2e-3, two_pi * 96.5);
    CHECK(ny == doctest::Approx(kB * 1.2e-3 / (hbar * two_pi * 96.5)).epsilon(1e-9));
    const double nz = phonon_occupation(0.6e-3, two_pi * 6.7);
    CHECK(std::round(nz / 1e5) * 1e5 == doctest::Approx(1.9e6));
    CHECK(phonon_occupation(2.4e-3, two_pi * 96.5) == doctest::Approx(2.0 * ny).epsilon(1e-14));
    CHECK_THROWS_AS(phonon_occupation(0.0, 1.0), ModelError);
}

TEST_CASE("damping bound") {
    const double by = damping_bound(1.2e-3, 295.0, two_pi * 7.0) / two_pi;
    CHECK(std::round(by * 1e5) / 1e5 == doctest::Approx(3e-5));
    const double bz = damping_bound(0.6e-3, 295.0, two_pi * 1.5) / two_pi;
    CHECK(std::round(bz * 1e6) / 1e6 == doctest::Approx(3e-6));
    CHECK(damping_bound(295.0, 295.0, 4.2) == 4.2);
    CHECK_THROWS_AS(damping_bound(300.0, 295.0, 1.0), ModelError);
}

TEST_CASE("band mean square of a tone and its stop band") {
    const double fs = 1000.0, a = 2.5e-8;
    std::vector<double> v(100000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a * std::sin(two_pi * 96.9 * i / fs + 0.3);
    CHECK(mean_square_from_band(v, fs, 86.9, 106.9) == doctest::Approx(a * a / 2).epsilon(0.01));
    CHECK(mean_square_from_band(v, fs, 200.0, 240.0) < 1e-4 * a * a / 2);
    CHECK(mean_square_from_band(v, fs, 5.0, 15.0) < 1e-4 * a * a / 2);
    CHECK_THROWS_AS(mean_square_from_band(v, fs, 20.0, 20.0), DomainError);
    CHECK_THROWS_AS(mean_square_from_band(v, fs, 400.0, 600.0), DomainError);
}

TEST_CASE("filtfilt has zero phase") {
    const auto s = control::design_butterworth_bandpass(2, 40.0, 60.0, 1000.0);
    std::vector<double> v(20000);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(two_pi * 45.0 * i / 1000.0);
    const auto y = filtfilt(s, v, 300);
    const double h = std::abs(s[0].response(45.0, 1000.0) * s[1].response(45.0, 1000.0));
    for (std::size_t i = 5000; i < 15000; i += 97) CHECK(y[i] == doctest::Approx(h * h * v[i]).epsilon(1e-6).scale(1.0));
}

TEST_CASE("mass from thermal simulation round trip") {
    auto cfg = thermal(5.0, 100.0);
    const auto runs = dynamics::simulate_ensemble(cfg, seeds(16));
    std::vector<double> y, z;
    for (const auto& r : runs) {
        y.insert(y.end(), r.position[1].begin(), r.position[1].end());
        z.insert(z.end(), r.position[2].begin(), r.position[2].end());
    }
    const auto m = extract_mass(y, z, 96.9, 7.01, 295.0);
    CHECK(m.mass == doctest::Approx(3.10e-15).epsilon(0.02));
    CHECK(m.consistent);
    CHECK(m.mass > 2.4e-15);
    CHECK(m.mass < 4.4e-15);
    CHECK(m.sigma > 0.0);
    CHECK(std::abs(m.mass - 3.10e-15) < 4 * m.sigma);
    const auto h = extract_mass_histogram(y, z, 96.9, 7.01, 295.0);
    CHECK(h.mass == doctest::Approx(3.10e-15).epsilon(0.05));
}

TEST_CASE("identical axes give identical masses") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1e-8);
    std::vector<double> s(50000);
    for (auto& x : s) x = n(rng);
    const auto m = extract_mass(s, s, 50.0, 50.0, 295.0);
    CHECK(m.y.mass == m.z.mass);
    CHECK(m.mass == m.y.mass);
    CHECK(m.consistent);
    const double expect = kB * 295.0 / (std::pow(two_pi * 50.0, 2) * variance(s));
    CHECK(m.y.mass == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("inconsistent axes are flagged") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> y(50000), z(50000);
    for (auto& x : y) x = 1e-8 * n(rng);
    for (auto& x : z) x = 2e-8 * n(rng);
    CHECK_FALSE(extract_mass(y, z, 50.0, 50.0, 295.0).consistent);
    CHECK_THROWS_AS(extract_mass(std::vector<double>(50), z, 50.0, 50.0, 295.0), DomainError);
}

TEST_CASE("squared-displacement histogram recovers the variance") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 3e-8);
    std::vector<double> s(200000);
    for (auto& x : s) x = n(rng);
    const auto a = mass_from_square_histogram(s, 30.0, 295.0);
    CHECK(a.variance == doctest::Approx(9e-16).epsilon(0.03));
}

TEST_CASE("synthetic charge staircase gives five steps and ends at zero") {
    const double fs = 1000.0, fref = 1.0, tau = 1.0;
    std::mt19937_64 rng(17);
    std::normal_distribution<double> n(0.0, 3.0);
    std::vector<double> v(static_cast<std::size_t>(260.0 * fs));
    std::vector<double> truth{30.0, 70.0, 110.0, 150.0, 190.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = i / fs;
        const double q = 5.0 - static_cast<double>(std::count_if(truth.begin(), truth.end(), [&](double s) { return t >= s; }));
        v[i] = q * std::sin(two_pi * fref * t) + n(rng);
    }
    const auto li = control::lock_in(v, fs, {fref, tau});
    StepDetectionConfig cfg;
    cfg.time_constant_s = tau;
    const auto rep = detect_charge_steps(li.r, li.sample_rate_hz, cfg);
    REQUIRE(rep.steps.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(std::abs(rep.steps[k].t - truth[k]) < 3.0 * tau);
        CHECK(rep.steps[k].electrons == doctest::Approx(1.0).epsilon(0.15));
    }
    CHECK(rep.quantum == doctest::Approx(1.0).epsilon(0.1));
    CHECK(rep.initial_level == doctest::Approx(5.0).epsilon(0.05));
    CHECK(rep.reached_zero);
    REQUIRE(rep.zero_time);
    CHECK(*rep.zero_time == doctest::Approx(190.0).epsilon(0.03));
    CHECK_FALSE(rep.ambiguous());
}

TEST_CASE("high signal-to-noise steps ten time constants apart leave no side peaks") {
    const double fs = 1000.0;
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0.0, 0.01);
    std::vector<double> v(static_cast<std::size_t>(120.0 * fs));
    std::vector<double> truth{30.0, 40.0, 50.0, 60.0, 70.0};
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = i / fs;
        const double q = 5.0 - static_cast<double>(std::count_if(truth.begin(), truth.end(), [&](double s) { return t >= s; }));
        v[i] = q * std::sin(two_pi * t) + n(rng);
    }
    const auto li = control::lock_in(v, fs, {1.0, 1.0});
    const auto rep = detect_charge_steps(li.r, li.sample_rate_hz, StepDetectionConfig{});
    CHECK(rep.steps.size() == 5);
    CHECK_FALSE(rep.ambiguous());
    CHECK(rep.reached_zero);
}

TEST_CASE("constant amplitude gives no steps") {
    std::mt19937_64 rng(18);
    std::normal_distribution<double> n(0.0, 0.02);
    std::vector<double> r(20000);
    for (auto& x : r) x = 3.0 + n(rng);
    StepDetectionConfig cfg;
    const auto rep = detect_charge_steps(r, 100.0, cfg);
    CHECK(rep.steps.empty());
    CHECK_FALSE(rep.reached_zero);
    CHECK(rep.final_level == doctest::Approx(3.0).epsilon(0.01));
    CHECK_THROWS_AS(detect_charge_steps(std::span<const double>(r.data(), 100), 100.0, cfg), DomainError);
}

namespace {

StepReport half_step_report(double noise_sd) {
    const double fs = 1000.0;
    std::mt19937_64 rng(19);
    std::normal_distribution<double> n(0.0, noise_sd);
    std::vector<double> v(static_cast<std::size_t>(120.0 * fs));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t = i / fs;
        const double q = t < 40.0 ? 3.0 : (t < 80.0 ? 2.0 : 1.5);
        v[i] = q * std::sin(two_pi * t) + n(rng);
    }
    const auto li = control::lock_in(v, fs, {1.0, 1.0});
    StepDetectionConfig cfg;
    cfg.quantum = 1.0;
    return detect_charge_steps(li.r, li.sample_rate_hz, cfg);
}

}  // namespace

TEST_CASE("a sub-threshold step is flagged rather than accepted") {
    const auto rep = half_step_report(3.0);
    REQUIRE(rep.steps.size() == 1);
    CHECK(rep.steps[0].t == doctest::Approx(40.0).epsilon(0.05));
    REQUIRE(rep.ambiguous());
    CHECK(rep.ambiguous_times.front() == doctest::Approx(80.0).epsilon(0.05));
}

TEST_CASE("a detected step that is not one quantum high is flagged") {
    const auto rep = half_step_report(1.0);
    REQUIRE(rep.steps.size() == 2);
    CHECK(rep.steps[1].electrons == doctest::Approx(0.5).epsilon(0.1));
    REQUIRE(rep.ambiguous());
    CHECK(rep.ambiguous_times.front() == doctest::Approx(rep.steps[1].t));
    CHECK_FALSE(rep.reached_zero);
}
