#include "mgtrap/analysis/fit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Dense>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::analysis {

double dho_psd(double f, double amplitude, double f0, double gamma) {
    const double d = f0 * f0 - f * f;
    return amplitude / (d * d + gamma * gamma * f * f);
}

double PsdFit::sigma_f0() const { return std::sqrt(covariance(1, 1)); }
double PsdFit::sigma_gamma() const { return std::sqrt(covariance(2, 2)); }
double PsdFit::sigma_amplitude() const { return std::sqrt(covariance(0, 0)); }
double PsdFit::mean_square() const { return amplitude * std::numbers::pi / (2.0 * gamma * f0 * f0); }

namespace {

struct Problem {
    std::vector<double> f, p, expected;
    double gamma_lo = 0.0, gamma_hi = 0.0;
};

struct Workspace {
    std::vector<double> model, d0, d1, d2, r, w0, w1, w2, inv_e;
    explicit Workspace(std::size_t n)
        : model(n), d0(n), d1(n), d2(n), r(n), w0(n), w1(n), w2(n), inv_e(n) {}
};

// Weighted residuals and Jacobian columns at theta; returns the cost.
double evaluate(const Problem& pr, const Eigen::Vector3d& theta, Workspace& ws, bool jacobian) {
    const auto& k = simd::kernels();
    k.dho_model(pr.f, std::exp(theta[0]), theta[1], theta[2], ws.model, ws.d0, ws.d1, ws.d2);
    for (std::size_t i = 0; i < pr.f.size(); ++i) ws.r[i] = pr.p[i] - ws.model[i];
    k.multiply(ws.r, ws.inv_e, ws.r);
    if (jacobian) {
        k.multiply(ws.d0, ws.inv_e, ws.w0);
        k.multiply(ws.d1, ws.inv_e, ws.w1);
        k.multiply(ws.d2, ws.inv_e, ws.w2);
    }
    return k.dot(ws.r, ws.r);
}

Eigen::Matrix3d normal_matrix(const Workspace& ws, Eigen::Vector3d* gradient) {
    const auto& k = simd::kernels();
    const std::vector<double>* cols[3] = {&ws.w0, &ws.w1, &ws.w2};
    Eigen::Matrix3d m;
    for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) m(a, b) = m(b, a) = k.dot(*cols[a], *cols[b]);
    // residual = p - model, so d residual / d theta = -column
    if (gradient)
        for (int a = 0; a < 3; ++a) (*gradient)[a] = -k.dot(*cols[a], ws.r);
    return m;
}

struct LmResult {
    Eigen::Vector3d theta;
    double cost;
    int iterations;
};

LmResult levenberg_marquardt(const Problem& pr, Eigen::Vector3d theta, const FitOptions& opt,
                             std::vector<double>& trace) {
    Workspace ws(pr.f.size());
    for (std::size_t i = 0; i < pr.f.size(); ++i) ws.inv_e[i] = 1.0 / pr.expected[i];
    double cost = evaluate(pr, theta, ws, true);
    trace.push_back(cost);
    double lambda = 1e-3;
    const double tiny_cost = 1e-28 * static_cast<double>(pr.f.size());
    for (int it = 1; it <= opt.max_iterations; ++it) {
        Eigen::Vector3d g;
        const Eigen::Matrix3d jtj = normal_matrix(ws, &g);
        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::Matrix3d a = jtj;
            a.diagonal() *= 1.0 + lambda;
            const Eigen::Vector3d delta = a.ldlt().solve(-g);
            Eigen::Vector3d next = theta + delta;
            next[2] = std::clamp(std::abs(next[2]), pr.gamma_lo, pr.gamma_hi);
            Workspace trial = ws;
            const double c = evaluate(pr, next, trial, true);
            if (std::isfinite(c) && c <= cost) {
                const bool small_step = std::abs(delta[1]) <= 1e-13 * std::abs(theta[1]) &&
                                        std::abs(delta[2]) <= 1e-13 * std::abs(theta[2]) &&
                                        std::abs(delta[0]) <= 1e-13;
                const bool converged = cost - c <= opt.tolerance * cost || c <= tiny_cost || small_step;
                theta = next;
                cost = c;
                ws = std::move(trial);
                trace.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (converged) return {theta, cost, it};
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) return {theta, cost, it};  // no descent direction left: at the minimum
    }
    throw FitError("PSD fit did not converge", trace);
}

}  // namespace

PsdFit fit_psd(const PsdEstimate& est, FitBand band, const FitOptions& opt) {
    if (!(band.high_hz > band.low_hz)) throw DomainError("fit band is empty");
    Problem pr;
    for (std::size_t i = 0; i < est.f.size(); ++i) {
        if (est.f[i] > 0.0 && est.f[i] >= band.low_hz && est.f[i] <= band.high_hz) {
            pr.f.push_back(est.f[i]);
            pr.p.push_back(est.psd[i]);
        }
    }
    std::size_t n = pr.f.size();
    if (n < 6) throw FitError("fit band holds fewer than six PSD bins");
    for (double v : pr.p)
        if (!(v > 0.0) || !std::isfinite(v)) throw FitError("PSD bins in the fit band must be positive");

    const double resolution = est.resolution_hz > 0.0 ? est.resolution_hz : pr.f[1] - pr.f[0];
    std::size_t peak = static_cast<std::size_t>(std::max_element(pr.p.begin(), pr.p.end()) - pr.p.begin());
    if (opt.f0_guess) {
        peak = 0;
        for (std::size_t i = 1; i < n; ++i)
            if (std::abs(pr.f[i] - *opt.f0_guess) < std::abs(pr.f[peak] - *opt.f0_guess)) peak = i;
    }
    const double half = 0.5 * pr.p[peak];
    double left = pr.f.front(), right = pr.f.back();
    for (std::size_t i = peak; i-- > 0;) {
        if (pr.p[i] < half) {
            left = pr.f[i] + (half - pr.p[i]) / (pr.p[i + 1] - pr.p[i]) * (pr.f[i + 1] - pr.f[i]);
            break;
        }
    }
    for (std::size_t i = peak + 1; i < n; ++i) {
        if (pr.p[i] < half) {
            right = pr.f[i - 1] + (pr.p[i - 1] - half) / (pr.p[i - 1] - pr.p[i]) * (pr.f[i] - pr.f[i - 1]);
            break;
        }
    }
    const double f0 = opt.f0_guess.value_or(pr.f[peak]);
    const double gamma0 = opt.gamma_guess.value_or(std::max(right - left, resolution));
    pr.gamma_lo = 1e-3 * resolution;
    pr.gamma_hi = 10.0 * (band.high_hz - band.low_hz);

    Eigen::Vector3d theta(std::log(pr.p[peak] * gamma0 * gamma0 * f0 * f0), f0, gamma0);
    if (opt.f0_guess) theta[0] = std::log(pr.p[peak] / dho_psd(pr.f[peak], 1.0, f0, gamma0));
    PsdFit fit;
    int iterations = 0;
    double cost = 0.0;
    const int passes = std::max(1, opt.weight_passes);
    const auto run_passes = [&] {
        for (int pass = 0; pass < passes; ++pass) {
            pr.expected.resize(pr.f.size());
            for (std::size_t i = 0; i < pr.f.size(); ++i)
                pr.expected[i] = dho_psd(pr.f[i], std::exp(theta[0]), theta[1], theta[2]);
            const auto r = levenberg_marquardt(pr, theta, opt, fit.residual_trace);
            theta = r.theta;
            cost = r.cost;
            iterations += r.iterations;
        }
    };
    const Problem full = pr;
    // A guessed model is good enough to screen spurs before the first fit.
    const bool screened = opt.spur_ratio > 0.0 && opt.f0_guess && opt.gamma_guess;
    if (!screened) run_passes();
    for (int round = 0; opt.spur_ratio > 0.0 && round < 6; ++round) {
        Problem kept = full;
        kept.f.clear();
        kept.p.clear();
        std::vector<double> rejected;
        for (std::size_t i = 0; i < full.f.size(); ++i) {
            if (full.p[i] > opt.spur_ratio * dho_psd(full.f[i], std::exp(theta[0]), theta[1], theta[2])) {
                rejected.push_back(full.f[i]);
            } else {
                kept.f.push_back(full.f[i]);
                kept.p.push_back(full.p[i]);
            }
        }
        if (rejected == fit.rejected_hz && (round > 0 || !screened)) break;
        if (kept.f.size() < 6) throw FitError("fewer than six PSD bins left after spur rejection", fit.residual_trace);
        fit.rejected_hz = std::move(rejected);
        pr = std::move(kept);
        n = pr.f.size();
        run_passes();
    }

    Workspace ws(n);
    for (std::size_t i = 0; i < n; ++i) ws.inv_e[i] = 1.0 / pr.expected[i];
    evaluate(pr, theta, ws, true);
    const Eigen::Matrix3d jtj = normal_matrix(ws, nullptr);
    const double dof = static_cast<double>(n) - 3.0;
    fit.reduced_chi_square = cost / dof;
    Eigen::Matrix3d cov = jtj.inverse() * fit.reduced_chi_square;
    const double amp = std::exp(theta[0]);
    const Eigen::Vector3d scale(amp, 1.0, 1.0);
    fit.covariance = scale.asDiagonal() * cov * scale.asDiagonal();
    fit.amplitude = amp;
    fit.f0 = theta[1];
    fit.gamma = theta[2];
    fit.bins = n;
    fit.iterations = iterations;
    fit.gamma_at_bound = theta[2] <= pr.gamma_lo * (1.0 + 1e-12) || theta[2] >= pr.gamma_hi * (1.0 - 1e-12);
    if (!std::isfinite(fit.f0) || !std::isfinite(fit.gamma) || !cov.allFinite())
        throw FitError("PSD fit produced non-finite parameters", fit.residual_trace);
    return fit;
}

}  // namespace mgtrap::analysis
