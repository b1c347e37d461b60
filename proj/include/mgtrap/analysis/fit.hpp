#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "mgtrap/analysis/psd.hpp"

namespace mgtrap::analysis {

/// A / ((f0^2 - f^2)^2 + gamma^2 f^2)
double dho_psd(double f, double amplitude, double f0, double gamma);

struct FitBand {
    double low_hz = 0.0;
    double high_hz = 0.0;
};

struct FitOptions {
    int max_iterations = 200;
    double tolerance = 1e-12;  ///< relative cost change
    int weight_passes = 2;     ///< initial-guess weights, then one refit with fitted weights
    /// Starting point; otherwise the peak bin and its half-power width.
    std::optional<double> f0_guess;
    std::optional<double> gamma_guess;
    /// When positive, bins above this multiple of the fitted model are
    /// treated as spurs (lines from other modes), dropped, and the fit repeated.
    double spur_ratio = 0.0;
};

struct PsdFit {
    double amplitude = 0.0;
    double f0 = 0.0;     ///< Hz
    double gamma = 0.0;  ///< Hz, equals Gamma' / 2 pi
    /// Covariance of (A, f0, gamma), scaled by the reduced chi-square.
    Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
    double reduced_chi_square = 0.0;
    std::size_t bins = 0;
    std::vector<double> rejected_hz;  ///< spur bins left out of the fit
    int iterations = 0;
    bool gamma_at_bound = false;
    std::vector<double> residual_trace;

    double sigma_f0() const;
    double sigma_gamma() const;
    double sigma_amplitude() const;
    /// Integral of the fitted model over 0..inf, A pi / (2 gamma f0^2).
    double mean_square() const;
};

/// Weighted Levenberg-Marquardt fit of the damped-oscillator PSD within
/// `band`. Bin weights are 1 / (expected PSD)^2, taken from the initial guess
/// and then from the first fit. Initial guess from the peak bin and the
/// half-power width. Throws FitError with the cost trace on nonconvergence.
PsdFit fit_psd(const PsdEstimate& est, FitBand band, const FitOptions& opt = {});

}  // namespace mgtrap::analysis
