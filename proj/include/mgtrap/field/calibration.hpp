#pragma once

#include <optional>
#include <vector>

#include "mgtrap/field/field_model.hpp"

namespace mgtrap::field {

struct CalibrationOptions {
    double relative_tolerance = 1e-9;  ///< on each frequency
    int max_iterations = 60;
    double validity_radius_m = 1e-3;
    /// Starting coefficients; when empty a guess is derived from the targets
    /// for the terms it knows (quadrupole and upward-curvature terms).
    std::optional<std::vector<double>> initial_guess;
    EquilibriumOptions equilibrium{};
};

struct CalibrationResult {
    MultipoleCoefficients coefficients;
    TrapAnalysis trap;
    int iterations = 0;
    std::vector<double> residual_trace;  ///< max relative frequency error per iteration
};

/// Solve for the coefficients of exactly three retained terms so that the
/// Hessian trap frequencies match `targets`. Quasi-Newton with a
/// finite-difference Jacobian and backtracking; deterministic.
/// Throws CalibrationError carrying the residual trace on failure.
CalibrationResult calibrate_coefficients(const TrapFrequencies& targets, const Particle& p,
                                         const MultipoleCoefficients& term_selection = default_term_selection(),
                                         const CalibrationOptions& opt = {});

/// Height of the zero-field line at axial position z (x = 0), found as the
/// minimum of |B| along y near the trap centre.
double zero_line_height(const FieldModel& field, double z, double search_half_width_m = 4e-5);

/// Magnitude of grad |B| at r (finite differences of |B|).
double field_magnitude_gradient(const FieldModel& field, const Eigen::Vector3d& r, double h = 1e-8);

}  // namespace mgtrap::field
