#include "mgtrap/field/calibration.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/LU>

#include "mgtrap/errors.hpp"

namespace mgtrap::field {
namespace {

constexpr double kInfeasible = std::numeric_limits<double>::infinity();

struct Evaluation {
    Eigen::Vector3d residual = Eigen::Vector3d::Constant(kInfeasible);
    double norm = kInfeasible;
    bool ok = false;
};

MultipoleCoefficients with_values(const MultipoleCoefficients& selection, const Eigen::Vector3d& values) {
    MultipoleCoefficients c = selection;
    for (int k = 0; k < 3; ++k) c.terms[k].coefficient = values[k];
    return c;
}

}  // namespace

CalibrationResult calibrate_coefficients(const TrapFrequencies& targets, const Particle& p,
                                         const MultipoleCoefficients& term_selection,
                                         const CalibrationOptions& opt) {
    if (term_selection.terms.size() != 3)
        throw ModelError("calibration needs exactly three retained multipole terms");
    for (const auto& t : term_selection.terms)
        if (!mirror_symmetric(t)) throw ModelError("term " + describe(t) + " breaks the x/z mirror symmetry");
    const Eigen::Vector3d target(targets.fx, targets.fy, targets.fz);
    if (!(target.minCoeff() > 0.0)) throw ModelError("target trap frequencies must be positive");
    if (!(p.chi() < 0.0)) throw ModelError("only diamagnetic particles (chi < 0) can be trapped");

    const double a = -p.chi() / (constants::mu0 * p.density());
    const double g = opt.equilibrium.gravity;
    Eigen::Vector3d omega_sq;
    for (int i = 0; i < 3; ++i) omega_sq[i] = std::pow(constants::two_pi * target[i], 2);
    const double gradient0 = std::sqrt(0.5 * (omega_sq[0] + omega_sq[1]) / a);
    const double sag = g / (a * gradient0 * gradient0);

    Eigen::Vector3d guess = Eigen::Vector3d::Zero();
    Eigen::Vector3d scale;
    bool quadrupole_seen = false;
    for (int k = 0; k < 3; ++k) {
        const auto& t = term_selection.terms[k];
        if (t.degree == 2 && !quadrupole_seen) {
            guess[k] = 0.5 * gradient0;
            quadrupole_seen = true;
        } else if (t.degree == 3 && t.order == 1 && t.parity == Parity::sine) {
            guess[k] = omega_sq[2] * gradient0 / (8.0 * g);
        }
        scale[k] = guess[k] != 0.0 ? std::abs(guess[k]) : 0.5 * gradient0 * std::pow(sag, 2 - t.degree);
    }
    if (opt.initial_guess) {
        if (opt.initial_guess->size() != 3) throw ModelError("initial guess must hold three coefficients");
        for (int k = 0; k < 3; ++k) guess[k] = (*opt.initial_guess)[k];
    }

    EquilibriumOptions fast = opt.equilibrium;
    fast.starts = 0;

    const auto evaluate = [&](const Eigen::Vector3d& u) {
        Evaluation e;
        try {
            const FieldModel model(with_values(term_selection, u.cwiseProduct(scale)), opt.validity_radius_m, true);
            const TrapFrequencies f = analyze_trap(model, p, fast).frequencies;
            for (int i = 0; i < 3; ++i) e.residual[i] = f[i] / target[i] - 1.0;
            e.norm = e.residual.norm();
            e.ok = std::isfinite(e.norm);
        } catch (const Error&) {
        }
        return e;
    };

    Eigen::Vector3d u = guess.cwiseQuotient(scale);
    Evaluation current = evaluate(u);
    CalibrationResult result;
    if (!current.ok)
        throw CalibrationError("initial multipole guess does not form a stable trap; supply an initial guess");

    for (int it = 0; it < opt.max_iterations; ++it) {
        result.residual_trace.push_back(current.residual.cwiseAbs().maxCoeff());
        if (result.residual_trace.back() < opt.relative_tolerance) {
            result.iterations = it;
            result.coefficients = with_values(term_selection, u.cwiseProduct(scale));
            const FieldModel model(result.coefficients, opt.validity_radius_m, true);
            result.trap = analyze_trap(model, p, opt.equilibrium);
            return result;
        }
        Eigen::Matrix3d jac;
        constexpr double h = 1e-6;
        bool jac_ok = true;
        for (int k = 0; k < 3; ++k) {
            Eigen::Vector3d up = u;
            up[k] += h;
            const Evaluation e = evaluate(up);
            if (!e.ok) {
                jac_ok = false;
                break;
            }
            jac.col(k) = (e.residual - current.residual) / h;
        }
        if (!jac_ok || std::abs(jac.determinant()) < 1e-300)
            throw CalibrationError("calibration Jacobian is singular", result.residual_trace);
        const Eigen::Vector3d step = jac.partialPivLu().solve(-current.residual);

        double lambda = 1.0;
        Evaluation next;
        for (int k = 0; k < 30; ++k) {
            next = evaluate(u + lambda * step);
            if (next.ok && next.norm < current.norm) break;
            lambda *= 0.5;
        }
        if (!next.ok || !(next.norm < current.norm)) {
            std::ostringstream os;
            os << "calibration stalled at relative residual " << current.norm;
            throw CalibrationError(os.str(), result.residual_trace);
        }
        u += lambda * step;
        current = next;
    }
    std::ostringstream os;
    os << "calibration did not converge in " << opt.max_iterations << " iterations";
    throw CalibrationError(os.str(), result.residual_trace);
}

double zero_line_height(const FieldModel& field, double z, double half_width) {
    const auto b2 = [&](double y) { return field.b_field({0.0, y, z}).squaredNorm(); };
    // Golden-section search for the |B| minimum on [-w, w].
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = -half_width, hi = half_width;
    double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
    double fc = b2(c), fd = b2(d);
    for (int it = 0; it < 200 && (hi - lo) > 1e-15; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = b2(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = b2(d);
        }
    }
    return 0.5 * (lo + hi);
}

double field_magnitude_gradient(const FieldModel& field, const Eigen::Vector3d& r, double h) {
    Eigen::Vector3d g;
    for (int a = 0; a < 3; ++a) {
        Eigen::Vector3d dr = Eigen::Vector3d::Zero();
        dr[a] = h;
        g[a] = (field.b_field(r + dr).norm() - field.b_field(r - dr).norm()) / (2.0 * h);
    }
    return g.norm();
}

}  // namespace mgtrap::field
