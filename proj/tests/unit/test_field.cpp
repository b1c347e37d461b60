#include "doctest.h"

#include <cmath>
#include <random>

#include "mgtrap/errors.hpp"
#include "mgtrap/field/calibration.hpp"
#include "mgtrap/field/field_model.hpp"

using namespace mgtrap;
using namespace mgtrap::field;
using Eigen::Vector3d;

namespace {

const CalibrationResult& default_calibration() {
    static const CalibrationResult r = calibrate_coefficients({59.6, 96.9, 7.01}, Particle::default_silica());
    return r;
}

FieldModel default_field() { return FieldModel(default_calibration().coefficients); }

MultipoleCoefficients degree_two_model(double quad, double axial) {
    return {{{2, 2, Parity::cosine, quad}, {2, 0, Parity::cosine, axial}}};
}

FieldModel make_model(const MultipoleCoefficients& c) { return FieldModel(c); }

MultipoleCoefficients one_term(int l, int m, Parity p) {
    MultipoleCoefficients c;
    c.terms.push_back({l, m, p, 1.0});
    return c;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::vector<Vector3d> random_points(int n, double radius, unsigned seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> d(-radius, radius);
    std::vector<Vector3d> pts;
    for (int i = 0; i < n; ++i) pts.emplace_back(d(g), d(g), d(g));
    return pts;
}

}  // namespace

TEST_CASE("harmonic polynomials have the documented integer form") {
    const Vector3d r(0.3, -0.7, 1.1);
    const double x = r.x(), y = r.y(), z = r.z();
    CHECK(harmonic_polynomial(2, 2, Parity::sine)(r) == doctest::Approx(x * y));
    CHECK(harmonic_polynomial(2, 2, Parity::cosine)(r) == doctest::Approx(x * x - y * y));
    CHECK(harmonic_polynomial(2, 0, Parity::cosine)(r) == doctest::Approx(2 * z * z - x * x - y * y));
    CHECK(harmonic_polynomial(3, 1, Parity::sine)(r) == doctest::Approx(y * (4 * z * z - x * x - y * y)));
    CHECK(harmonic_polynomial(3, 3, Parity::sine)(r) == doctest::Approx(3 * x * x * y - y * y * y));
    CHECK(harmonic_polynomial(1, 0, Parity::cosine)(r) == doctest::Approx(z));
}

TEST_CASE("every solid harmonic up to the maximum degree satisfies Laplace's equation") {
    const auto pts = random_points(5, 1.0, 11);
    for (int l = 1; l <= kMaxDegree; ++l)
        for (int m = 0; m <= l; ++m)
            for (auto par : {Parity::cosine, Parity::sine}) {
                if (m == 0 && par == Parity::sine) continue;
                const auto p = harmonic_polynomial(l, m, par);
                const auto lap = p.derivative(0).derivative(0) + p.derivative(1).derivative(1) +
                                 p.derivative(2).derivative(2);
                for (const auto& r : pts) CHECK(lap(r) == doctest::Approx(0.0).scale(1.0));
                CHECK(p.degree() == l);
            }
}

TEST_CASE("scalar potential of a pure quadrupole vanishes at the origin") {
    CHECK(scalar_potential(degree_two_model(1000.0, 0.0), Vector3d::Zero()) == 0.0);
}

TEST_CASE("single xy-type term evaluates literally") {
    const double k = 1234.5;
    const MultipoleCoefficients c{{{2, 2, Parity::sine, k}}};
    CHECK(scalar_potential(c, Vector3d(1e-5, 1e-5, 0.0)) == doctest::Approx(k * 1e-10).epsilon(1e-12));
    // the trap model refuses it: x y is odd under x -> -x
    CHECK_THROWS_AS(make_model(c), ModelError);
}

TEST_CASE("trap model enforces mirror symmetry and a quadrupole") {
    CHECK_THROWS_AS(make_model(one_term(3, 1, Parity::sine)), ModelError);
    CHECK_THROWS_AS(make_model(one_term(2, 1, Parity::cosine)), ModelError);
    CHECK_NOTHROW(make_model(degree_two_model(1.0, 0.0)));
    auto too_high = degree_two_model(1.0, 0.0);
    too_high.terms.push_back({9, 1, Parity::sine, 1.0});
    CHECK_THROWS_AS(make_model(too_high), ModelError);
}

TEST_CASE("potential is mirror symmetric in x and z, |B| too") {
    const auto f = default_field();
    for (const auto& r : random_points(50, 5e-4, 3)) {
        const Vector3d mx(-r.x(), r.y(), r.z()), mz(r.x(), r.y(), -r.z());
        CHECK(f.scalar_potential(r) == doctest::Approx(f.scalar_potential(mx)).epsilon(1e-12));
        CHECK(f.b_field(r).norm() == doctest::Approx(f.b_field(mx).norm()).epsilon(1e-12));
        CHECK(f.b_field(r).norm() == doctest::Approx(f.b_field(mz).norm()).epsilon(1e-12));
    }
}

TEST_CASE("positions outside the validity radius are domain errors") {
    const auto f = default_field();
    CHECK_THROWS_AS(f.b_field(Vector3d(0, 0, 1.01e-3)), DomainError);
    CHECK_THROWS_AS(scalar_potential(degree_two_model(1, 0), Vector3d(2e-3, 0, 0)), DomainError);
    CHECK_NOTHROW(FieldModel(degree_two_model(1, 0), 5e-3).b_field(Vector3d(2e-3, 0, 0)));
}

TEST_CASE("quadrupole field magnitude grows linearly along rays") {
    const FieldModel f(degree_two_model(800.0, 0.0));
    for (const auto& dir : random_points(10, 1.0, 5)) {
        const Vector3d u = dir.normalized();
        const double b1 = f.b_field(1e-4 * u).norm();
        const double b2 = f.b_field(2e-4 * u).norm();
        const double b3 = f.b_field(3e-4 * u).norm();
        CHECK(b2 == doctest::Approx(2.0 * b1).epsilon(1e-12));
        CHECK(b3 == doctest::Approx(3.0 * b1).epsilon(1e-12));
    }
}

TEST_CASE("B is divergence- and curl-free and the Laplacian of the potential vanishes") {
    const auto f = default_field();
    const double h = 1e-7;
    for (const auto& r : random_points(100, 5e-4, 17)) {
        Eigen::Matrix3d jac;
        for (int j = 0; j < 3; ++j) {
            Vector3d e = Vector3d::Zero();
            e[j] = h;
            jac.col(j) = (f.b_field(r + e) - f.b_field(r - e)) / (2 * h);
        }
        const double scale = jac.cwiseAbs().maxCoeff();
        CHECK(std::abs(jac.trace()) / scale < 1e-6);
        CHECK(std::abs(jac(0, 1) - jac(1, 0)) / scale < 1e-6);
        CHECK(std::abs(jac(0, 2) - jac(2, 0)) / scale < 1e-6);
        CHECK(std::abs(jac(1, 2) - jac(2, 1)) / scale < 1e-6);
        // analytic gradient agrees with the finite difference
        CHECK((f.b_gradient(r) - jac).cwiseAbs().maxCoeff() / scale < 1e-6);

        const double hp = 1e-5;
        double lap = 0.0, mag = 0.0;
        for (int j = 0; j < 3; ++j) {
            Vector3d e = Vector3d::Zero();
            e[j] = hp;
            const double d2 = f.scalar_potential(r + e) - 2 * f.scalar_potential(r) + f.scalar_potential(r - e);
            lap += d2;
            mag = std::max(mag, std::abs(f.scalar_potential(r + e) - f.scalar_potential(r - e)));
        }
        CHECK(std::abs(lap) / mag < 1e-6);
    }
}

TEST_CASE("B is minus the gradient of the scalar potential") {
    const auto f = default_field();
    const double h = 1e-7;
    for (const auto& r : random_points(20, 5e-4, 23)) {
        Vector3d g;
        for (int j = 0; j < 3; ++j) {
            Vector3d e = Vector3d::Zero();
            e[j] = h;
            g[j] = (f.scalar_potential(r + e) - f.scalar_potential(r - e)) / (2 * h);
        }
        CHECK((f.b_field(r) + g).norm() / f.b_field(r).norm() < 1e-6);
    }
}

TEST_CASE("potential energy examples") {
    const FieldModel zero(degree_two_model(0.0, 0.0), 1e-3, false);
    const auto p = Particle::default_silica();
    CHECK(potential_energy(zero, p, Vector3d::Zero()) == 0.0);
    CHECK(potential_energy(zero, p, Vector3d(0, 1e-3, 0)) == doctest::Approx(3.10e-15 * 9.80665 * 1e-3));
    CHECK(potential_energy(zero, p, Vector3d(0, 1e-3, 0)) == doctest::Approx(3.04e-20).epsilon(5e-3));
    const Vector3d f = force(zero, p, Vector3d(1e-4, 2e-4, 3e-4));
    CHECK(f.x() == 0.0);
    CHECK(f.z() == 0.0);
    CHECK(f.y() == doctest::Approx(-3.10e-15 * 9.80665));
}

TEST_CASE("diamagnetic energy increases with |B|^2") {
    const auto p = Particle::default_silica();
    const Vector3d r(1e-5, 2e-5, 3e-5);
    double last = -1e300;
    for (double k : {100.0, 200.0, 400.0, 800.0}) {
        const double u = potential_energy(FieldModel(degree_two_model(k, 0.0)), p, r, 0.0);
        CHECK(u > last);
        last = u;
    }
}

TEST_CASE("force is the negative gradient of the potential energy") {
    const auto f = default_field();
    const auto p = Particle::default_silica();
    for (const auto& r : random_points(50, 4e-4, 29)) {
        const double h = 1e-8;
        Vector3d g;
        for (int j = 0; j < 3; ++j) {
            Vector3d e = Vector3d::Zero();
            e[j] = h;
            g[j] = -(potential_energy(f, p, r + e) - potential_energy(f, p, r - e)) / (2 * h);
        }
        const Vector3d a = force(f, p, r);
        CHECK((a - g).norm() / a.norm() < 1e-6);
    }
}

TEST_CASE("potential Hessian matches finite differences of the force") {
    const auto f = default_field();
    const auto p = Particle::default_silica();
    for (const auto& r : random_points(10, 3e-4, 31)) {
        const Eigen::Matrix3d h = potential_hessian(f, p, r);
        const double step = 1e-8;
        for (int j = 0; j < 3; ++j) {
            Vector3d e = Vector3d::Zero();
            e[j] = step;
            const Vector3d col = -(force(f, p, r + e) - force(f, p, r - e)) / (2 * step);
            CHECK((h.col(j) - col).norm() / h.norm() < 1e-6);
        }
    }
}

TEST_CASE("calibrated model hits the target frequencies") {
    const auto& c = default_calibration();
    CHECK(rel(c.trap.frequencies.fx, 59.6) < 1e-3);
    CHECK(rel(c.trap.frequencies.fy, 96.9) < 1e-3);
    CHECK(rel(c.trap.frequencies.fz, 7.01) < 1e-3);
    CHECK(c.coefficients.terms.size() == 3);
    CHECK(c.iterations <= 60);
    CHECK_FALSE(c.residual_trace.empty());
}

TEST_CASE("equilibrium sits below the field zero on the symmetry plane") {
    const auto& c = default_calibration();
    const auto& eq = c.trap.equilibrium;
    CHECK(std::abs(eq.position.x()) < 1e-12);
    CHECK(std::abs(eq.position.z()) < 1e-12);
    CHECK(eq.position.y() < 0.0);
    CHECK(force(default_field(), Particle::default_silica(), eq.position).norm() < 1e-22);
    CHECK(c.trap.max_offdiagonal_ratio < 1e-6);
}

TEST_CASE("equilibrium is reproduced from ten random starts") {
    EquilibriumOptions opt;
    opt.starts = 10;
    opt.start_spread_m = 5e-6;
    const auto eq = find_equilibrium(default_field(), Particle::default_silica(), opt);
    CHECK(eq.start_spread_m < 1e-9);
}

TEST_CASE("without gravity the equilibrium is the field zero at the origin") {
    EquilibriumOptions opt;
    opt.gravity = 0.0;
    const auto eq = find_equilibrium(default_field(), Particle::default_silica(), opt);
    CHECK(eq.position.norm() < 1e-12);
    CHECK(default_field().b_field(eq.position).norm() < 1e-12);
}

TEST_CASE("Hessian frequencies scale exactly with coefficients when the curvature is purely magnetic") {
    const auto p = Particle::default_silica();
    const FieldModel base(degree_two_model(1500.0, 400.0));
    const auto f1 = trap_frequencies(base, p);
    const auto f2 = trap_frequencies(base.scaled(2.0), p);
    for (int a = 0; a < 3; ++a) CHECK(f2[a] == doctest::Approx(2.0 * f1[a]).epsilon(1e-9));
}

TEST_CASE("gravity sag breaks naive frequency scaling of the calibrated model") {
    const auto p = Particle::default_silica();
    const auto f1 = trap_frequencies(default_field(), p);
    const auto f2 = trap_frequencies(default_field().scaled(2.0), p);
    for (int a = 0; a < 3; ++a) {
        CHECK(f2[a] > f1[a]);
        CHECK(f2[a] < 2.0 * f1[a]);
    }
}

TEST_CASE("pure quadrupole trap is unstable along z") {
    CHECK_THROWS_AS(trap_frequencies(FieldModel(degree_two_model(1000.0, 0.0)), Particle::default_silica()),
                    UnstableTrapError);
}

TEST_CASE("calibration round trip recovers coefficients") {
    auto coeffs = default_calibration().coefficients;
    coeffs.terms[0].coefficient *= 1.08;
    coeffs.terms[1].coefficient *= 0.93;
    coeffs.terms[2].coefficient *= 1.05;
    const auto p = Particle::default_silica();
    const auto target = trap_frequencies(FieldModel(coeffs), p);
    const auto again = calibrate_coefficients(target, p);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(rel(again.coefficients.terms[i].coefficient, coeffs.terms[i].coefficient) < 1e-3);
}

TEST_CASE("calibration is deterministic") {
    const auto a = calibrate_coefficients({59.6, 96.9, 7.01}, Particle::default_silica());
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(a.coefficients.terms[i].coefficient == default_calibration().coefficients.terms[i].coefficient);
}

TEST_CASE("calibration rejects bad requests") {
    const auto p = Particle::default_silica();
    CHECK_THROWS_AS(calibrate_coefficients({-1.0, 96.9, 7.01}, p), ModelError);
    CHECK_THROWS_AS(calibrate_coefficients({59.6, 96.9, 7.01}, Particle::from_mass(3.1e-15, 2000, 1e-5)), ModelError);
    CalibrationOptions opt;
    opt.max_iterations = 1;
    CHECK_THROWS_AS(calibrate_coefficients({59.6, 96.9, 7.01}, p, default_term_selection(), opt), CalibrationError);
}

TEST_CASE("zero-field line curves upward away from the trap centre") {
    const auto f = default_field();
    const double y0 = zero_line_height(f, 0.0);
    const double y1 = zero_line_height(f, 1e-4);
    const double y2 = zero_line_height(f, 2e-4);
    CHECK(std::abs(y0) < 1e-9);
    CHECK(y1 > y0);
    CHECK(y2 > y1);
    CHECK(y2 - y1 > y1 - y0);
    // symmetric in z
    CHECK(zero_line_height(f, -2e-4) == doctest::Approx(y2).epsilon(1e-6));
}

TEST_CASE("field gradient near the centre is of order 1e4 T/m") {
    const auto f = default_field();
    const double g = field_magnitude_gradient(f, default_calibration().trap.equilibrium.position);
    CHECK(g > 1e4 / 5.0);
    CHECK(g < 1e4 * 5.0);
}

TEST_CASE("particle factories are consistent") {
    const auto a = Particle::from_radius(0.718e-6, 2000.0, -1.1e-5);
    CHECK(a.mass() == doctest::Approx(2000.0 * 4.0 / 3.0 * M_PI * std::pow(0.718e-6, 3)));
    const auto b = Particle::from_mass(a.mass(), 2000.0, -1.1e-5);
    CHECK(b.radius() == doctest::Approx(0.718e-6).epsilon(1e-12));
    CHECK(Particle::default_silica().radius() == doctest::Approx(0.718e-6).epsilon(2e-3));
    CHECK(a.with_charge(-3).charge() == doctest::Approx(-3 * 1.602177e-19));
    CHECK_THROWS_AS(Particle::from_mass(-1.0, 2000.0, -1e-5), ModelError);
}
