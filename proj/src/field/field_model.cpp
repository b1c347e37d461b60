#include "mgtrap/field/field_model.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "mgtrap/errors.hpp"

namespace mgtrap::field {

// --- Particle ---------------------------------------------------------------

namespace {

void check_material(double density, double chi) {
    if (!(density > 0.0) || !std::isfinite(density)) throw ModelError("particle density must be positive");
    if (!std::isfinite(chi)) throw ModelError("particle susceptibility must be finite");
}

}  // namespace

Particle Particle::from_mass(double mass_kg, double density_kg_m3, double chi, int charge_e) {
    if (!(mass_kg > 0.0) || !std::isfinite(mass_kg)) throw ModelError("particle mass must be positive");
    check_material(density_kg_m3, chi);
    Particle p;
    p.mass_ = mass_kg;
    p.density_ = density_kg_m3;
    p.radius_ = std::cbrt(3.0 * mass_kg / (4.0 * std::numbers::pi * density_kg_m3));
    p.chi_ = chi;
    p.charge_e_ = charge_e;
    return p;
}

Particle Particle::from_radius(double radius_m, double density_kg_m3, double chi, int charge_e) {
    if (!(radius_m > 0.0) || !std::isfinite(radius_m)) throw ModelError("particle radius must be positive");
    check_material(density_kg_m3, chi);
    Particle p;
    p.radius_ = radius_m;
    p.density_ = density_kg_m3;
    p.mass_ = density_kg_m3 * 4.0 / 3.0 * std::numbers::pi * radius_m * radius_m * radius_m;
    p.chi_ = chi;
    p.charge_e_ = charge_e;
    return p;
}

Particle Particle::default_silica() { return from_mass(3.10e-15, 2000.0, -1.1e-5, 0); }

double Particle::volume() const { return mass_ / density_; }

Particle Particle::with_charge(int charge_e) const {
    Particle p = *this;
    p.charge_e_ = charge_e;
    return p;
}

// --- FieldModel -------------------------------------------------------------

namespace {

constexpr std::array<std::array<int, 2>, 6> kPairs{{{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}}};
constexpr std::array<std::array<int, 3>, 10> kTriples{
    {{0, 0, 0}, {0, 0, 1}, {0, 0, 2}, {0, 1, 1}, {0, 1, 2}, {0, 2, 2}, {1, 1, 1}, {1, 1, 2}, {1, 2, 2}, {2, 2, 2}}};

int pair_index(int i, int j) {
    if (i > j) std::swap(i, j);
    for (int k = 0; k < 6; ++k)
        if (kPairs[k][0] == i && kPairs[k][1] == j) return k;
    return -1;
}

int triple_index(int i, int j, int k) {
    std::array<int, 3> s{i, j, k};
    std::sort(s.begin(), s.end());
    for (int n = 0; n < 10; ++n)
        if (kTriples[n] == s) return n;
    return -1;
}

Polynomial assemble(const MultipoleCoefficients& c) {
    Polynomial phi;
    for (const auto& t : c.terms) {
        if (!std::isfinite(t.coefficient)) throw ModelError("non-finite multipole coefficient " + describe(t));
        phi += harmonic_polynomial(t.degree, t.order, t.parity).scaled(t.coefficient);
    }
    return phi;
}

}  // namespace

FieldModel::FieldModel(MultipoleCoefficients coefficients, double validity_radius_m,
                       bool require_trap_symmetry)
    : coefficients_(std::move(coefficients)), validity_radius_(validity_radius_m) {
    if (!(validity_radius_ > 0.0)) throw ModelError("validity radius must be positive");
    if (coefficients_.terms.empty()) throw ModelError("field model needs at least one multipole term");
    if (require_trap_symmetry) {
        bool has_quadrupole = false;
        for (const auto& t : coefficients_.terms) {
            if (!mirror_symmetric(t))
                throw ModelError("term " + describe(t) + " is not invariant under x->-x and z->-z");
            if (t.degree == 2 && t.coefficient != 0.0) has_quadrupole = true;
        }
        if (!has_quadrupole) throw ModelError("field model needs a nonzero degree-2 term");
    }
    phi_ = assemble(coefficients_);
    for (int a = 0; a < 3; ++a) grad_[a] = phi_.derivative(a);
    for (int k = 0; k < 6; ++k) hess_[k] = grad_[kPairs[k][0]].derivative(kPairs[k][1]);
    for (int n = 0; n < 10; ++n) {
        const auto& t = kTriples[n];
        third_[n] = hess_[pair_index(t[0], t[1])].derivative(t[2]);
    }
}

void FieldModel::check_domain(const Eigen::Vector3d& r) const {
    if (!r.allFinite() || r.norm() > validity_radius_) {
        std::ostringstream os;
        os << "position (" << r.x() << ", " << r.y() << ", " << r.z() << ") m outside validity radius "
           << validity_radius_ << " m";
        throw DomainError(os.str());
    }
}

double FieldModel::scalar_potential(const Eigen::Vector3d& r) const {
    check_domain(r);
    return phi_(r);
}

Eigen::Vector3d FieldModel::b_field(const Eigen::Vector3d& r) const {
    check_domain(r);
    return {-grad_[0](r), -grad_[1](r), -grad_[2](r)};
}

Eigen::Matrix3d FieldModel::b_gradient(const Eigen::Vector3d& r) const {
    check_domain(r);
    Eigen::Matrix3d j;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) j(a, b) = -hess_[pair_index(a, b)](r);
    return j;
}

std::array<Eigen::Matrix3d, 3> FieldModel::b_hessian(const Eigen::Vector3d& r) const {
    check_domain(r);
    std::array<double, 10> values;
    for (int n = 0; n < 10; ++n) values[n] = third_[n](r);
    std::array<Eigen::Matrix3d, 3> out;
    for (int k = 0; k < 3; ++k)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) out[k](i, j) = -values[triple_index(k, i, j)];
    return out;
}

FieldModel FieldModel::scaled(double factor) const {
    MultipoleCoefficients c = coefficients_;
    for (auto& t : c.terms) t.coefficient *= factor;
    return FieldModel(std::move(c), validity_radius_, false);
}

double scalar_potential(const MultipoleCoefficients& c, const Eigen::Vector3d& r, double validity_radius_m) {
    return FieldModel(c, validity_radius_m, false).scalar_potential(r);
}

// --- Energy, force, Hessian -------------------------------------------------

namespace {

// -chi V / (2 mu0), positive for diamagnets.
double magnetic_prefactor(const Particle& p) { return -p.chi() * p.volume() / (2.0 * constants::mu0); }

}  // namespace

double potential_energy(const FieldModel& field, const Particle& p, const Eigen::Vector3d& r, double gravity) {
    const Eigen::Vector3d b = field.b_field(r);
    return magnetic_prefactor(p) * b.squaredNorm() + p.mass() * gravity * r.y();
}

Eigen::Vector3d force(const FieldModel& field, const Particle& p, const Eigen::Vector3d& r, double gravity) {
    const Eigen::Vector3d b = field.b_field(r);
    const Eigen::Matrix3d j = field.b_gradient(r);
    Eigen::Vector3d grad_u = 2.0 * magnetic_prefactor(p) * (j.transpose() * b);
    grad_u.y() += p.mass() * gravity;
    return -grad_u;
}

Eigen::Matrix3d potential_hessian(const FieldModel& field, const Particle& p, const Eigen::Vector3d& r) {
    const Eigen::Vector3d b = field.b_field(r);
    const Eigen::Matrix3d j = field.b_gradient(r);
    const auto hb = field.b_hessian(r);
    Eigen::Matrix3d h = j.transpose() * j;
    for (int k = 0; k < 3; ++k) h += b[k] * hb[k];
    return 2.0 * magnetic_prefactor(p) * h;
}

// --- Equilibrium ------------------------------------------------------------

namespace {

struct Descent {
    Eigen::Vector3d position;
    double residual;
    bool converged;
};

Descent damped_newton(const FieldModel& field, const Particle& p, Eigen::Vector3d r,
                      const EquilibriumOptions& opt) {
    const double g = opt.gravity;
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Eigen::Vector3d f = force(field, p, r, g);
        if (f.norm() < opt.gradient_tolerance_N) return {r, f.norm(), true};
        const Eigen::Matrix3d h = potential_hessian(field, p, r);
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(h);
        Eigen::Vector3d step;
        if (eig.eigenvalues().minCoeff() > 0.0) {
            step = h.ldlt().solve(f);
        } else {
            // Not convex here: move along the force, scaled by the largest curvature.
            const double scale = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-30);
            step = f / scale;
        }
        const double u0 = potential_energy(field, p, r, g);
        double lambda = 1.0;
        Eigen::Vector3d next = r + step;
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            next = r + lambda * step;
            if (next.norm() <= field.validity_radius() &&
                (potential_energy(field, p, next, g) <= u0 ||
                 force(field, p, next, g).norm() < f.norm())) {
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) return {r, f.norm(), false};
        if ((next - r).norm() == 0.0) {
            const double res = force(field, p, next, g).norm();
            return {next, res, res < opt.gradient_tolerance_N};
        }
        r = next;
    }
    return {r, force(field, p, r, g).norm(), false};
}

}  // namespace

Equilibrium find_equilibrium(const FieldModel& field, const Particle& p, const EquilibriumOptions& opt) {
    Descent first = damped_newton(field, p, Eigen::Vector3d::Zero(), opt);
    if (!first.converged) {
        std::ostringstream os;
        os << "no potential minimum found (residual force " << first.residual << " N)";
        throw UnstableTrapError(os.str());
    }

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> offset(-opt.start_spread_m, opt.start_spread_m);
    Descent best = first;
    double best_u = potential_energy(field, p, first.position, opt.gravity);
    std::vector<Eigen::Vector3d> solutions{first.position};
    for (int s = 0; s < opt.starts; ++s) {
        const Eigen::Vector3d start = first.position + Eigen::Vector3d(offset(rng), offset(rng), offset(rng));
        Descent d = damped_newton(field, p, start, opt);
        if (!d.converged) continue;
        solutions.push_back(d.position);
        const double u = potential_energy(field, p, d.position, opt.gravity);
        if (u < best_u) {
            best = d;
            best_u = u;
        }
    }
    Equilibrium eq;
    eq.position = best.position;
    eq.residual_force_N = best.residual;
    for (const auto& s : solutions) eq.start_spread_m = std::max(eq.start_spread_m, (s - best.position).norm());
    return eq;
}

TrapAnalysis analyze_trap(const FieldModel& field, const Particle& p, const EquilibriumOptions& opt) {
    TrapAnalysis out;
    out.equilibrium = find_equilibrium(field, p, opt);
    out.hessian = potential_hessian(field, p, out.equilibrium.position);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(out.hessian);
    if (eig.eigenvalues().minCoeff() <= 0.0) {
        std::ostringstream os;
        os << "Hessian at equilibrium is not positive definite (min eigenvalue "
           << eig.eigenvalues().minCoeff() << " N/m)";
        throw UnstableTrapError(os.str());
    }
    const Eigen::Vector3d diag = out.hessian.diagonal();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j)
                out.max_offdiagonal_ratio = std::max(
                    out.max_offdiagonal_ratio, std::abs(out.hessian(i, j)) / std::sqrt(diag[i] * diag[j]));
    if (out.max_offdiagonal_ratio > 1e-6) {
        std::ostringstream os;
        os << "Hessian at equilibrium is not diagonal in (x, y, z): off-diagonal ratio "
           << out.max_offdiagonal_ratio;
        throw CalibrationError(os.str());
    }
    const auto f = [&](int i) { return std::sqrt(diag[i] / p.mass()) / constants::two_pi; };
    out.frequencies = {f(0), f(1), f(2)};
    return out;
}

TrapFrequencies trap_frequencies(const FieldModel& field, const Particle& p, const EquilibriumOptions& opt) {
    return analyze_trap(field, p, opt).frequencies;
}

}  // namespace mgtrap::field
