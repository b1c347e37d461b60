#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mgtrap/constants.hpp"
#include "mgtrap/field/polynomial.hpp"

namespace mgtrap::field {

enum class Parity { cosine, sine };

/// One real regular solid harmonic r^l P_l^m(cos theta) {cos, sin}(m phi) with
/// z as the polar axis, written as an integer polynomial with coprime
/// coefficients. The coefficient carries units of T m^(1 - degree).
struct HarmonicTerm {
    int degree = 2;
    int order = 2;
    Parity parity = Parity::cosine;
    double coefficient = 0.0;
};

inline constexpr int kMaxDegree = 8;

/// The unnormalized harmonic polynomial of a term (coefficient ignored).
/// Examples: (2,2,sin) -> x y, (2,2,cos) -> x^2 - y^2, (3,1,sin) -> y (4 z^2 - x^2 - y^2).
Polynomial harmonic_polynomial(int degree, int order, Parity parity);

std::string describe(const HarmonicTerm& t);

/// Invariant under x -> -x and z -> -z.
bool mirror_symmetric(const HarmonicTerm& t);

struct MultipoleCoefficients {
    std::vector<HarmonicTerm> terms;
};

/// The three retained terms used when nothing else is configured:
/// quadrupole x^2 - y^2, the upward-curving y (4 z^2 - x^2 - y^2) and the
/// sextupole 3 x^2 y - y^3. Coefficients are zero.
MultipoleCoefficients default_term_selection();

/// Physical properties of the levitated sphere. Always constructed through
/// one of the factories so that mass, radius and density stay consistent.
class Particle {
public:
    static Particle from_mass(double mass_kg, double density_kg_m3, double chi, int charge_e = 0);
    static Particle from_radius(double radius_m, double density_kg_m3, double chi, int charge_e = 0);

    /// 3.10e-15 kg silica at 2000 kg/m^3, chi = -1.1e-5, neutral.
    static Particle default_silica();

    double mass() const { return mass_; }
    double radius() const { return radius_; }
    double density() const { return density_; }
    double chi() const { return chi_; }
    int charge_e() const { return charge_e_; }
    double charge() const { return charge_e_ * constants::elementary_charge; }
    double volume() const;

    Particle with_charge(int charge_e) const;

private:
    double mass_ = 0.0;
    double radius_ = 0.0;
    double density_ = 0.0;
    double chi_ = 0.0;
    int charge_e_ = 0;
};

struct TrapFrequencies {
    double fx = 0.0;
    double fy = 0.0;
    double fz = 0.0;

    double operator[](int axis) const { return axis == 0 ? fx : (axis == 1 ? fy : fz); }
    double omega(int axis) const { return constants::two_pi * (*this)[axis]; }
};

/// Magnetostatic scalar potential from a truncated solid-harmonic expansion,
/// with analytic derivatives up to third order. B = -grad(phi).
class FieldModel {
public:
    /// Throws ModelError for invalid terms. With `require_trap_symmetry`
    /// the x/z mirror symmetry and a nonzero degree-2 term are enforced.
    explicit FieldModel(MultipoleCoefficients coefficients, double validity_radius_m = 1e-3,
                        bool require_trap_symmetry = true);

    const MultipoleCoefficients& coefficients() const { return coefficients_; }
    double validity_radius() const { return validity_radius_; }

    double scalar_potential(const Eigen::Vector3d& r) const;
    Eigen::Vector3d b_field(const Eigen::Vector3d& r) const;
    /// J(k, j) = dB_k / dx_j (symmetric, traceless).
    Eigen::Matrix3d b_gradient(const Eigen::Vector3d& r) const;
    /// d^2 B_k / dx_i dx_j, indexed [k](i, j).
    std::array<Eigen::Matrix3d, 3> b_hessian(const Eigen::Vector3d& r) const;

    void check_domain(const Eigen::Vector3d& r) const;

    FieldModel scaled(double factor) const;

private:
    MultipoleCoefficients coefficients_;
    double validity_radius_;
    Polynomial phi_;
    std::array<Polynomial, 3> grad_;
    std::array<Polynomial, 6> hess_;    // xx, xy, xz, yy, yz, zz
    std::array<Polynomial, 10> third_;  // xxx xxy xxz xyy xyz xzz yyy yyz yzz zzz
};

/// Raw evaluation of a term list without any symmetry requirement.
double scalar_potential(const MultipoleCoefficients& c, const Eigen::Vector3d& r,
                        double validity_radius_m = 1e-3);

/// U = -chi |B|^2 V / (2 mu0) + m g y.
double potential_energy(const FieldModel& field, const Particle& p, const Eigen::Vector3d& r,
                        double gravity = constants::gravity);

/// -grad U, analytic.
Eigen::Vector3d force(const FieldModel& field, const Particle& p, const Eigen::Vector3d& r,
                      double gravity = constants::gravity);

Eigen::Matrix3d potential_hessian(const FieldModel& field, const Particle& p,
                                  const Eigen::Vector3d& r);

struct EquilibriumOptions {
    double gradient_tolerance_N = 1e-24;
    int max_iterations = 200;
    int starts = 10;
    double start_spread_m = 2e-6;
    unsigned seed = 20180101u;
    double gravity = constants::gravity;
};

struct Equilibrium {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double residual_force_N = 0.0;
    double start_spread_m = 0.0;  ///< max distance between multi-start solutions
};

/// Minimum of U by damped Newton descent from the field zero and from
/// `starts` perturbed points around the first solution. Throws
/// UnstableTrapError when no minimum is found.
Equilibrium find_equilibrium(const FieldModel& field, const Particle& p,
                             const EquilibriumOptions& opt = {});

struct TrapAnalysis {
    Equilibrium equilibrium;
    Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
    TrapFrequencies frequencies;
    double max_offdiagonal_ratio = 0.0;
};

/// omega_i = sqrt(H_ii / m) at the equilibrium. Throws UnstableTrapError for
/// a non positive-definite Hessian and CalibrationError when the Hessian is
/// not diagonal to 1e-6.
TrapAnalysis analyze_trap(const FieldModel& field, const Particle& p,
                          const EquilibriumOptions& opt = {});

TrapFrequencies trap_frequencies(const FieldModel& field, const Particle& p,
                                 const EquilibriumOptions& opt = {});

}  // namespace mgtrap::field
