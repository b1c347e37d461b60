#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace mgtrap::field {

struct Monomial {
    std::array<int, 3> exponent{};  // powers of x, y, z
    double coefficient = 0.0;
};

/// Real polynomial in (x, y, z) stored as a list of distinct monomials.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(std::vector<Monomial> terms);

    const std::vector<Monomial>& terms() const { return terms_; }
    int degree() const;
    bool empty() const { return terms_.empty(); }

    double operator()(const Eigen::Vector3d& r) const;

    Polynomial derivative(int axis) const;
    Polynomial scaled(double factor) const;

    Polynomial& operator+=(const Polynomial& other);
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }

private:
    void normalize();
    std::vector<Monomial> terms_;
};

}  // namespace mgtrap::field
