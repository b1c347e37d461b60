#include "mgtrap/field/polynomial.hpp"

#include <algorithm>
#include <map>

namespace mgtrap::field {

Polynomial::Polynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) { normalize(); }

void Polynomial::normalize() {
    std::map<std::array<int, 3>, double> merged;
    for (const auto& t : terms_) merged[t.exponent] += t.coefficient;
    terms_.clear();
    for (const auto& [e, c] : merged)
        if (c != 0.0) terms_.push_back({e, c});
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& t : terms_) d = std::max(d, t.exponent[0] + t.exponent[1] + t.exponent[2]);
    return d;
}

double Polynomial::operator()(const Eigen::Vector3d& r) const {
    // Powers up to degree 8 cover every term the field model generates.
    constexpr int kMaxPow = 9;
    std::array<std::array<double, kMaxPow>, 3> pw{};
    const int deg = std::min(degree(), kMaxPow - 1);
    for (int a = 0; a < 3; ++a) {
        pw[a][0] = 1.0;
        for (int k = 1; k <= deg; ++k) pw[a][k] = pw[a][k - 1] * r[a];
    }
    double sum = 0.0;
    for (const auto& t : terms_)
        sum += t.coefficient * pw[0][t.exponent[0]] * pw[1][t.exponent[1]] * pw[2][t.exponent[2]];
    return sum;
}

Polynomial Polynomial::derivative(int axis) const {
    std::vector<Monomial> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
        if (t.exponent[axis] == 0) continue;
        Monomial m = t;
        m.coefficient *= t.exponent[axis];
        m.exponent[axis] -= 1;
        out.push_back(m);
    }
    return Polynomial(std::move(out));
}

Polynomial Polynomial::scaled(double factor) const {
    std::vector<Monomial> out = terms_;
    for (auto& t : out) t.coefficient *= factor;
    return Polynomial(std::move(out));
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
    terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
    normalize();
    return *this;
}

}  // namespace mgtrap::field
