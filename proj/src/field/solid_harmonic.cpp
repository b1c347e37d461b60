#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/field/field_model.hpp"

namespace mgtrap::field {
namespace {

using Exponent = std::array<int, 3>;
using IntPoly = std::map<Exponent, std::int64_t>;

std::int64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    std::int64_t r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

IntPoly multiply(const IntPoly& a, const IntPoly& b) {
    IntPoly out;
    for (const auto& [ea, ca] : a)
        for (const auto& [eb, cb] : b)
            out[{ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]}] += ca * cb;
    std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
    return out;
}

IntPoly r_squared_power(int k) {
    IntPoly out{{{0, 0, 0}, 1}};
    const IntPoly r2{{{2, 0, 0}, 1}, {{0, 2, 0}, 1}, {{0, 0, 2}, 1}};
    for (int i = 0; i < k; ++i) out = multiply(out, r2);
    return out;
}

// Re or Im of (x + i y)^m.
IntPoly complex_power(int m, Parity parity) {
    IntPoly out;
    for (int j = 0; j <= m; ++j) {
        const bool imaginary = (j % 2) == 1;
        if (imaginary != (parity == Parity::sine)) continue;
        // i^j = (-1)^(j/2) for even j, i (-1)^((j-1)/2) for odd j
        const std::int64_t sign = ((j / 2) % 2 == 0) ? 1 : -1;
        out[{m - j, j, 0}] += sign * binomial(m, j);
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0; });
    return out;
}

}  // namespace

Polynomial harmonic_polynomial(int degree, int order, Parity parity) {
    if (degree < 1 || degree > kMaxDegree)
        throw ModelError("solid harmonic degree must be in [1, " + std::to_string(kMaxDegree) + "]");
    if (order < 0 || order > degree) throw ModelError("solid harmonic order must be in [0, degree]");
    if (order == 0 && parity == Parity::sine) throw ModelError("order-0 solid harmonic has no sine part");

    // 2^l P_l(u) = sum_k (-1)^k C(l,k) C(2l-2k,l) u^(l-2k); differentiate m times.
    IntPoly axial;
    for (int k = 0; 2 * k <= degree; ++k) {
        const int n = degree - 2 * k;
        if (n < order) continue;
        std::int64_t c = ((k % 2) ? -1 : 1) * binomial(degree, k) * binomial(2 * degree - 2 * k, degree);
        for (int i = 0; i < order; ++i) c *= (n - i);
        // u^(n-m) r^(l-n) with u = z / r, scaled by r^(l-m)
        const IntPoly zpow{{{0, 0, n - order}, c}};
        for (const auto& [e, v] : multiply(zpow, r_squared_power(k))) axial[e] += v;
    }
    std::erase_if(axial, [](const auto& kv) { return kv.second == 0; });
    IntPoly full = multiply(axial, complex_power(order, parity));

    std::int64_t g = 0;
    for (const auto& [e, c] : full) g = std::gcd(g, c < 0 ? -c : c);

    std::vector<std::pair<Exponent, std::int64_t>> ordered(full.begin(), full.end());
    std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
        const auto& ea = a.first;
        const auto& eb = b.first;
        if (ea[2] != eb[2]) return ea[2] > eb[2];
        if (ea[0] != eb[0]) return ea[0] > eb[0];
        return ea[1] > eb[1];
    });
    const std::int64_t sign = (!ordered.empty() && ordered.front().second < 0) ? -1 : 1;

    std::vector<Monomial> terms;
    for (const auto& [e, c] : ordered) terms.push_back({e, static_cast<double>(sign * c / g)});
    return Polynomial(std::move(terms));
}

std::string describe(const HarmonicTerm& t) {
    std::ostringstream os;
    os << "(" << t.degree << "," << t.order << "," << (t.parity == Parity::cosine ? "cos" : "sin") << ")";
    return os.str();
}

bool mirror_symmetric(const HarmonicTerm& t) {
    // z -> -z: P_l^m has parity (-1)^(l+m). x -> -x: phi -> pi - phi.
    const bool z_even = (t.degree + t.order) % 2 == 0;
    const bool x_even = (t.parity == Parity::cosine) ? (t.order % 2 == 0) : (t.order % 2 == 1);
    return z_even && x_even;
}

MultipoleCoefficients default_term_selection() {
    return MultipoleCoefficients{{
        {2, 2, Parity::cosine, 0.0},
        {3, 1, Parity::sine, 0.0},
        {3, 3, Parity::sine, 0.0},
    }};
}

}  // namespace mgtrap::field
