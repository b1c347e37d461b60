#include "mgtrap/analysis/steps.hpp"

#include <algorithm>
#include <cmath>

#include "mgtrap/errors.hpp"

namespace mgtrap::analysis {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

double mean(const std::vector<double>& u, std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += u[i];
    return s / static_cast<double>(b - a);
}

}  // namespace

StepReport detect_charge_steps(std::span<const double> r, double fs, const StepDetectionConfig& cfg) {
    if (!(cfg.time_constant_s > 0.0) || !(fs > 0.0)) throw DomainError("time constant and sample rate must be positive");
    if (!(cfg.threshold > 0.0)) throw DomainError("step threshold must be positive");

    // Decimate to 20 samples per time constant.
    const auto block = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fs * cfg.time_constant_s / 20.0)));
    const double dt = static_cast<double>(block) / fs;
    std::vector<double> u;
    for (std::size_t i = 0; i + block <= r.size(); i += block) {
        double s = 0.0;
        for (std::size_t j = 0; j < block; ++j) s += r[i + j];
        u.push_back(s / static_cast<double>(block));
    }
    const double tau_samples = cfg.time_constant_s / dt;
    const auto w = static_cast<std::size_t>(std::ceil(cfg.min_dwell_time_constants * tau_samples));
    const auto settle = static_cast<std::size_t>(std::ceil(cfg.settle_time_constants * tau_samples));
    const auto guard = static_cast<std::size_t>(std::ceil(cfg.guard_time_constants * tau_samples));
    if (u.size() < settle + 2 * w + 1) throw DomainError("amplitude record too short for step detection");

    StepReport rep;
    // Robust noise scale from differences at a lag of one window.
    std::vector<double> diffs;
    for (std::size_t i = settle + w; i < u.size(); ++i) diffs.push_back(std::abs(u[i] - u[i - w]));
    const double sigma = 1.4826 * median(diffs) / std::sqrt(2.0);
    rep.noise_sigma = sigma;
    const double mean_sd = sigma * std::sqrt(2.0 * cfg.time_constant_s / (static_cast<double>(w) * dt));
    const double diff_sd = std::max(std::sqrt(2.0) * mean_sd, 1e-300);

    std::vector<double> tstat(u.size(), 0.0);
    std::vector<double> prefix(u.size() + 1, 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) prefix[i + 1] = prefix[i] + u[i];
    const std::size_t first = settle + w;
    const std::size_t last = u.size() - w;  // exclusive
    for (std::size_t k = first; k < last; ++k) {
        const double left = (prefix[k] - prefix[k - w]) / static_cast<double>(w);
        const double right = (prefix[k + w] - prefix[k]) / static_cast<double>(w);
        tstat[k] = (right - left) / diff_sd;
    }

    // Greedy peak picking, strongest first. A step's statistic stays high for a
    // window plus the lock-in transition on either side.
    std::vector<std::size_t> order;
    for (std::size_t k = first; k < last; ++k)
        if (std::abs(tstat[k]) >= cfg.ambiguous_fraction * cfg.threshold) order.push_back(k);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(tstat[a]) > std::abs(tstat[b]); });
    std::vector<std::size_t> accepted, weak;
    const auto far = [&](std::size_t k, const std::vector<std::size_t>& v, std::size_t gap) {
        return std::all_of(v.begin(), v.end(), [&](std::size_t j) { return (k > j ? k - j : j - k) >= gap; });
    };
    // The exponential tail of a strong step can lift the statistic past the
    // weak level for a few more time constants.
    const double weak_level = cfg.ambiguous_fraction * cfg.threshold;
    const auto clear_of_tails = [&](std::size_t k) {
        return std::all_of(accepted.begin(), accepted.end(), [&](std::size_t j) {
            const double reach = std::max(static_cast<double>(guard),
                                          tau_samples * (std::log(std::abs(tstat[j]) / weak_level) + 1.0));
            return static_cast<double>(k > j ? k - j : j - k) >= static_cast<double>(w) + reach;
        });
    };
    for (std::size_t k : order) {
        if (!far(k, accepted, w + guard) || !far(k, weak, w)) continue;
        if (std::abs(tstat[k]) >= cfg.threshold) accepted.push_back(k);
        else if (clear_of_tails(k)) weak.push_back(k);
    }
    std::sort(accepted.begin(), accepted.end());
    for (std::size_t k : weak) rep.ambiguous_times.push_back((static_cast<double>(k) + 0.5) * dt);

    // Levels between changepoints, skipping the lock-in transition around each.
    std::vector<double> levels;
    std::size_t start = settle;
    for (std::size_t s = 0; s <= accepted.size(); ++s) {
        const std::size_t stop = s < accepted.size() ? accepted[s] : u.size();
        std::size_t a = s == 0 ? start : start + guard;
        std::size_t b = s < accepted.size() ? (stop > guard ? stop - guard : 0) : stop;
        if (b <= a) {
            const std::size_t mid = (start + stop) / 2;
            a = mid > 0 ? mid - 1 : mid;
            b = std::min(mid + 1, u.size());
        }
        levels.push_back(mean(u, a, b));
        start = stop;
    }

    std::vector<double> sizes;
    for (std::size_t s = 0; s < accepted.size(); ++s) sizes.push_back(std::abs(levels[s + 1] - levels[s]));
    rep.quantum = cfg.quantum ? *cfg.quantum : median(sizes);
    rep.initial_level = levels.front();
    rep.final_level = levels.back();
    for (std::size_t s = 0; s < accepted.size(); ++s) {
        ChargeStep st;
        st.t = (static_cast<double>(accepted[s]) + 0.5) * dt;
        st.level_before = levels[s];
        st.level_after = levels[s + 1];
        st.t_statistic = tstat[accepted[s]];
        st.electrons = rep.quantum > 0.0 ? sizes[s] / rep.quantum : 0.0;
        if (rep.quantum > 0.0 && std::abs(st.electrons - 1.0) > 0.5) rep.ambiguous_times.push_back(st.t);
        rep.steps.push_back(st);
    }
    std::sort(rep.ambiguous_times.begin(), rep.ambiguous_times.end());
    if (rep.quantum > 0.0) {
        for (std::size_t s = 0; s < levels.size(); ++s) {
            if (levels[s] < 0.5 * rep.quantum) {
                rep.zero_time = s == 0 ? 0.0 : rep.steps[s - 1].t;
                break;
            }
        }
        rep.reached_zero = rep.final_level < 0.5 * rep.quantum;
    }
    return rep;
}

}  // namespace mgtrap::analysis
