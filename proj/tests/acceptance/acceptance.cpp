// Acceptance checks. Each criterion prints one "criterion N: PASS|FAIL" line.
#include <cmath>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mgtrap/analysis/fit.hpp"
#include "mgtrap/analysis/thermo.hpp"
#include "mgtrap/constants.hpp"
#include "mgtrap/dynamics/environment.hpp"
#include "mgtrap/errors.hpp"
#include "mgtrap/io/config.hpp"
#include "mgtrap/io/scenarios.hpp"

using namespace mgtrap;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(MGTRAP_SOURCE_DIR) / "configs";
constexpr double two_pi = 2.0 * 3.141592653589793;

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [failed]");
    }
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// Round to n significant figures.
double round_sig(double v, int n) {
    if (v == 0.0) return 0.0;
    const double scale = std::pow(10.0, n - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
    return std::round(v * scale) / scale;
}

bool same_sig(double value, double quoted, int n) {
    return std::abs(round_sig(value, n) - quoted) <= 1e-9 * std::abs(quoted);
}

io::ScenarioResult run(const fs::path& path) {
    const auto cfg = io::load_config(path);
    std::cerr << "running " << path.filename().string() << "\n";
    return io::run_scenario(cfg, [](const std::string& m) { std::cerr << "  " << m << "\n"; });
}

void occupation(Outcome& o) {
    const double ny = analysis::phonon_occupation(1.2e-3, two_pi * 96.5);
    const double nz = analysis::phonon_occupation(0.6e-3, two_pi * 6.7);
    o.require(same_sig(ny, 2.5e5, 2), "n_y = " + fmt(ny) + " (quoted 2.5e5)");
    o.require(same_sig(nz, 1.9e6, 2), "n_z = " + fmt(nz) + " (quoted 1.9e6)");
}

void bounds(Outcome& o) {
    const double by = analysis::damping_bound(1.2e-3, 295.0, two_pi * 7.0) / two_pi;
    const double bz = analysis::damping_bound(0.6e-3, 295.0, two_pi * 1.5) / two_pi;
    o.require(same_sig(by, 3e-5, 1), "Gamma_y/2pi <= " + fmt(by) + " Hz (quoted 3e-5)");
    o.require(same_sig(bz, 3e-6, 1), "Gamma_z/2pi <= " + fmt(bz) + " Hz (quoted 3e-6)");
}

void epstein(Outcome& o) {
    dynamics::Environment env;
    env.temperature_K = 295.0;
    env.pressure_Pa = 2.0e-10 * constants::torr;
    const double g = dynamics::damping_from_pressure(env, field::Particle::default_silica()) / two_pi;
    o.require(g >= 1e-8 && g <= 4e-8, "Gamma/2pi = " + fmt(g) + " Hz (quoted 2e-8)");
}

void field_calibration(Outcome& o) {
    const auto r = run(kConfigs / "calibrate-field.json").report;
    const auto& cal = r.at("calibration");
    const std::map<std::string, double> targets{{"x", 59.6}, {"y", 96.9}, {"z", 7.01}};
    for (const auto& [a, f] : targets) {
        const double got = cal.at("frequencies_hz").at(a).get<double>();
        o.require(std::abs(got / f - 1.0) < 1e-3, "f_" + a + " = " + fmt(got, 8) + " Hz");
    }
    const auto eq = cal.at("equilibrium_m");
    const double x = eq[0].get<double>(), y = eq[1].get<double>(), z = eq[2].get<double>();
    o.require(std::abs(x) < 1e-12 && std::abs(z) < 1e-12, "equilibrium x, z = " + fmt(x, 2) + ", " + fmt(z, 2) + " m");
    o.require(y < 0.0, "equilibrium y = " + fmt(y) + " m");
    for (const auto& [a, f] : targets) {
        const double rel = cal.at("simulation_check").at(a).at("relative_difference").get<double>();
        o.require(std::abs(rel) < 5e-3, "simulated/Hessian " + a + " differ by " + fmt(rel, 2));
    }
}

void mass_closure(Outcome& o) {
    const auto r = run(kConfigs / "acceptance" / "calibrate-mass.json").report;
    const double m = r.at("mass").at("mass_kg").get<double>();
    const double truth = r.at("mass_kg").get<double>();
    const double duration = io::load_config(kConfigs / "acceptance" / "calibrate-mass.json").sim.duration_s;
    o.require(std::abs(truth / 3.10e-15 - 1.0) < 1e-12, "configured mass " + fmt(truth));
    o.require(duration >= 600.0, "simulated " + fmt(duration) + " s per axis");
    o.require(std::abs(m / truth - 1.0) <= 0.02, "recovered " + fmt(m) + " kg (" + fmt(100 * (m / truth - 1), 2) + "%)");
}

void cooling_axis(Outcome& o, const std::string& file, const std::string& axis) {
    const auto r = run(kConfigs / "acceptance" / file).report;
    const auto& ax = r.at("axes").at(axis);
    const double T = r.at("bath_temperature_K").get<double>();
    const double gamma = r.at("natural_damping_rate_rad_per_s").get<double>();
    const double predicted = ax.at("predicted").at("damping_rate_rad_per_s").get<double>();
    const double fitted = two_pi * ax.at("fit").at("gamma_hz").get<double>();
    const double t_eff = ax.at("effective_temperature_K").get<double>();
    const double closure = (t_eff / T) / (gamma / fitted);
    o.require(r.at("ensemble_seeds").size() >= 10, axis + ": " + std::to_string(r.at("ensemble_seeds").size()) + " seeds");
    o.require(std::abs(predicted / two_pi - 1.0) < 0.05, axis + ": Gamma'/2pi set to " + fmt(predicted / two_pi) + " Hz");
    o.require(std::abs(fitted / predicted - 1.0) <= 0.05, axis + ": fitted/(Gamma + g_eff) = " + fmt(fitted / predicted));
    o.require(std::abs(closure - 1.0) <= 0.10, axis + ": (T'/T)/(Gamma/Gamma') = " + fmt(closure));
}

void cooling(Outcome& o) {
    cooling_axis(o, "cool-y.json", "y");
    cooling_axis(o, "cool-z.json", "z");
}

// Welch-averaged damped-oscillator spectra: K averaged periodograms give a
// gamma(K, 1/K) multiplicative scatter per bin.
void fit_coverage(Outcome& o) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uf(5.0, 200.0), ug(0.2, 10.0), ua(-3.0, 3.0), ur(0.05, 0.2);
    std::uniform_int_distribution<int> uk(8, 64);
    const int trials = 100;
    int covered = 0, failed = 0;
    for (int k = 0; k < trials; ++k) {
        const double f0 = uf(rng), g = ug(rng), a = std::pow(10.0, ua(rng));
        const double df = ur(rng) * g;
        const int segments = uk(rng);
        std::gamma_distribution<double> scatter(segments, 1.0 / segments);
        analysis::PsdEstimate est;
        est.resolution_hz = df;
        est.segments = static_cast<std::size_t>(segments);
        for (double f = df; f <= f0 + 20 * g; f += df) {
            est.f.push_back(f);
            est.psd.push_back(analysis::dho_psd(f, a, f0, g) * scatter(rng));
        }
        try {
            const auto fit = analysis::fit_psd(est, {std::max(df, f0 - 10 * g), f0 + 10 * g});
            if (std::abs(fit.f0 - f0) <= 3 * fit.sigma_f0() && std::abs(fit.gamma - g) <= 3 * fit.sigma_gamma())
                ++covered;
        } catch (const FitError&) {
            ++failed;
        }
    }
    o.require(covered >= 95, std::to_string(covered) + "/" + std::to_string(trials) + " within 3 sigma, " +
                                 std::to_string(failed) + " fits failed");
}

void staircase(Outcome& o) {
    const auto r = run(kConfigs / "acceptance" / "charge-sim.json").report;
    const auto& runs = r.at("charge").at("runs");
    int good = 0, exact = 0;
    for (const auto& run : runs) {
        if (run.at("injected_count").get<int>() != 5) continue;
        if (run.at("step_count").get<int>() == 5 && run.at("reached_zero").get<bool>()) ++good;
        if (run.at("matches_injected").get<bool>()) ++exact;
    }
    const int n = static_cast<int>(runs.size());
    o.require(n >= 50, std::to_string(n) + " seeds");
    o.require(r.at("charge").at("initial_e").get<int>() == 5, "5 electrons injected");
    o.require(good * 100 >= 95 * n, std::to_string(good) + "/" + std::to_string(n) + " with 5 steps ending at zero (" +
                                       std::to_string(exact) + " with no ambiguous candidates)");
}

void determinism(Outcome& o) {
    std::vector<fs::path> files;
    for (const auto& dir : {kConfigs, kConfigs / "acceptance"})
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& path : files) {
        auto doc = io::read_json(path);
        auto& sim = doc["simulation"];
        const std::string scenario = doc.at("scenario").get<std::string>();
        const double full = sim.value("duration_s", 60.0);
        sim["duration_s"] = std::min(full, scenario == "calibrate-field" ? 1.0 : 20.0);
        sim["ensemble_size"] = std::min(sim.value("ensemble_size", 1), 2);
        const auto cfg = io::parse_config(doc);
        const auto a = io::run_scenario(cfg);
        const auto b = io::run_scenario(cfg);
        const std::string name = fs::relative(path, kConfigs).string();
        o.require(a.artifacts.files() == b.artifacts.files(),
                  name + " (" + std::to_string(a.artifacts.names().size()) + " files)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    std::vector<int> which;
    app.add_option("--criterion,-c", which, "Criterion numbers (default: all)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);
    if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    const std::map<int, std::function<void(Outcome&)>> checks{
        {1, occupation}, {2, bounds},    {3, epstein},   {4, field_calibration}, {5, mass_closure},
        {6, cooling},    {7, fit_coverage}, {8, staircase}, {9, determinism}};

    bool all = true;
    for (int n : which) {
        Outcome o;
        try {
            checks.at(n)(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("threw: ") + e.what());
        }
        std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail.str() << std::endl;
        all = all && o.pass;
    }
    return all ? 0 : 1;
}
