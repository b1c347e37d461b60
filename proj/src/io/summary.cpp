#include "mgtrap/io/summary.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/io/config.hpp"

namespace mgtrap::io {

using nlohmann::json;

namespace {

const char* kAxis[3] = {"x", "y", "z"};

std::string num(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

bool present(const json& j, const char* key) { return j.is_object() && j.contains(key) && !j[key].is_null(); }

double get(const json& j, const char* key) {
    if (!present(j, key) || !j[key].is_number()) throw ConfigError(std::string("malformed report: '") + key + "' is not a number");
    return j[key].get<double>();
}

void axis_lines(std::ostringstream& out, const json& axes) {
    for (const char* a : kAxis) {
        if (!present(axes, a)) {
            out << "axis " << a << ": not measured\n";
            continue;
        }
        const json& ax = axes[a];
        out << "T'_" << a << " = ";
        if (present(ax, "effective_temperature_K")) {
            const double t = get(ax, "effective_temperature_K");
            const double scale = t < 1.0 ? 1e3 : 1.0;
            out << num(t * scale);
            if (present(ax, "effective_temperature_sigma_K"))
                out << " +/- " << num(get(ax, "effective_temperature_sigma_K") * scale, 2);
            out << (t < 1.0 ? " mK" : " K");
        } else {
            out << "not measured";
        }
        out << "\n";
        out << "  n'_" << a << " = " << (present(ax, "phonon_occupation") ? num(get(ax, "phonon_occupation")) : "not measured")
            << "\n";
        if (ax.contains("damping_bound_hz")) {
            out << "  Gamma_" << a << "/2pi <= ";
            if (present(ax, "damping_bound_hz")) out << num(get(ax, "damping_bound_hz"), 2) << " Hz\n";
            else out << "not measured\n";
        }
        if (present(ax, "fit")) {
            const json& f = ax["fit"];
            out << "  fit f0 = " << num(get(f, "f0_hz"), 5) << " +/- " << num(get(f, "sigma_f0_hz"), 2)
                << " Hz, gamma = " << num(get(f, "gamma_hz"), 4) << " +/- " << num(get(f, "sigma_gamma_hz"), 2) << " Hz\n";
        }
    }
}

}  // namespace

std::string summarize_report(const json& report) {
    if (!report.is_object() || !report.contains("schema_version"))
        throw ConfigError("malformed report: no schema_version");
    if (!report["schema_version"].is_number_integer() || report["schema_version"].get<int>() != kSchemaVersion)
        throw ConfigError("report schema_version " + report["schema_version"].dump() + " does not match supported version " +
                          std::to_string(kSchemaVersion));
    std::ostringstream out;
    out << "scenario: " << report.value("scenario", std::string("?")) << "  seed: " << report.value("seed", json(nullptr)).dump()
        << "  config_hash: " << report.value("config_hash", std::string("?")) << "\n";

    out << "axes:\n";
    if (present(report, "axes")) axis_lines(out, report["axes"]);
    else out << "  not measured\n";

    out << "mass: ";
    if (present(report, "mass")) {
        const json& m = report["mass"];
        out << num(get(m, "mass_kg") * 1e15, 4) << " +/- " << num(get(m, "sigma_kg") * 1e15, 2) << " x 1e-15 kg";
        if (!m.value("consistent", true)) out << " (y and z disagree)";
        out << "\n";
    } else {
        out << "not measured\n";
    }

    out << "charge steps: ";
    if (present(report, "charge")) {
        const json& c = report["charge"];
        out << c.value("runs_matching_injected", 0) << " of " << c.value("run_count", 0) << " runs match the injected schedule\n";
        if (c.contains("runs") && c["runs"].is_array())
            for (const auto& r : c["runs"]) {
                out << "  seed " << r.value("seed", json(nullptr)).dump() << ": " << r.value("step_count", 0) << " steps detected, "
                    << r.value("injected_count", 0) << " injected, ";
                if (present(r, "zero_time_s")) out << "zero at " << num(get(r, "zero_time_s"), 4) << " s\n";
                else out << "never reached zero\n";
            }
    } else {
        out << "not measured\n";
    }

    if (present(report, "calibration")) {
        const json& c = report["calibration"];
        if (present(c, "frequencies_hz")) {
            const json& f = c["frequencies_hz"];
            out << "trap frequencies: " << num(get(f, "x"), 5) << ", " << num(get(f, "y"), 5) << ", " << num(get(f, "z"), 5)
                << " Hz\n";
        }
        if (present(c, "equilibrium_m") && c["equilibrium_m"].is_array() && c["equilibrium_m"].size() == 3)
            out << "equilibrium y = " << num(c["equilibrium_m"][1].get<double>() * 1e6, 4) << " um\n";
    }
    if (report.contains("warnings") && report["warnings"].is_array())
        for (const auto& w : report["warnings"]) out << "warning: " << w.get<std::string>() << "\n";
    return out.str();
}

}  // namespace mgtrap::io
