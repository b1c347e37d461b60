#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mgtrap/errors.hpp"
#include "mgtrap/io/config.hpp"
#include "mgtrap/io/scenarios.hpp"
#include "mgtrap/io/summary.hpp"

namespace fs = std::filesystem;
using namespace mgtrap;

namespace {

enum Exit { ok = 0, usage = 1, config = 2, io_failure = 3, physics = 4, fit = 5, integration = 6 };

std::mutex g_print;

void print_error(const std::string& what, const std::vector<std::string>& detail = {}) {
    std::lock_guard lock(g_print);
    std::cerr << "error: " << what << "\n";
    for (const auto& d : detail) std::cerr << "  " << d << "\n";
}

// Maps library exceptions to the documented exit codes.
template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        print_error(e.what(), e.diagnostics.size() > 1 ? e.diagnostics : std::vector<std::string>{});
        return config;
    } catch (const IoError& e) {
        print_error(e.what());
        return io_failure;
    } catch (const FitError& e) {
        print_error(std::string("fit failed: ") + e.what());
        return fit;
    } catch (const IntegrationError& e) {
        print_error(std::string("integration failed: ") + e.what());
        return integration;
    } catch (const Error& e) {
        print_error(e.what());
        return physics;
    } catch (const std::exception& e) {
        print_error(e.what());
        return io_failure;
    }
}

io::Log logger(bool quiet, std::string prefix = {}) {
    if (quiet) return {};
    return [prefix](const std::string& msg) {
        std::lock_guard lock(g_print);
        std::cerr << prefix << msg << "\n";
    };
}

fs::path output_dir(const io::ExperimentConfig& cfg, const std::optional<std::string>& out) {
    if (out) return *out;
    if (cfg.output_dir) return *cfg.output_dir;
    return fs::path("output") / io::scenario_name(cfg.scenario);
}

int run(const std::string& path, const std::optional<std::string>& out, std::optional<std::uint64_t> seed, bool quiet) {
    return guarded([&] {
        const auto cfg = io::load_config(path, seed);
        const auto dir = output_dir(cfg, out);
        auto log = logger(quiet);
        if (log) log("scenario " + io::scenario_name(cfg.scenario) + ", seed " + std::to_string(cfg.seed) + ", config " + cfg.hash);
        const auto result = io::run_scenario(cfg, log);
        result.artifacts.write(dir);
        if (log) log("wrote " + std::to_string(result.artifacts.files().size()) + " files to " + dir.string());
        return int(ok);
    });
}

int validate(const std::string& path, bool quiet) {
    return guarded([&] {
        const auto doc = io::read_json(path);
        const auto diags = io::diagnose(doc);
        for (const auto& d : diags) std::cout << d << "\n";
        if (!diags.empty()) return int(config);
        if (!quiet) std::cout << path << ": ok\n";
        return int(ok);
    });
}

int report(const std::string& path) {
    return guarded([&] {
        const auto doc = io::read_json(path);
        std::cout << io::summarize_report(doc);
        return int(ok);
    });
}

int sweep(const std::vector<std::string>& configs, const std::vector<std::uint64_t>& seeds, const std::string& out,
          unsigned jobs, bool quiet) {
    struct Task {
        std::string config;
        std::optional<std::uint64_t> seed;
        fs::path dir;
    };
    std::vector<Task> tasks;
    for (const auto& c : configs) {
        const auto stem = fs::path(c).stem();
        if (seeds.empty()) tasks.push_back({c, std::nullopt, fs::path(out) / stem / "seed-default"});
        for (auto s : seeds) tasks.push_back({c, s, fs::path(out) / stem / ("seed-" + std::to_string(s))});
    }
    std::vector<int> codes(tasks.size(), ok);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k; (k = next++) < tasks.size();) {
            const auto& t = tasks[k];
            codes[k] = guarded([&] {
                auto cfg = io::load_config(t.config, t.seed);
                const auto result = io::run_scenario(cfg, logger(quiet, "[" + t.dir.string() + "] "));
                result.artifacts.write(t.dir);
                return int(ok);
            });
        }
    };
    if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < std::min<std::size_t>(jobs, tasks.size()); ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    int worst = ok;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        if (!quiet || codes[k] != ok) std::cout << tasks[k].dir.string() << ": exit " << codes[k] << "\n";
        worst = std::max(worst, codes[k]);
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Magneto-gravitational trap simulator"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("--quiet,-q", quiet, "Suppress progress messages");

    std::string config_path;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;

    auto* run_cmd = app.add_subcommand("run", "Run one scenario");
    run_cmd->add_option("--config,-c", config_path, "Configuration file")->required();
    run_cmd->add_option("--out,-o", out, "Output directory");
    run_cmd->add_option("--seed", seed, "Override the configured seed");
    run_cmd->add_flag("--quiet,-q", quiet, "Suppress progress messages");

    auto* validate_cmd = app.add_subcommand("validate", "Check a configuration without running it");
    validate_cmd->add_option("--config,-c", config_path, "Configuration file")->required();
    validate_cmd->add_flag("--quiet,-q", quiet, "Print nothing for a valid file");

    std::string report_path;
    auto* report_cmd = app.add_subcommand("report", "Summarize a report.json");
    report_cmd->add_option("report", report_path, "Report file")->required();

    std::vector<std::string> sweep_configs;
    std::vector<std::uint64_t> sweep_seeds;
    std::string sweep_out = "sweep";
    unsigned jobs = 0;
    auto* sweep_cmd = app.add_subcommand("sweep", "Run configurations and seeds concurrently");
    sweep_cmd->add_option("--config,-c", sweep_configs, "Configuration files")->required();
    sweep_cmd->add_option("--seed", sweep_seeds, "Seeds (each config runs once per seed)");
    sweep_cmd->add_option("--out,-o", sweep_out, "Root output directory");
    sweep_cmd->add_option("--jobs,-j", jobs, "Concurrent runs (default: hardware threads)");
    sweep_cmd->add_flag("--quiet,-q", quiet, "Suppress progress messages");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    if (*run_cmd) return run(config_path, out, seed, quiet);
    if (*validate_cmd) return validate(config_path, quiet);
    if (*report_cmd) return report(report_path);
    return sweep(sweep_configs, sweep_seeds, sweep_out, jobs, quiet);
}
