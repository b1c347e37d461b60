#include "mgtrap/io/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include "mgtrap/analysis/band.hpp"
#include "mgtrap/analysis/fit.hpp"
#include "mgtrap/analysis/mass.hpp"
#include "mgtrap/analysis/psd.hpp"
#include "mgtrap/analysis/steps.hpp"
#include "mgtrap/analysis/thermo.hpp"
#include "mgtrap/constants.hpp"
#include "mgtrap/control/lockin.hpp"
#include "mgtrap/errors.hpp"
#include "mgtrap/field/calibration.hpp"

namespace mgtrap::io {

using nlohmann::json;
using constants::two_pi;

namespace {

const char* kAxis[3] = {"x", "y", "z"};

json vec(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

json describe_terms(const field::MultipoleCoefficients& c) {
    json terms = json::array();
    for (const auto& t : c.terms)
        terms.push_back({{"term", field::describe(t)},
                         {"degree", t.degree},
                         {"order", t.order},
                         {"parity", t.parity == field::Parity::sine ? "sine" : "cosine"},
                         {"coefficient_T_m_pow_1_minus_degree", t.coefficient}});
    return terms;
}

std::shared_ptr<const field::FieldModel> build_field(const ExperimentConfig& c, json* calibration) {
    field::MultipoleCoefficients coeffs = c.field.terms;
    int iterations = 0;
    std::vector<double> trace;
    if (c.field.calibrate) {
        field::CalibrationOptions opt;
        opt.validity_radius_m = c.field.validity_radius_m;
        opt.equilibrium.gravity = c.sim.gravity;
        auto r = field::calibrate_coefficients(c.target_frequencies, c.sim.particle, c.field.terms, opt);
        coeffs = r.coefficients;
        iterations = r.iterations;
        trace = r.residual_trace;
    }
    auto model = std::make_shared<const field::FieldModel>(coeffs, c.field.validity_radius_m);
    if (calibration) {
        field::EquilibriumOptions eo;
        eo.gravity = c.sim.gravity;
        const auto trap = field::analyze_trap(*model, c.sim.particle, eo);
        (*calibration) = {
            {"calibrated", c.field.calibrate},
            {"iterations", iterations},
            {"residual_trace", trace},
            {"terms", describe_terms(coeffs)},
            {"target_frequencies_hz", {{"x", c.target_frequencies.fx}, {"y", c.target_frequencies.fy}, {"z", c.target_frequencies.fz}}},
            {"frequencies_hz", {{"x", trap.frequencies.fx}, {"y", trap.frequencies.fy}, {"z", trap.frequencies.fz}}},
            {"equilibrium_m", vec(trap.equilibrium.position)},
            {"equilibrium_residual_force_N", trap.equilibrium.residual_force_N},
            {"multistart_spread_m", trap.equilibrium.start_spread_m},
            {"hessian_offdiagonal_ratio", trap.max_offdiagonal_ratio},
            {"field_magnitude_gradient_T_per_m", field::field_magnitude_gradient(*model, trap.equilibrium.position)},
        };
    }
    return model;
}

// Runs members in batches so only one batch of full trajectories is held.
void run_members(const dynamics::SimulationConfig& sim, const std::vector<std::uint64_t>& seeds,
                 const dynamics::HookFactory& hook, const std::function<void(std::size_t, dynamics::Trajectory&)>& sink,
                 const Log& log, std::size_t batch = 8) {
    for (std::size_t first = 0; first < seeds.size(); first += batch) {
        const std::size_t last = std::min(seeds.size(), first + batch);
        std::vector<std::uint64_t> chunk(seeds.begin() + static_cast<std::ptrdiff_t>(first),
                                         seeds.begin() + static_cast<std::ptrdiff_t>(last));
        if (log) log("simulating members " + std::to_string(first + 1) + "-" + std::to_string(last) + " of " +
                     std::to_string(seeds.size()));
        auto runs = dynamics::simulate_ensemble(sim, chunk, hook);
        for (std::size_t k = 0; k < runs.size(); ++k) sink(first + k, runs[k]);
    }
}

std::size_t settle_index(double settle_s, double sample_period) {
    return static_cast<std::size_t>(std::ceil(settle_s / sample_period - 1e-9));
}

double variance(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size());
}

// Per-axis statistics pooled over ensemble members.
struct AxisPool {
    bool keep_samples = false;
    std::vector<double> samples;
    double variance_sum = 0.0;
    double band_sum = 0.0;
    std::size_t members = 0;
    analysis::PsdEstimate psd;

    void add(std::span<const double> x, double fs, std::size_t segment, std::optional<std::pair<double, double>> band) {
        variance_sum += variance(x);
        if (band) band_sum += analysis::mean_square_from_band(x, fs, band->first, band->second);
        auto p = analysis::welch_psd(x, fs, segment);
        if (members == 0) psd = std::move(p);
        else
            for (std::size_t i = 0; i < psd.psd.size(); ++i) psd.psd[i] += p.psd[i];
        if (keep_samples) samples.insert(samples.end(), x.begin(), x.end());
        ++members;
    }

    void finish() {
        for (auto& v : psd.psd) v /= static_cast<double>(members);
        psd.segments *= members;
    }

    double mean_square() const { return variance_sum / static_cast<double>(members); }
    double band_mean_square() const { return band_sum / static_cast<double>(members); }
};

double psd_peak(const analysis::PsdEstimate& p) {
    std::size_t best = 1;
    for (std::size_t i = 1; i < p.psd.size(); ++i)
        if (p.psd[i] > p.psd[best]) best = i;
    return p.f[best];
}

json fit_json(const analysis::PsdFit& f) {
    return {{"amplitude", f.amplitude},
            {"f0_hz", f.f0},
            {"gamma_hz", f.gamma},
            {"sigma_amplitude", f.sigma_amplitude()},
            {"sigma_f0_hz", f.sigma_f0()},
            {"sigma_gamma_hz", f.sigma_gamma()},
            {"reduced_chi_square", f.reduced_chi_square},
            {"bins", f.bins},
            {"iterations", f.iterations},
            {"gamma_at_bound", f.gamma_at_bound},
            {"rejected_spur_bins_hz", f.rejected_hz}};
}

// Relative standard error of A pi / (2 gamma f0^2) from the fit covariance.
double mean_square_relative_sigma(const analysis::PsdFit& f) {
    const Eigen::Vector3d g(1.0 / f.amplitude, -2.0 / f.f0, -1.0 / f.gamma);
    return std::sqrt(std::max(0.0, g.dot(f.covariance * g)));
}

json axis_mass_json(const analysis::AxisMass& a) {
    return {{"mass_kg", a.mass}, {"sigma_kg", a.sigma}, {"mean_square_m2", a.variance}, {"samples", a.samples}};
}

json mass_json(const analysis::MassEstimate& m) {
    return {{"mass_kg", m.mass},
            {"sigma_kg", m.sigma},
            {"consistent", m.consistent},
            {"method", m.method},
            {"y", axis_mass_json(m.y)},
            {"z", axis_mass_json(m.z)}};
}

json header(const ExperimentConfig& c) {
    return {{"schema_version", kSchemaVersion},
            {"scenario", scenario_name(c.scenario)},
            {"seed", c.seed},
            {"config_hash", c.hash}};
}

struct Run {
    const ExperimentConfig& c;
    const Log& log;
    dynamics::SimulationConfig sim;
    field::TrapFrequencies freqs;
    std::vector<std::uint64_t> seeds;
    json report;
    json warnings = json::array();
    ArtifactSet files;
    double gamma = 0.0;  // natural damping rate, rad/s

    Run(const ExperimentConfig& cfg, const Log& l) : c(cfg), log(l), report(header(cfg)) {
        json calibration;
        sim = c.sim;
        sim.config_hash = c.hash;
        if (c.scenario == Scenario::calibrate_field) sim.mode = dynamics::TrapMode::field;
        if (sim.mode == dynamics::TrapMode::field || c.scenario == Scenario::calibrate_field) {
            if (log) log("building field model");
            sim.field = build_field(c, &calibration);
            report["calibration"] = calibration;
        } else {
            report["calibration"] = nullptr;
        }
        freqs = dynamics::resolve_frequencies(sim);
        gamma = dynamics::resolve_damping(sim);
        seeds = member_seeds(c);
        report["trap_frequencies_hz"] = {{"x", freqs.fx}, {"y", freqs.fy}, {"z", freqs.fz}};
        report["natural_damping_rate_rad_per_s"] = gamma;
        report["bath_temperature_K"] = sim.environment.temperature_K;
        report["mass_kg"] = sim.particle.mass();
        report["ensemble_seeds"] = seeds;
    }

    ScenarioResult finish() {
        report["warnings"] = warnings;
        for (const char* key : {"axes", "mass", "charge"})
            if (!report.contains(key)) report[key] = nullptr;
        json meta = header(c);
        meta["ensemble_seeds"] = seeds;
        meta["dt_s"] = sim.dt_s;
        meta["duration_s"] = sim.duration_s;
        meta["sample_period_s"] = sim.sample_period_s;
        auto names = files.names();
        names.push_back("report.json");
        names.push_back("meta.json");
        meta["artifacts"] = names;
        meta["config"] = c.document;
        meta["generator"] = "mgtrap 1.0";
        files.add("report.json", json_text(report));
        files.add("meta.json", json_text(meta));
        return ScenarioResult{report, meta, files};
    }

    void thermal(bool with_mass) {
        const double fs = 1.0 / sim.sample_period_s;
        const std::size_t skip = settle_index(c.analysis.settle_s.value_or(0.0), sim.sample_period_s);
        std::array<AxisPool, 3> pools;
        pools[1].keep_samples = pools[2].keep_samples = true;
        std::size_t segment = 0;
        run_members(sim, seeds, {}, [&](std::size_t k, dynamics::Trajectory& tr) {
            if (tr.size() <= skip + 16) throw DomainError("record too short after the settle time");
            const std::size_t n = tr.size() - skip;
            if (segment == 0) segment = analysis::segment_length_for(fs, std::max(gamma / two_pi, 1e-9), n);
            if (k == 0) files.add("trajectory.csv", trajectory_csv(tr, c.hash, c.seed));
            for (int a = 0; a < 3; ++a)
                pools[a].add(std::span<const double>(tr.position[a]).subspan(skip), fs, segment, std::nullopt);
        }, log);
        json axes;
        const double m = sim.particle.mass();
        const double T = sim.environment.temperature_K;
        for (int a = 0; a < 3; ++a) {
            auto& p = pools[a];
            p.finish();
            files.add(std::string("psd_") + kAxis[a] + ".csv", psd_csv(p.psd, c.hash, c.seed));
            const double w = freqs.omega(a);
            const double ms = p.mean_square();
            const double t_eff = analysis::effective_temperature(m, w, ms);
            json ax = {{"frequency_hz", freqs[a]},
                       {"mean_square_m2", ms},
                       {"effective_temperature_K", t_eff},
                       {"phonon_occupation", analysis::phonon_occupation(t_eff, w)},
                       {"psd_peak_hz", psd_peak(p.psd)},
                       {"psd_integral_m2", p.psd.integral()}};
            if (p.keep_samples) {
                const auto h = analysis::mass_from_square_histogram(p.samples, freqs[a], T, c.analysis.histogram_bins);
                ax["histogram_mean_square_m2"] = h.variance;
            }
            axes[kAxis[a]] = ax;
        }
        report["axes"] = axes;
        if (with_mass) {
            if (log) log("extracting mass");
            auto est = analysis::extract_mass(pools[1].samples, pools[2].samples, freqs.fy, freqs.fz, T, c.analysis.mass_blocks);
            auto hist = analysis::extract_mass_histogram(pools[1].samples, pools[2].samples, freqs.fy, freqs.fz, T,
                                                         c.analysis.histogram_bins);
            json mj = mass_json(est);
            mj["histogram"] = mass_json(hist);
            mj["configured_mass_kg"] = m;
            report["mass"] = mj;
            if (!est.consistent) warnings.push_back("y and z mass estimates disagree by more than 3 sigma");
        }
    }

    void cool() {
        const auto ctrl = resolved_controller(c, sim);
        const double m = sim.particle.mass();
        const double T = sim.environment.temperature_K;
        const double fs = 1.0 / sim.sample_period_s;

        std::array<std::optional<control::LoopEffect>, 3> effect;
        json controller = {{"sample_rate_hz", ctrl.sample_rate_hz},
                           {"latency_samples", ctrl.latency_samples},
                           {"actuator_direction", vec(ctrl.actuator_direction)},
                           {"force_offset_N", ctrl.force_offset_N}};
        double slowest = 0.0;
        for (int a = 0; a < 3; ++a) {
            if (!ctrl.axes[a]) continue;
            effect[a] = control::loop_effect(ctrl, c.detector, a, m, freqs[a]);
            const double total = gamma + effect[a]->damping_rate;
            if (!(total > 0.0))
                warnings.push_back(std::string("feedback on ") + kAxis[a] + " is anti-damping at the configured phase");
            slowest = slowest == 0.0 ? total : std::min(slowest, total);
            controller["axes"][kAxis[a]] = {{"center_hz", ctrl.axes[a]->center_hz},
                                            {"bandwidth_hz", ctrl.axes[a]->bandwidth_hz},
                                            {"phase_deg", ctrl.axes[a]->phase_deg},
                                            {"gain_N_per_V", ctrl.axes[a]->gain_N_per_V}};
        }
        report["controller"] = controller;
        if (!(slowest > 0.0)) throw ModelError("feedback does not damp any axis; check phase_deg and gain");

        // Energy falls from the bath value to the cooled one at rate Gamma'.
        const double ratio = gamma > 0.0 ? slowest / gamma : 1e12;
        const double settle = c.analysis.settle_s.value_or((std::log(std::max(ratio, 1.0)) + 5.0) / slowest);
        const std::size_t skip = settle_index(settle, sim.sample_period_s);
        report["settle_s"] = settle;

        auto record = std::make_shared<control::ChannelRecord>();
        record->decimation = static_cast<std::size_t>(std::llround(sim.sample_period_s * ctrl.sample_rate_hz));
        const auto det = c.detector;
        const auto first_seed = seeds.front();
        dynamics::HookFactory hook = [det, ctrl, record, first_seed](std::uint64_t seed) {
            return std::make_unique<control::FeedbackLoop>(det, ctrl, seed, seed == first_seed ? record : nullptr);
        };

        std::array<AxisPool, 3> pools;
        std::array<std::optional<std::pair<double, double>>, 3> bands;
        std::size_t length = 0;
        std::array<std::size_t, 3> segment{};
        run_members(sim, seeds, hook, [&](std::size_t k, dynamics::Trajectory& tr) {
            if (tr.meta.guard_tripped)
                throw IntegrationError("amplitude guard tripped at t = " + format_double(tr.meta.stop_time_s) + " s");
            if (tr.size() <= skip + 16) throw DomainError("record too short after the settle time");
            if (length == 0) {
                length = tr.size() - skip;
                for (int a = 0; a < 3; ++a) {
                    double width = gamma / two_pi;
                    if (effect[a]) {
                        width = (gamma + effect[a]->damping_rate) / two_pi;
                        const double f = effect[a]->frequency_hz;
                        const double half = c.analysis.band_half_width_linewidths * width;
                        bands[a] = std::make_pair(std::max(f - half, 0.5 * f / c.analysis.band_half_width_linewidths),
                                                  std::min(f + half, 0.45 * fs));
                    }
                    segment[a] = analysis::segment_length_for(fs, std::max(width, 1e-9), length);
                }
            }
            if (k == 0) files.add("trajectory.csv", trajectory_csv(tr, c.hash, c.seed));
            for (int a = 0; a < 3; ++a)
                pools[a].add(std::span<const double>(tr.position[a]).subspan(skip), fs, segment[a], bands[a]);
        }, log);

        files.add("channels.csv", csv_table(c.hash, c.seed, {"t_s", "vx_V", "vy_V", "vz_V"},
                                            {&record->t, &record->volts[0], &record->volts[1], &record->volts[2]}));
        if (record->clamped_samples)
            warnings.push_back("actuator command clamped in " + std::to_string(record->clamped_samples) + " samples");
        if (record->saturated_samples)
            warnings.push_back("detector saturated in " + std::to_string(record->saturated_samples) + " samples");

        json axes;
        for (int a = 0; a < 3; ++a) {
            auto& p = pools[a];
            p.finish();
            files.add(std::string("psd_") + kAxis[a] + ".csv", psd_csv(p.psd, c.hash, c.seed));
            json ax = {{"frequency_hz", freqs[a]}, {"mean_square_m2", p.mean_square()}};
            if (!effect[a]) {
                const double t_eff = analysis::effective_temperature(m, freqs.omega(a), p.mean_square());
                ax["effective_temperature_K"] = t_eff;
                ax["cooled"] = false;
                axes[kAxis[a]] = ax;
                continue;
            }
            if (log) log(std::string("fitting ") + kAxis[a]);
            const auto& e = *effect[a];
            const double rate = gamma + e.damping_rate;
            const double width = rate / two_pi;
            const double excess = sim.excess_force_psd / (4.0 * m * constants::boltzmann * rate);
            ax["cooled"] = true;
            ax["predicted"] = {{"feedback_damping_rate_rad_per_s", e.damping_rate},
                               {"damping_rate_rad_per_s", rate},
                               {"linewidth_hz", width},
                               {"frequency_hz", e.frequency_hz},
                               {"effective_temperature_K", T * gamma / rate + excess}};
            const double half = c.analysis.fit_half_width_linewidths * width;
            const analysis::FitBand band{std::max(e.frequency_hz - half, p.psd.resolution_hz), std::min(e.frequency_hz + half, 0.5 * fs)};
            analysis::FitOptions fo;
            fo.f0_guess = e.frequency_hz;
            fo.gamma_guess = width;
            fo.spur_ratio = 10.0;
            const auto fit = analysis::fit_psd(p.psd, band, fo);
            if (fit.gamma_at_bound) warnings.push_back(std::string("fitted width on ") + kAxis[a] + " sits at its bound");
            const double wf = two_pi * fit.f0;
            const double ms = fit.mean_square();
            const double t_eff = analysis::effective_temperature(m, wf, ms);
            const double t_band = analysis::effective_temperature(m, wf, p.band_mean_square());
            ax["fit"] = fit_json(fit);
            ax["fit_band_hz"] = {band.low_hz, band.high_hz};
            ax["mean_square_fit_m2"] = ms;
            ax["mean_square_band_m2"] = p.band_mean_square();
            ax["band_hz"] = {bands[a]->first, bands[a]->second};
            ax["effective_temperature_K"] = t_eff;
            ax["effective_temperature_sigma_K"] = t_eff * mean_square_relative_sigma(fit);
            ax["effective_temperature_band_K"] = t_band;
            ax["phonon_occupation"] = analysis::phonon_occupation(t_eff, wf);
            if (t_eff <= T) {
                const double bound = analysis::damping_bound(t_eff, T, two_pi * fit.gamma);
                ax["damping_bound_rad_per_s"] = bound;
                ax["damping_bound_hz"] = bound / two_pi;
            } else {
                ax["damping_bound_rad_per_s"] = nullptr;
                ax["damping_bound_hz"] = nullptr;
                warnings.push_back(std::string("axis ") + kAxis[a] + " is hotter than the bath; no damping bound");
            }
            axes[kAxis[a]] = ax;
        }
        report["axes"] = axes;
    }

    void charge() {
        const auto& ch = *c.charge;
        const auto& drive = *sim.drive;
        const double fs_ctrl = c.controller ? c.controller->sample_rate_hz : c.detector.sample_rate_hz;
        control::ControllerConfig ctrl;
        if (c.controller) ctrl = resolved_controller(c, sim);
        else ctrl.sample_rate_hz = fs_ctrl;
        int axis = 0;
        drive.axis.cwiseAbs().maxCoeff(&axis);

        json injected_all = json::array();
        json runs = json::array();
        std::size_t matched = 0;
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const auto seed = seeds[k];
            auto s = sim;
            s.particle = s.particle.with_charge(ch.initial_e);
            s.charge_events = charge_schedule(ch, seed);
            if (ch.poisson) s.duration_s = (s.charge_events.empty() ? 0.0 : s.charge_events.back().t) + ch.poisson->tail_s;
            if (k == 0) report["duration_s"] = s.duration_s;
            auto record = std::make_shared<control::ChannelRecord>();
            record->decimation = static_cast<std::size_t>(std::llround(sim.sample_period_s * fs_ctrl));
            const auto det = c.detector;
            dynamics::HookFactory hook = [det, ctrl, record](std::uint64_t sd) {
                return std::make_unique<control::FeedbackLoop>(det, ctrl, sd, record);
            };
            if (log) log("simulating charge run " + std::to_string(k + 1) + " of " + std::to_string(seeds.size()));
            auto tr = dynamics::simulate(s, seed, hook);
            if (tr.meta.guard_tripped)
                throw IntegrationError("amplitude guard tripped at t = " + format_double(tr.meta.stop_time_s) + " s");
            if (record->clamped_samples)
                warnings.push_back("seed " + std::to_string(seed) + ": actuator command clamped in " +
                                   std::to_string(record->clamped_samples) + " samples");
            if (record->saturated_samples)
                warnings.push_back("seed " + std::to_string(seed) + ": detector saturated in " +
                                   std::to_string(record->saturated_samples) + " samples");

            std::vector<double> signal(record->volts[axis].size());
            for (std::size_t i = 0; i < signal.size(); ++i) signal[i] = record->volts[axis][i] / c.detector.volts_per_meter[axis];
            const double fs = 1.0 / sim.sample_period_s;
            const auto li = control::lock_in(signal, fs, {drive.frequency_hz, c.analysis.lockin_time_constant_s},
                                             record->t.empty() ? 0.0 : record->t.front());
            analysis::StepDetectionConfig sc;
            sc.time_constant_s = c.analysis.lockin_time_constant_s;
            sc.threshold = c.analysis.step_threshold;
            sc.min_dwell_time_constants = c.analysis.min_dwell_time_constants;
            const auto rep = analysis::detect_charge_steps(li.r, li.sample_rate_hz, sc);

            json injected = json::array();
            for (const auto& e : s.charge_events) injected.push_back({{"t_s", e.t}, {"charge_e", e.charge_e}});
            json steps = json::array();
            for (const auto& st : rep.steps)
                steps.push_back({{"t_s", st.t},
                                 {"level_before_m", st.level_before},
                                 {"level_after_m", st.level_after},
                                 {"t_statistic", st.t_statistic},
                                 {"electrons", st.electrons}});
            const bool match = rep.steps.size() == s.charge_events.size() && !rep.ambiguous() &&
                               rep.reached_zero == (s.charge_events.empty() ? ch.initial_e == 0
                                                                             : s.charge_events.back().charge_e == 0);
            matched += match ? 1 : 0;
            runs.push_back({{"seed", seed},
                            {"duration_s", s.duration_s},
                            {"injected", injected},
                            {"injected_count", s.charge_events.size()},
                            {"steps", steps},
                            {"step_count", rep.steps.size()},
                            {"quantum_m", rep.quantum},
                            {"initial_level_m", rep.initial_level},
                            {"final_level_m", rep.final_level},
                            {"reached_zero", rep.reached_zero},
                            {"zero_time_s", rep.zero_time ? json(*rep.zero_time) : json(nullptr)},
                            {"ambiguous_times_s", rep.ambiguous_times},
                            {"noise_sigma_m", rep.noise_sigma},
                            {"matches_injected", match}});
            if (k == 0) {
                files.add("trajectory.csv", trajectory_csv(tr, c.hash, c.seed));
                files.add("channels.csv", csv_table(c.hash, c.seed, {"t_s", "vx_V", "vy_V", "vz_V"},
                                                    {&record->t, &record->volts[0], &record->volts[1], &record->volts[2]}));
                files.add("lockin.csv", csv_table(c.hash, c.seed, {"t_s", "x_m", "y_m", "r_m", "phase_rad"},
                                                  {&li.t, &li.x, &li.y, &li.r, &li.phase_rad}));
                const std::size_t n = tr.size();
                const std::size_t seg = analysis::segment_length_for(fs, std::max(gamma / two_pi, 1e-9), n);
                for (int a = 0; a < 3; ++a)
                    files.add(std::string("psd_") + kAxis[a] + ".csv",
                              psd_csv(analysis::welch_psd(tr.position[a], fs, seg), c.hash, c.seed));
            }
        }
        const double w = freqs.omega(axis);
        const double wd = two_pi * drive.frequency_hz;
        const double quantum = constants::elementary_charge * drive.field_amplitude_V_per_m * std::abs(drive.axis[axis]) /
                               (sim.particle.mass() * std::abs(w * w - wd * wd));
        report["charge"] = {{"initial_e", ch.initial_e},
                            {"readout_axis", kAxis[axis]},
                            {"drive_frequency_hz", drive.frequency_hz},
                            {"lockin_time_constant_s", c.analysis.lockin_time_constant_s},
                            {"predicted_quantum_m", quantum},
                            {"runs", runs},
                            {"runs_matching_injected", matched},
                            {"run_count", seeds.size()}};
    }

    void calibrate_field() {
        // Small noiseless oscillation about equilibrium, compared with the Hessian.
        auto s = sim;
        s.mode = dynamics::TrapMode::field;
        s.damping_rate = 0.0;
        s.environment.temperature_K = 0.0;
        s.initial = dynamics::InitialCondition::explicit_state;
        if (s.initial_state.position.isZero()) s.initial_state.position = Eigen::Vector3d(0.5e-6, 0.5e-6, 0.5e-6);
        if (log) log("simulating small oscillation");
        const auto tr = dynamics::simulate(s, seeds.front());
        files.add("trajectory.csv", trajectory_csv(tr, c.hash, c.seed));
        const double fs = 1.0 / s.sample_period_s;
        const std::size_t seg = analysis::segment_length_for(fs, 1.0 / s.duration_s, tr.size());
        for (int a = 0; a < 3; ++a)
            files.add(std::string("psd_") + kAxis[a] + ".csv",
                      psd_csv(analysis::welch_psd(tr.position[a], fs, seg), c.hash, c.seed));
        json check;
        for (int a = 0; a < 3; ++a) {
            std::vector<double> up;
            const auto& x = tr.position[a];
            for (std::size_t i = 1; i < x.size(); ++i)
                if (x[i - 1] < 0.0 && x[i] >= 0.0) up.push_back(tr.t[i - 1] + (tr.t[i] - tr.t[i - 1]) * (-x[i - 1]) / (x[i] - x[i - 1]));
            if (up.size() < 3) {
                check[kAxis[a]] = nullptr;
                warnings.push_back(std::string("simulation too short to measure the ") + kAxis[a] + " frequency");
                continue;
            }
            const double f = static_cast<double>(up.size() - 1) / (up.back() - up.front());
            check[kAxis[a]] = {{"simulated_hz", f}, {"hessian_hz", freqs[a]}, {"relative_difference", f / freqs[a] - 1.0}};
        }
        report["calibration"]["simulation_check"] = check;

        const auto& model = *sim.field;
        field::EquilibriumOptions eo;
        eo.gravity = sim.gravity;
        const Eigen::Vector3d eq = field::find_equilibrium(model, sim.particle, eo).position;
        const int n = c.field.slice_points;
        const double h = c.field.slice_half_width_m;
        const auto slice = [&](int u, int v) {
            std::vector<double> cu, cv, b;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    Eigen::Vector3d r = eq;
                    r[u] += -h + 2.0 * h * i / (n - 1);
                    r[v] += -h + 2.0 * h * j / (n - 1);
                    cu.push_back(r[u]);
                    cv.push_back(r[v]);
                    b.push_back(model.b_field(r).norm());
                }
            return csv_table(c.hash, c.seed, {std::string(kAxis[u]) + "_m", std::string(kAxis[v]) + "_m", "B_T"}, {&cu, &cv, &b});
        };
        files.add("field_slice_xy.csv", slice(0, 1));
        files.add("field_slice_yz.csv", slice(1, 2));
        std::vector<double> zs, ys;
        for (int i = 0; i < n; ++i) {
            const double z = -h + 2.0 * h * i / (n - 1);
            zs.push_back(z);
            ys.push_back(field::zero_line_height(model, z));
        }
        files.add("zero_line.csv", csv_table(c.hash, c.seed, {"z_m", "y_m"}, {&zs, &ys}));
    }
};

}  // namespace

std::vector<std::uint64_t> member_seeds(const ExperimentConfig& cfg) {
    std::vector<std::uint64_t> s(cfg.ensemble_size);
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = cfg.seed + k;
    return s;
}

dynamics::SimulationConfig simulation_for(const ExperimentConfig& cfg) {
    auto sim = cfg.sim;
    sim.config_hash = cfg.hash;
    if (sim.mode == dynamics::TrapMode::field) sim.field = build_field(cfg, nullptr);
    return sim;
}

std::vector<dynamics::ChargeEvent> charge_schedule(const ChargeSettings& ch, std::uint64_t seed) {
    if (!ch.poisson) return ch.events;
    const auto& p = *ch.poisson;
    auto engine = dynamics::make_engine(seed, dynamics::stream_id(dynamics::Stream::charge_arrivals));
    std::exponential_distribution<double> gap(1.0 / p.mean_interval_s);
    std::vector<dynamics::ChargeEvent> ev;
    double t = p.first_s;
    int q = ch.initial_e;
    for (int k = 0; k < p.count; ++k) {
        t += (k == 0 ? 0.0 : p.dead_time_s) + gap(engine);
        q += p.delta_e;
        ev.push_back({t, q});
    }
    return ev;
}

control::ControllerConfig resolved_controller(const ExperimentConfig& cfg, const dynamics::SimulationConfig& sim) {
    if (!cfg.controller) throw ConfigError("no controller configured");
    auto ctrl = *cfg.controller;
    const auto freqs = dynamics::resolve_frequencies(sim);
    const double gamma = dynamics::resolve_damping(sim);
    for (int a = 0; a < 3; ++a) {
        if (!ctrl.axes[a]) continue;
        auto& ax = *ctrl.axes[a];
        if (cfg.auto_phase[a]) {
            // The all-pass phase enters the loop phase additively at the centre.
            ax.phase_deg = 90.0;
            const double loop = std::arg(control::loop_response(ctrl, a, ax.center_hz)) * 180.0 / std::numbers::pi;
            ax.phase_deg = std::remainder(90.0 + (90.0 - loop), 360.0);
        }
        if (cfg.target_linewidth_hz[a])
            ax.gain_N_per_V = control::gain_for_linewidth(ctrl, cfg.detector, a, sim.particle.mass(), freqs[a], gamma,
                                                          *cfg.target_linewidth_hz[a]);
    }
    ctrl.validate();
    return ctrl;
}

ScenarioResult run_scenario(const ExperimentConfig& cfg, const Log& log) {
    Run run(cfg, log);
    switch (cfg.scenario) {
        case Scenario::thermalize: run.thermal(false); break;
        case Scenario::calibrate_mass: run.thermal(true); break;
        case Scenario::cool: run.cool(); break;
        case Scenario::charge_sim: run.charge(); break;
        case Scenario::calibrate_field: run.calibrate_field(); break;
    }
    return run.finish();
}

}  // namespace mgtrap::io
