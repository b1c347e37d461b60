#include "mgtrap/io/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "mgtrap/constants.hpp"
#include "mgtrap/control/lockin.hpp"
#include "mgtrap/errors.hpp"

namespace mgtrap::io {

using nlohmann::json;

std::string scenario_name(Scenario s) {
    switch (s) {
        case Scenario::thermalize: return "thermalize";
        case Scenario::calibrate_mass: return "calibrate-mass";
        case Scenario::cool: return "cool";
        case Scenario::charge_sim: return "charge-sim";
        case Scenario::calibrate_field: return "calibrate-field";
    }
    return "?";
}

namespace {

enum class Check { any, positive, nonnegative };

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

// Reads one JSON object, recording every problem with its key path and
// remembering which keys were consumed so leftovers can be reported.
class Node {
public:
    Node(const json* j, std::string path, std::vector<std::string>& diags)
        : j_(j), path_(std::move(path)), diags_(&diags) {}

    bool exists() const { return j_ != nullptr; }
    bool has(const std::string& key) const { return j_ && j_->contains(key); }
    std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    void fail(const std::string& key, const std::string& msg) const { diags_->push_back(key_path(key) + ": " + msg); }

    const json* get(const std::string& key) {
        if (!has(key)) return nullptr;
        used_.insert(key);
        return &(*j_)[key];
    }

    void require(const std::string& key) const {
        if (!has(key)) fail(key, "required key is missing");
    }

    std::optional<double> number(const std::string& key, Check check = Check::any) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            fail(key, "must be a number");
            return std::nullopt;
        }
        const double x = v->get<double>();
        if (!std::isfinite(x)) fail(key, "must be finite");
        else if (check == Check::positive && !(x > 0.0)) fail(key, "must be > 0 (got " + fmt(x) + ")");
        else if (check == Check::nonnegative && !(x >= 0.0)) fail(key, "must be >= 0 (got " + fmt(x) + ")");
        else return x;
        return std::nullopt;
    }

    void number(const std::string& key, double& out, Check check = Check::any) {
        if (auto v = number(key, check)) out = *v;
    }

    std::optional<std::int64_t> integer(const std::string& key, std::int64_t min = INT32_MIN) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number_integer()) {
            fail(key, "must be an integer");
            return std::nullopt;
        }
        const auto x = v->get<std::int64_t>();
        if (x < min) {
            fail(key, "must be >= " + std::to_string(min) + " (got " + std::to_string(x) + ")");
            return std::nullopt;
        }
        return x;
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            fail(key, "must be true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::string> choice(const std::string& key, const std::vector<std::string>& allowed) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (v->is_string()) {
            const auto s = v->get<std::string>();
            for (const auto& a : allowed)
                if (a == s) return s;
        }
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        fail(key, "must be one of: " + list);
        return std::nullopt;
    }

    Node child(const std::string& key) {
        const json* v = get(key);
        if (v && !v->is_object()) {
            fail(key, "must be an object");
            v = nullptr;
        }
        return Node(v, key_path(key), *diags_);
    }

    // Three-vector written as [a, b, c].
    std::optional<Eigen::Vector3d> vector3(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_array() || v->size() != 3 || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
            fail(key, "must be an array of three numbers");
            return std::nullopt;
        }
        Eigen::Vector3d r((*v)[0].get<double>(), (*v)[1].get<double>(), (*v)[2].get<double>());
        if (!r.allFinite()) {
            fail(key, "must be finite");
            return std::nullopt;
        }
        return r;
    }

    // Per-axis quantity written as {"x": .., "y": .., "z": ..}; missing axes keep `out`.
    void per_axis(const std::string& key, Eigen::Vector3d& out, Check check) {
        Node n = child(key);
        if (!n.exists()) return;
        static const char* names[3] = {"x", "y", "z"};
        for (int a = 0; a < 3; ++a) n.number(names[a], out[a], check);
        n.finish();
    }

    void add(const std::string& msg) const { diags_->push_back(msg); }
    std::vector<std::string>& sink() const { return *diags_; }

    void finish() const {
        if (!j_) return;
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key())) diags_->push_back(key_path(it.key()) + ": unknown key");
    }

private:
    const json* j_;
    std::string path_;
    std::vector<std::string>* diags_;
    std::set<std::string> used_;
};

const char* kAxis[3] = {"x", "y", "z"};

field::Parity parse_parity(const std::string& s) { return s == "sine" ? field::Parity::sine : field::Parity::cosine; }

void parse_trap(Node n, ExperimentConfig& c) {
    if (auto m = n.choice("mode", {"harmonic", "field"}))
        c.sim.mode = *m == "field" ? dynamics::TrapMode::field : dynamics::TrapMode::harmonic;
    Eigen::Vector3d f(c.target_frequencies.fx, c.target_frequencies.fy, c.target_frequencies.fz);
    n.per_axis("frequencies_hz", f, Check::positive);
    c.target_frequencies = {f.x(), f.y(), f.z()};
    c.sim.frequencies = c.target_frequencies;
    n.number("gravity_m_per_s2", c.sim.gravity, Check::nonnegative);

    Node fn = n.child("field");
    fn.number("validity_radius_m", c.field.validity_radius_m, Check::positive);
    fn.number("slice_half_width_m", c.field.slice_half_width_m, Check::positive);
    if (auto p = fn.integer("slice_points", 3)) c.field.slice_points = static_cast<int>(*p);
    if (const json* terms = fn.get("terms")) {
        if (!terms->is_array() || terms->empty()) {
            fn.fail("terms", "must be a non-empty array");
        } else {
            c.field.terms.terms.clear();
            int with_coeff = 0;
            for (std::size_t i = 0; i < terms->size(); ++i) {
                const std::string path = fn.key_path("terms") + "[" + std::to_string(i) + "]";
                field::HarmonicTerm term;
                if (!(*terms)[i].is_object()) {
                    fn.add(path + ": must be an object");
                    continue;
                }
                Node t(&(*terms)[i], path, fn.sink());
                t.require("degree");
                t.require("order");
                if (auto d = t.integer("degree", 1)) term.degree = static_cast<int>(*d);
                if (auto o = t.integer("order", 0)) term.order = static_cast<int>(*o);
                if (auto p = t.choice("parity", {"cosine", "sine"})) term.parity = parse_parity(*p);
                if (auto k = t.number("coefficient_T_m_pow_1_minus_degree")) {
                    term.coefficient = *k;
                    ++with_coeff;
                }
                if (term.order > term.degree || term.degree > field::kMaxDegree)
                    t.add(path + ": order must not exceed degree, degree at most " + std::to_string(field::kMaxDegree));
                else if (!field::mirror_symmetric(term))
                    t.add(path + ": term " + field::describe(term) + " is not symmetric under x -> -x and z -> -z");
                t.finish();
                c.field.terms.terms.push_back(term);
            }
            c.field.calibrate = with_coeff == 0;
            if (with_coeff != 0 && with_coeff != static_cast<int>(terms->size()))
                fn.fail("terms", "give a coefficient for every term or for none");
        }
    }
    fn.finish();
    n.finish();
}


void parse_particle(Node n, ExperimentConfig& c) {
    const auto mass = n.number("mass_kg", Check::positive);
    const auto radius = n.number("radius_m", Check::positive);
    double density = c.sim.particle.density();
    double chi = c.sim.particle.chi();
    n.number("density_kg_per_m3", density, Check::positive);
    n.number("chi", chi);
    int charge = 0;
    if (auto q = n.integer("charge_e")) charge = static_cast<int>(*q);
    if (mass && radius) n.fail("mass_kg", "give mass_kg or radius_m, not both");
    try {
        if (radius)
            c.sim.particle = field::Particle::from_radius(*radius, density, chi, charge);
        else
            c.sim.particle = field::Particle::from_mass(mass.value_or(c.sim.particle.mass()), density, chi, charge);
    } catch (const ModelError& e) {
        n.add(std::string("particle: ") + e.what());
    }
    n.finish();
}

void parse_environment(Node n, ExperimentConfig& c) {
    auto& env = c.sim.environment;
    n.number("temperature_K", env.temperature_K, Check::positive);
    const auto torr = n.number("pressure_torr", Check::nonnegative);
    const auto pa = n.number("pressure_Pa", Check::nonnegative);
    if (torr && pa) n.fail("pressure_torr", "give pressure_torr or pressure_Pa, not both");
    if (torr) env.pressure_Pa = *torr * constants::torr;
    if (pa) env.pressure_Pa = *pa;
    n.number("gas_molecular_mass_kg", env.gas_molecular_mass_kg, Check::positive);
    n.number("gas_molecule_diameter_m", env.gas_molecule_diameter_m, Check::positive);
    if (auto a = n.choice("accommodation", {"diffuse", "specular"}))
        env.accommodation = *a == "specular" ? dynamics::Accommodation::specular : dynamics::Accommodation::diffuse;
    if (auto g = n.number("damping_rate_hz", Check::nonnegative)) c.sim.damping_rate = constants::two_pi * *g;
    n.number("excess_force_psd_N2_per_Hz", c.sim.excess_force_psd, Check::nonnegative);
    n.finish();
}

void parse_simulation(Node n, ExperimentConfig& c) {
    n.number("duration_s", c.sim.duration_s, Check::positive);
    n.number("dt_s", c.sim.dt_s, Check::positive);
    n.number("sample_period_s", c.sim.sample_period_s, Check::positive);
    if (auto init = n.choice("initial", {"boltzmann", "displaced"}))
        c.sim.initial = *init == "displaced" ? dynamics::InitialCondition::explicit_state
                                             : dynamics::InitialCondition::boltzmann;
    if (auto d = n.vector3("initial_displacement_m")) c.sim.initial_state.position = *d;
    if (auto v = n.vector3("initial_velocity_m_per_s")) c.sim.initial_state.velocity = *v;
    if (auto g = n.number("amplitude_guard_m", Check::positive)) c.sim.amplitude_guard_m = *g;
    if (auto e = n.integer("ensemble_size", 1)) c.ensemble_size = static_cast<std::size_t>(*e);
    n.finish();
}

bool whole_multiple(double period, double dt) {
    const double r = period / dt;
    return r >= 1.0 - 1e-9 && std::abs(r - std::round(r)) < 1e-6;
}

void parse_detector(Node n, ExperimentConfig& c) {
    n.per_axis("volts_per_meter", c.detector.volts_per_meter, Check::any);
    n.per_axis("noise_psd_V2_per_Hz", c.detector.noise_psd_V2_per_Hz, Check::nonnegative);
    n.number("sample_rate_hz", c.detector.sample_rate_hz, Check::positive);
    if (auto s = n.number("saturation_V", Check::positive)) c.detector.saturation_V = *s;
    n.finish();
}

void parse_controller(Node n, ExperimentConfig& c) {
    if (!n.exists()) return;
    control::ControllerConfig cc;
    cc.sample_rate_hz = c.detector.sample_rate_hz;
    n.number("sample_rate_hz", cc.sample_rate_hz, Check::positive);
    if (auto l = n.integer("latency_samples", 0)) cc.latency_samples = static_cast<int>(*l);
    if (auto d = n.vector3("actuator_direction")) {
        if (d->norm() == 0.0) n.fail("actuator_direction", "must be nonzero");
        else cc.actuator_direction = d->normalized();
    }
    n.number("force_offset_N", cc.force_offset_N);
    n.number("force_min_N", cc.force_min_N);
    n.number("force_max_N", cc.force_max_N);
    Node axes = n.child("axes");
    for (int a = 0; a < 3; ++a) {
        Node ax = axes.child(kAxis[a]);
        if (!ax.exists()) continue;
        control::AxisFeedback fb;
        fb.center_hz = c.target_frequencies[a];
        ax.number("center_hz", fb.center_hz, Check::positive);
        fb.bandwidth_hz = 0.25 * fb.center_hz;
        ax.number("bandwidth_hz", fb.bandwidth_hz, Check::positive);
        if (auto p = ax.number("phase_deg")) fb.phase_deg = *p;
        else c.auto_phase[a] = true;
        const auto gain = ax.number("gain_N_per_V");
        const auto target = ax.number("target_linewidth_hz", Check::positive);
        if (gain && target) ax.fail("gain_N_per_V", "give gain_N_per_V or target_linewidth_hz, not both");
        if (!gain && !target && !ax.has("gain_N_per_V") && !ax.has("target_linewidth_hz"))
            ax.fail("target_linewidth_hz", "required key is missing (or give gain_N_per_V)");
        fb.gain_N_per_V = gain.value_or(0.0);
        c.target_linewidth_hz[a] = target;
        cc.axes[a] = fb;
        ax.finish();
    }
    axes.finish();
    n.finish();
    for (auto& d : cc.diagnostics()) n.add(d);
    if (!(std::abs(cc.sample_rate_hz - c.detector.sample_rate_hz) <= 1e-9 * cc.sample_rate_hz))
        n.fail("sample_rate_hz", "must equal detector.sample_rate_hz");
    if (cc.sample_rate_hz > 0.0 && !whole_multiple(1.0 / cc.sample_rate_hz, c.sim.dt_s))
        n.add("simulation.dt_s: must divide the controller sample period evenly");
    c.controller = cc;
}

void parse_drive(Node n, ExperimentConfig& c) {
    if (!n.exists()) return;
    n.require("voltage_V");
    n.require("frequency_hz");
    double voltage = 0.0, gap = 1e-3, freq = 1.0;
    n.number("voltage_V", voltage, Check::nonnegative);
    n.number("effective_gap_m", gap, Check::positive);
    n.number("frequency_hz", freq, Check::positive);
    Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
    if (auto d = n.vector3("axis")) {
        if (d->norm() == 0.0) n.fail("axis", "must be nonzero");
        else axis = d->normalized();
    }
    n.finish();
    if (gap > 0.0 && freq > 0.0 && voltage >= 0.0) c.sim.drive = dynamics::DriveConfig::from_voltage(voltage, gap, freq, axis);
}

void parse_charge(Node n, ExperimentConfig& c) {
    if (!n.exists()) return;
    ChargeSettings ch;
    if (auto q = n.integer("initial_e")) ch.initial_e = static_cast<int>(*q);
    if (const json* ev = n.get("events")) {
        if (!ev->is_array()) n.fail("events", "must be an array");
        else
            for (std::size_t i = 0; i < ev->size(); ++i) {
                const std::string path = n.key_path("events") + "[" + std::to_string(i) + "]";
                if (!(*ev)[i].is_object()) {
                    n.add(path + ": must be an object");
                    continue;
                }
                Node e(&(*ev)[i], path, n.sink());
                e.require("t_s");
                e.require("charge_e");
                dynamics::ChargeEvent event;
                e.number("t_s", event.t, Check::nonnegative);
                if (auto q = e.integer("charge_e")) event.charge_e = static_cast<int>(*q);
                e.finish();
                ch.events.push_back(event);
            }
    }
    Node p = n.child("poisson");
    if (p.exists()) {
        PoissonArrivals pa;
        if (auto k = p.integer("count", 1)) pa.count = static_cast<int>(*k);
        p.number("first_s", pa.first_s, Check::nonnegative);
        p.number("mean_interval_s", pa.mean_interval_s, Check::positive);
        p.number("dead_time_s", pa.dead_time_s, Check::nonnegative);
        if (auto d = p.integer("delta_e")) pa.delta_e = static_cast<int>(*d);
        p.number("tail_s", pa.tail_s, Check::positive);
        p.finish();
        ch.poisson = pa;
        if (!ch.events.empty()) n.fail("poisson", "give events or poisson, not both");
    }
    n.finish();
    c.sim.particle = c.sim.particle.with_charge(ch.initial_e);
    c.charge = ch;
}

void parse_analysis(Node n, Node lockin, ExperimentConfig& c) {
    auto& a = c.analysis;
    if (auto s = n.number("settle_s", Check::nonnegative)) a.settle_s = *s;
    n.number("fit_half_width_linewidths", a.fit_half_width_linewidths, Check::positive);
    n.number("band_half_width_linewidths", a.band_half_width_linewidths, Check::positive);
    if (auto b = n.integer("mass_blocks", 2)) a.mass_blocks = static_cast<std::size_t>(*b);
    if (auto b = n.integer("histogram_bins", 4)) a.histogram_bins = static_cast<std::size_t>(*b);
    n.number("step_threshold", a.step_threshold, Check::positive);
    n.number("min_dwell_time_constants", a.min_dwell_time_constants, Check::positive);
    n.finish();
    lockin.number("time_constant_s", a.lockin_time_constant_s, Check::positive);
    lockin.finish();
}

ExperimentConfig parse(const json& doc, std::vector<std::string>& diags) {
    ExperimentConfig c;
    c.document = doc;
    if (!doc.is_object()) {
        diags.push_back("(root): configuration must be a JSON object");
        return c;
    }
    Node root(&doc, "", diags);
    root.require("schema_version");
    root.require("scenario");
    if (auto v = root.integer("schema_version"); v && *v != kSchemaVersion)
        root.fail("schema_version", "unsupported version " + std::to_string(*v) + " (expected " +
                                        std::to_string(kSchemaVersion) + ")");
    if (auto s = root.choice("scenario", {"thermalize", "calibrate-mass", "cool", "charge-sim", "calibrate-field"})) {
        if (*s == "thermalize") c.scenario = Scenario::thermalize;
        else if (*s == "calibrate-mass") c.scenario = Scenario::calibrate_mass;
        else if (*s == "cool") c.scenario = Scenario::cool;
        else if (*s == "charge-sim") c.scenario = Scenario::charge_sim;
        else c.scenario = Scenario::calibrate_field;
    }
    if (const json* s = root.get("seed")) {
        if (s->is_number_unsigned()) c.seed = s->get<std::uint64_t>();
        else if (s->is_number_integer() && s->get<std::int64_t>() >= 0) c.seed = static_cast<std::uint64_t>(s->get<std::int64_t>());
        else root.fail("seed", "must be a non-negative integer");
    }
    if (const json* o = root.get("output_dir")) {
        if (o->is_string()) c.output_dir = o->get<std::string>();
        else root.fail("output_dir", "must be a string");
    }

    parse_trap(root.child("trap"), c);
    parse_particle(root.child("particle"), c);
    parse_environment(root.child("environment"), c);
    parse_simulation(root.child("simulation"), c);
    parse_detector(root.child("detector"), c);
    Node ctrl = root.child("controller");
    parse_controller(ctrl, c);
    Node drive = root.child("drive");
    parse_drive(drive, c);
    Node charge = root.child("charge");
    parse_charge(charge, c);
    parse_analysis(root.child("analysis"), root.child("lockin"), c);
    root.finish();

    if (!whole_multiple(c.sim.sample_period_s, c.sim.dt_s))
        diags.push_back("simulation.sample_period_s: must be a whole multiple of simulation.dt_s");
    const double fmax = std::max({c.target_frequencies.fx, c.target_frequencies.fy, c.target_frequencies.fz});
    try {
        c.detector.validate(fmax);
    } catch (const ModelError& e) {
        diags.push_back(std::string("detector: ") + e.what());
    }
    if (c.scenario == Scenario::cool && (!c.controller || std::none_of(c.controller->axes.begin(), c.controller->axes.end(),
                                                                      [](const auto& a) { return a.has_value(); })))
        diags.push_back("controller.axes: required for scenario cool");
    if (c.scenario == Scenario::charge_sim) {
        if (!drive.exists()) diags.push_back("drive: required key is missing for scenario charge-sim");
        if (!charge.exists()) diags.push_back("charge: required key is missing for scenario charge-sim");
        if (c.sim.drive) {
            try {
                control::LockInConfig{c.sim.drive->frequency_hz, c.analysis.lockin_time_constant_s}.validate();
            } catch (const ModelError& e) {
                diags.push_back(std::string("lockin.time_constant_s: ") + e.what());
            }
        }
    }
    if (c.charge && !c.charge->events.empty()) {
        for (std::size_t i = 1; i < c.charge->events.size(); ++i)
            if (c.charge->events[i].t < c.charge->events[i - 1].t)
                diags.push_back("charge.events: must be sorted by t_s");
    }
    c.hash = config_hash(doc);
    return c;
}

}  // namespace

std::vector<std::string> diagnose(const json& doc) {
    std::vector<std::string> diags;
    parse(doc, diags);
    return diags;
}

ExperimentConfig parse_config(const json& doc) {
    std::vector<std::string> diags;
    auto c = parse(doc, diags);
    if (!diags.empty()) {
        const std::string what = "invalid configuration: " + diags.front();
        throw ConfigError(what, std::move(diags));
    }
    return c;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("cannot read " + path.string());
    try {
        return json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": malformed JSON", {std::string("(root): ") + e.what()});
    }
}

ExperimentConfig load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override) {
    json doc = read_json(path);
    if (seed_override && doc.is_object()) doc["seed"] = *seed_override;
    return parse_config(doc);
}

std::string config_hash(const json& doc) {
    json d = doc;
    if (d.is_object()) {
        d.erase("seed");
        d.erase("output_dir");
    }
    const std::string text = d.dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace mgtrap::io
