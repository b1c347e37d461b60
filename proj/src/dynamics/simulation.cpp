#include "mgtrap/dynamics/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::dynamics {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      stream, 0x6d677472u};
    return std::mt19937_64(seq);
}

AxisNoise::AxisNoise(std::uint64_t seed)
    : x_(seed, stream_id(Stream::thermal_x)), y_(seed, stream_id(Stream::thermal_y)),
      z_(seed, stream_id(Stream::thermal_z)) {}

Eigen::Vector3d AxisNoise::draw() {
    const double a = x_();
    const double b = y_();
    const double c = z_();
    return {a, b, c};
}

namespace {

struct OuCoefficients {
    double c1;
    double c2;
};

OuCoefficients ou_coefficients(double mass, double gamma, double temperature, double dt, double excess_psd) {
    const double c1 = std::exp(-gamma * dt);
    const double thermal = constants::boltzmann * temperature / mass * -std::expm1(-2.0 * gamma * dt);
    const double excess = 0.5 * excess_psd * dt / (mass * mass);
    return {c1, std::sqrt(thermal + excess)};
}

void require_finite(const Eigen::Vector3d& v, const char* what, double t) {
    if (!v.allFinite()) {
        std::ostringstream os;
        os << "non-finite " << what << " at t = " << t << " s";
        throw IntegrationError(os.str());
    }
}

}  // namespace

void step(SimState& s, const ForceFn& force, const StepParams& p, AxisNoise& noise) {
    if (!(p.mass_kg > 0.0) || !(p.dt_s > 0.0)) throw ModelError("step needs positive mass and time step");
    if (p.damping_rate * p.dt_s >= 0.1) throw ModelError("damping rate too large for time step (Gamma dt >= 0.1)");
    const auto ou = ou_coefficients(p.mass_kg, p.damping_rate, p.temperature_K, p.dt_s, p.excess_force_psd);
    const double h = 0.5 * p.dt_s;

    Eigen::Vector3d f = force(s.position, s.t);
    require_finite(f, "force", s.t);
    s.velocity += h * f / p.mass_kg;
    s.position += h * s.velocity;
    s.velocity = ou.c1 * s.velocity + ou.c2 * noise.draw();
    s.position += h * s.velocity;
    s.t += p.dt_s;
    f = force(s.position, s.t);
    require_finite(f, "force", s.t);
    s.velocity += h * f / p.mass_kg;
    require_finite(s.position, "position", s.t);
    require_finite(s.velocity, "velocity", s.t);
}

SimState sample_boltzmann_init(const field::Particle& p, const field::TrapFrequencies& f, const Environment& env,
                               std::uint64_t seed) {
    NormalStream normal(seed, stream_id(Stream::boltzmann_init));
    const double kt = constants::boltzmann * env.temperature_K;
    SimState s;
    for (int a = 0; a < 3; ++a) {
        const double w = f.omega(a);
        s.position[a] = std::sqrt(kt / (p.mass() * w * w)) * normal();
        s.velocity[a] = std::sqrt(kt / p.mass()) * normal();
    }
    return s;
}

double resolve_damping(const SimulationConfig& cfg) {
    if (cfg.damping_rate) {
        if (!(*cfg.damping_rate >= 0.0)) throw ModelError("damping rate must be non-negative");
        return *cfg.damping_rate;
    }
    return damping_from_pressure(cfg.environment, cfg.particle);
}

field::TrapFrequencies resolve_frequencies(const SimulationConfig& cfg) {
    if (cfg.mode == TrapMode::harmonic) return cfg.frequencies;
    if (!cfg.field) throw ModelError("field mode needs a field model");
    field::EquilibriumOptions opt;
    opt.gravity = cfg.gravity;
    return field::trap_frequencies(*cfg.field, cfg.particle, opt);
}

namespace {

constexpr std::size_t kLanesPerMember = 4;

long long exact_ratio(double period, double dt, const char* what) {
    const double r = period / dt;
    const long long n = std::llround(r);
    if (n < 1 || std::abs(r - static_cast<double>(n)) > 1e-6 * std::max(1.0, r)) {
        std::ostringstream os;
        os << what << " (" << period << " s) must be a whole multiple of dt (" << dt << " s)";
        throw ModelError(os.str());
    }
    return n;
}

struct Member {
    std::uint64_t seed;
    AxisNoise noise;
    std::unique_ptr<ControllerHook> hook;
    int charge_e;
    std::size_t next_event = 0;
    Eigen::Vector3d control_force = Eigen::Vector3d::Zero();
    bool active = true;
    Trajectory traj;
};

}  // namespace

std::vector<Trajectory> simulate_ensemble(const SimulationConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                          const HookFactory& hook_factory) {
    if (seeds.empty()) throw ModelError("ensemble needs at least one seed");
    if (!(cfg.dt_s > 0.0) || !(cfg.duration_s > 0.0)) throw ModelError("dt and duration must be positive");
    if (!(cfg.environment.temperature_K >= 0.0)) throw ModelError("temperature must be non-negative");
    if (cfg.drive) cfg.drive->validate();

    const double gamma = resolve_damping(cfg);
    if (gamma * cfg.dt_s >= 0.1) throw ModelError("Gamma dt must be below 0.1");

    Eigen::Vector3d equilibrium = Eigen::Vector3d::Zero();
    field::TrapFrequencies freq = cfg.frequencies;
    if (cfg.mode == TrapMode::field) {
        if (!cfg.field) throw ModelError("field mode needs a field model");
        field::EquilibriumOptions opt;
        opt.gravity = cfg.gravity;
        const auto trap = field::analyze_trap(*cfg.field, cfg.particle, opt);
        equilibrium = trap.equilibrium.position;
        freq = trap.frequencies;
    }
    const double f_max = std::max({freq.fx, freq.fy, freq.fz});
    if (!(std::min({freq.fx, freq.fy, freq.fz}) > 0.0)) throw ModelError("trap frequencies must be positive");
    if (cfg.dt_s > 1.0 / (50.0 * f_max) * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "dt = " << cfg.dt_s << " s exceeds 1/(50 f_max) = " << 1.0 / (50.0 * f_max) << " s";
        throw ModelError(os.str());
    }

    const double dt = cfg.dt_s;
    const double h = 0.5 * dt;
    const double mass = cfg.particle.mass();
    const long long n_steps = exact_ratio(cfg.duration_s, dt, "duration");
    const long long every_sample = exact_ratio(cfg.sample_period_s, dt, "sample period");

    std::vector<ChargeEvent> events = cfg.charge_events;
    std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.t < b.t; });

    const std::size_t members = seeds.size();
    const std::size_t lanes = members * kLanesPerMember;
    std::vector<double> x(lanes, 0.0), v(lanes, 0.0), acc(lanes, 0.0), omega_sq(lanes, 0.0), c1(lanes, 1.0),
        c2(lanes, 0.0), noise(lanes, 0.0), ext(lanes, 0.0);

    const auto ou = ou_coefficients(mass, gamma, cfg.environment.temperature_K, dt, cfg.excess_force_psd);
    for (std::size_t m = 0; m < members; ++m)
        for (int a = 0; a < 3; ++a) {
            const std::size_t l = m * kLanesPerMember + a;
            c1[l] = ou.c1;
            c2[l] = ou.c2;
            if (cfg.mode == TrapMode::harmonic) omega_sq[l] = std::pow(freq.omega(a), 2);
        }

    std::vector<Member> state;
    state.reserve(members);
    long long every_control = 0;
    for (std::size_t m = 0; m < members; ++m) {
        Member mb{seeds[m], AxisNoise(seeds[m]), hook_factory ? hook_factory(seeds[m]) : nullptr,
                  cfg.particle.charge_e(), 0, Eigen::Vector3d::Zero(), true, Trajectory{}};
        if (mb.hook) {
            const long long k = exact_ratio(mb.hook->sample_period(), dt, "controller sample period");
            if (every_control && every_control != k) throw ModelError("ensemble members need one controller rate");
            every_control = k;
        }
        SimState init = cfg.initial == InitialCondition::boltzmann
                            ? sample_boltzmann_init(cfg.particle, freq, cfg.environment, seeds[m])
                            : cfg.initial_state;
        for (int a = 0; a < 3; ++a) {
            x[m * kLanesPerMember + a] = init.position[a];
            v[m * kLanesPerMember + a] = init.velocity[a];
        }
        auto& tr = mb.traj;
        tr.sample_period = cfg.sample_period_s;
        tr.meta.seed = seeds[m];
        tr.meta.config_hash = cfg.config_hash;
        tr.meta.dt_s = dt;
        tr.meta.duration_s = cfg.duration_s;
        tr.meta.damping_rate = gamma;
        tr.meta.equilibrium = equilibrium;
        tr.meta.charge_events = events;
        const std::size_t expected = static_cast<std::size_t>(n_steps / every_sample + 1);
        tr.t.reserve(expected);
        for (int a = 0; a < 3; ++a) {
            tr.position[a].reserve(expected);
            tr.velocity[a].reserve(expected);
        }
        state.push_back(std::move(mb));
    }

    const auto& k = simd::kernels();

    const auto external_force = [&](const Member& mb, double t) {
        Eigen::Vector3d f = mb.control_force;
        if (cfg.drive && mb.charge_e != 0)
            f += electric_drive_force(mb.charge_e * constants::elementary_charge, *cfg.drive, t);
        return f;
    };
    const auto displacement = [&](std::size_t m) {
        const std::size_t b = m * kLanesPerMember;
        return Eigen::Vector3d(x[b], x[b + 1], x[b + 2]);
    };
    const auto total_acceleration = [&](std::size_t m, double t) {
        const Member& mb = state[m];
        const std::size_t b = m * kLanesPerMember;
        const Eigen::Vector3d fe = external_force(mb, t);
        Eigen::Vector3d a;
        if (cfg.mode == TrapMode::harmonic) {
            for (int i = 0; i < 3; ++i) a[i] = fe[i] / mass - omega_sq[b + i] * x[b + i];
        } else {
            Eigen::Vector3d ft;
            try {
                ft = field::force(*cfg.field, cfg.particle, equilibrium + displacement(m), cfg.gravity);
            } catch (const DomainError& e) {
                throw IntegrationError(std::string("particle left the field model: ") + e.what());
            }
            a = (ft + fe) / mass;
        }
        for (int i = 0; i < 3; ++i) acc[b + i] = a[i];
    };

    for (std::size_t m = 0; m < members; ++m) total_acceleration(m, 0.0);
    std::size_t active = members;

    for (long long n = 0;; ++n) {
        const double t = static_cast<double>(n) * dt;
        if (n % every_sample == 0) {
            for (std::size_t m = 0; m < members; ++m) {
                Member& mb = state[m];
                if (!mb.active) continue;
                const std::size_t b = m * kLanesPerMember;
                mb.traj.t.push_back(t);
                for (int a = 0; a < 3; ++a) {
                    mb.traj.position[a].push_back(x[b + a]);
                    mb.traj.velocity[a].push_back(v[b + a]);
                }
            }
        }
        if (n == n_steps || active == 0) break;

        for (std::size_t m = 0; m < members; ++m) {
            Member& mb = state[m];
            const std::size_t b = m * kLanesPerMember;
            bool dirty = false;
            while (mb.next_event < events.size() && events[mb.next_event].t <= t) {
                mb.charge_e = events[mb.next_event++].charge_e;
                dirty = true;
            }
            if (mb.hook && n % every_control == 0) {
                mb.control_force = mb.hook->on_sample(t, displacement(m));
                require_finite(mb.control_force, "controller force", t);
                dirty = true;
            }
            if (dirty) total_acceleration(m, t);
            const Eigen::Vector3d xi = mb.noise.draw();
            for (int a = 0; a < 3; ++a) noise[b + a] = xi[a];
        }

        const double t_next = static_cast<double>(n + 1) * dt;
        if (cfg.mode == TrapMode::harmonic) {
            for (std::size_t m = 0; m < members; ++m) {
                const Eigen::Vector3d fe = external_force(state[m], t_next);
                for (int a = 0; a < 3; ++a) ext[m * kLanesPerMember + a] = fe[a] / mass;
            }
            k.harmonic_baoab({x, v, acc, omega_sq, c1, c2}, ext, noise, h);
        } else {
            k.kick(v, acc, h);
            k.drift(x, v, h);
            k.ou(v, c1, c2, noise);
            k.drift(x, v, h);
            for (std::size_t m = 0; m < members; ++m) total_acceleration(m, t_next);
            k.kick(v, acc, h);
        }

        for (std::size_t m = 0; m < members; ++m) {
            Member& mb = state[m];
            if (!mb.active) continue;
            const std::size_t b = m * kLanesPerMember;
            const Eigen::Vector3d xm(x[b], x[b + 1], x[b + 2]);
            const Eigen::Vector3d vm(v[b], v[b + 1], v[b + 2]);
            require_finite(xm, "position", t_next);
            require_finite(vm, "velocity", t_next);
            if (cfg.amplitude_guard_m && xm.cwiseAbs().maxCoeff() > *cfg.amplitude_guard_m) {
                mb.active = false;
                mb.traj.meta.guard_tripped = true;
                mb.traj.meta.stop_time_s = t_next;
                --active;
            }
        }
    }

    std::vector<Trajectory> out;
    out.reserve(members);
    for (auto& mb : state) {
        if (!mb.traj.meta.guard_tripped) mb.traj.meta.stop_time_s = cfg.duration_s;
        out.push_back(std::move(mb.traj));
    }
    return out;
}

Trajectory simulate(const SimulationConfig& cfg, std::uint64_t seed, const HookFactory& hook) {
    return std::move(simulate_ensemble(cfg, {seed}, hook).front());
}

}  // namespace mgtrap::dynamics
