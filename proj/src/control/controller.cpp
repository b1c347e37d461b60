#include "mgtrap/control/controller.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "mgtrap/errors.hpp"
#include "mgtrap/simd/kernels.hpp"

namespace mgtrap::control {

namespace {

const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }

}  // namespace

std::vector<std::string> ControllerConfig::diagnostics() const {
    std::vector<std::string> d;
    const auto add = [&](const std::string& s) { d.push_back(s); };
    if (!(sample_rate_hz > 0.0)) add("controller.sample_rate_hz must be positive");
    if (latency_samples < 0) add("controller.latency_samples must be non-negative");
    if (!(force_min_N >= 0.0)) add("controller.force_min_N must be >= 0 (radiation pressure only pushes)");
    if (!(force_min_N <= force_offset_N && force_offset_N <= force_max_N))
        add("controller.force_offset_N must lie within [force_min_N, force_max_N]");
    if (!actuator_direction.allFinite() || std::abs(actuator_direction.norm() - 1.0) > 1e-9)
        add("controller.actuator_direction must be a unit vector");
    for (int a = 0; a < 3; ++a) {
        if (!axes[a]) continue;
        const auto& ax = *axes[a];
        const std::string key = std::string("controller.axes.") + axis_name(a);
        if (!(ax.center_hz > 0.0) || (sample_rate_hz > 0.0 && !(ax.center_hz < 0.5 * sample_rate_hz)))
            add(key + ".center_hz must lie between 0 and the Nyquist frequency of the controller sample rate");
        if (!(ax.bandwidth_hz > 0.0)) add(key + ".bandwidth_hz must be positive");
        if (!std::isfinite(ax.phase_deg)) add(key + ".phase_deg must be finite");
        if (!std::isfinite(ax.gain_N_per_V)) add(key + ".gain_N_per_V must be finite");
        for (int b = a + 1; b < 3; ++b) {
            if (!axes[b]) continue;
            const auto& bx = *axes[b];
            if (std::abs(ax.center_hz - bx.center_hz) <= 0.5 * (ax.bandwidth_hz + bx.bandwidth_hz))
                add(key + " and controller.axes." + axis_name(b) + " pass bands overlap; centres must be well separated");
        }
    }
    return d;
}

void ControllerConfig::validate() const {
    auto d = diagnostics();
    if (d.empty()) return;
    const std::string what = "invalid controller configuration: " + d.front();
    throw ConfigError(what, std::move(d));
}

Controller::Controller(const ControllerConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    for (int a = 0; a < 3; ++a) {
        if (!cfg_.axes[a]) continue;
        const auto& ax = *cfg_.axes[a];
        const Biquad bp = design_bandpass(ax.center_hz, ax.bandwidth_hz, cfg_.sample_rate_hz);
        const PhaseShifter ps = design_phase_shifter(ax.phase_deg, ax.center_hz, cfg_.sample_rate_hz);
        enabled_[a] = 1.0;
        sign_[a] = -ax.gain_N_per_V * ps.sign;
        bp_b0_[a] = bp.b0;
        bp_b1_[a] = bp.b1;
        bp_b2_[a] = bp.b2;
        bp_a1_[a] = bp.a1;
        bp_a2_[a] = bp.a2;
        ap_b0_[a] = ps.section.b0;
        ap_b1_[a] = ps.section.b1;
        ap_b2_[a] = ps.section.b2;
        ap_a1_[a] = ps.section.a1;
        ap_a2_[a] = ps.section.a2;
    }
    reset();
}

void Controller::reset() {
    bp_s1_.fill(0.0);
    bp_s2_.fill(0.0);
    ap_s1_.fill(0.0);
    ap_s2_.fill(0.0);
    pipeline_.assign(static_cast<std::size_t>(cfg_.latency_samples), Eigen::Vector3d::Zero());
}

Eigen::Vector3d Controller::step(const Eigen::Vector3d& volts) {
    const auto& k = simd::kernels();
    std::array<double, 3> in{volts[0] * enabled_[0], volts[1] * enabled_[1], volts[2] * enabled_[2]};
    std::array<double, 3> mid{}, out{};
    k.biquad({bp_b0_, bp_b1_, bp_b2_, bp_a1_, bp_a2_, bp_s1_, bp_s2_}, in, mid);
    k.biquad({ap_b0_, ap_b1_, ap_b2_, ap_a1_, ap_a2_, ap_s1_, ap_s2_}, mid, out);
    k.multiply(out, sign_, out);
    const Eigen::Vector3d now(out[0], out[1], out[2]);
    if (pipeline_.empty()) return now;
    pipeline_.push_back(now);
    const Eigen::Vector3d due = pipeline_.front();
    pipeline_.pop_front();
    return due;
}

ActuatorOutput actuate(const Eigen::Vector3d& modulation, const ControllerConfig& cfg) {
    ActuatorOutput o;
    double command = cfg.force_offset_N + modulation.sum();
    if (command < cfg.force_min_N) {
        command = cfg.force_min_N;
        o.clamped = true;
    } else if (command > cfg.force_max_N) {
        command = cfg.force_max_N;
        o.clamped = true;
    }
    o.force = command * cfg.actuator_direction;
    return o;
}

FeedbackLoop::FeedbackLoop(const DetectorConfig& det, const ControllerConfig& ctrl, std::uint64_t seed,
                           std::shared_ptr<ChannelRecord> record)
    : detector_(det, seed), controller_(ctrl), record_(std::move(record)) {
    if (std::abs(det.sample_rate_hz - ctrl.sample_rate_hz) > 1e-9 * ctrl.sample_rate_hz)
        throw ModelError("detector and controller must share one sample rate");
    if (record_ && record_->decimation == 0) record_->decimation = 1;
}

Eigen::Vector3d FeedbackLoop::on_sample(double t, const Eigen::Vector3d& displacement) {
    const DetectorReading r = detector_.detect(displacement);
    const ActuatorOutput out = actuate(controller_.step(r.volts), controller_.config());
    if (record_) {
        if (r.saturated) ++record_->saturated_samples;
        if (out.clamped) ++record_->clamped_samples;
        if (count_ % record_->decimation == 0) {
            record_->t.push_back(t);
            for (int a = 0; a < 3; ++a) record_->volts[a].push_back(r.volts[a]);
        }
    }
    ++count_;
    return out.force;
}

dynamics::HookFactory feedback_factory(const DetectorConfig& det, const ControllerConfig& ctrl) {
    return [det, ctrl](std::uint64_t seed) { return std::make_unique<FeedbackLoop>(det, ctrl, seed); };
}

std::complex<double> loop_response(const ControllerConfig& cfg, int axis, double f_hz) {
    if (axis < 0 || axis > 2 || !cfg.axes[axis]) return 0.0;
    const auto& ax = *cfg.axes[axis];
    const double fs = cfg.sample_rate_hz;
    const Biquad bp = design_bandpass(ax.center_hz, ax.bandwidth_hz, fs);
    const PhaseShifter ps = design_phase_shifter(ax.phase_deg, ax.center_hz, fs);
    const double wt = 2.0 * std::numbers::pi * f_hz / fs;
    const std::complex<double> delay = std::polar(1.0, -wt * cfg.latency_samples);
    const std::complex<double> hold =
        wt == 0.0 ? std::complex<double>(1.0) : (1.0 - std::polar(1.0, -wt)) / std::complex<double>(0.0, wt);
    return bp.response(f_hz, fs) * ps.response(f_hz, fs) * delay * hold;
}

namespace {

double loop_stiffness(const ControllerConfig& cfg, const DetectorConfig& det, int axis, double gain) {
    return gain * det.volts_per_meter[axis] * cfg.actuator_direction[axis];
}

double shifted_omega(const ControllerConfig& cfg, int axis, double mass, double w0, double g) {
    double w = w0;
    for (int i = 0; i < 100; ++i) {
        const auto h = loop_response(cfg, axis, w / (2.0 * std::numbers::pi));
        const double w_sq = w0 * w0 + g * h.real() / mass;
        if (!(w_sq > 0.0)) throw UnstableTrapError("feedback spring removes the restoring force");
        const double next = std::sqrt(w_sq);
        if (std::abs(next - w) <= 1e-14 * w0) return next;
        w = next;
    }
    return w;
}

}  // namespace

LoopEffect loop_effect(const ControllerConfig& cfg, const DetectorConfig& det, int axis, double mass_kg,
                       double natural_hz) {
    LoopEffect e;
    const double w0 = 2.0 * std::numbers::pi * natural_hz;
    if (!cfg.axes[axis]) {
        e.frequency_hz = natural_hz;
        return e;
    }
    const double g = loop_stiffness(cfg, det, axis, cfg.axes[axis]->gain_N_per_V);
    const double w = shifted_omega(cfg, axis, mass_kg, w0, g);
    const auto h = loop_response(cfg, axis, w / (2.0 * std::numbers::pi));
    e.damping_rate = g * h.imag() / (mass_kg * w);
    e.frequency_hz = w / (2.0 * std::numbers::pi);
    return e;
}

double gain_for_linewidth(const ControllerConfig& cfg, const DetectorConfig& det, int axis, double mass_kg,
                          double natural_hz, double natural_damping_rate, double target_linewidth_hz) {
    if (!cfg.axes[axis]) throw ModelError(std::string("no feedback configured on axis ") + axis_name(axis));
    const double wanted = 2.0 * std::numbers::pi * target_linewidth_hz - natural_damping_rate;
    if (!(wanted > 0.0)) throw ModelError("target linewidth must exceed the natural damping");
    const double unit = loop_stiffness(cfg, det, axis, 1.0);
    if (unit == 0.0) throw ModelError("actuator has no component along the cooled axis");
    const double w0 = 2.0 * std::numbers::pi * natural_hz;

    double gain = 0.0;
    double w = w0;
    for (int i = 0; i < 100; ++i) {
        const auto h = loop_response(cfg, axis, w / (2.0 * std::numbers::pi));
        if (h.imag() == 0.0) throw ModelError("loop phase gives no velocity component at the resonance");
        const double next = wanted * mass_kg * w / (unit * h.imag());
        w = shifted_omega(cfg, axis, mass_kg, w0, next * unit);
        if (std::abs(next - gain) <= 1e-13 * std::abs(next)) return next;
        gain = next;
    }
    return gain;
}

}  // namespace mgtrap::control
