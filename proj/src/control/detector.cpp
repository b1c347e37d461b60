#include "mgtrap/control/detector.hpp"

#include <cmath>
#include <sstream>

#include "mgtrap/errors.hpp"

namespace mgtrap::control {

void DetectorConfig::validate(double max_trap_frequency_hz) const {
    if (!(sample_rate_hz > 0.0)) throw ModelError("detector sample rate must be positive");
    if (sample_rate_hz <= 2.0 * max_trap_frequency_hz) {
        std::ostringstream os;
        os << "detector sample rate " << sample_rate_hz << " Hz must exceed twice the largest trap frequency ("
           << max_trap_frequency_hz << " Hz)";
        throw ModelError(os.str());
    }
    for (int a = 0; a < 3; ++a) {
        if (!std::isfinite(volts_per_meter[a]) || volts_per_meter[a] == 0.0)
            throw ModelError("detector calibration must be finite and nonzero");
        if (!(noise_psd_V2_per_Hz[a] >= 0.0)) throw ModelError("detector noise PSD must be non-negative");
    }
    if (saturation_V && !(*saturation_V > 0.0)) throw ModelError("detector saturation voltage must be positive");
}

Detector::Detector(DetectorConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      nx_(seed, dynamics::stream_id(dynamics::Stream::detector, 0)),
      ny_(seed, dynamics::stream_id(dynamics::Stream::detector, 1)),
      nz_(seed, dynamics::stream_id(dynamics::Stream::detector, 2)) {
    cfg_.validate();
    sigma_ = (cfg_.noise_psd_V2_per_Hz * (0.5 * cfg_.sample_rate_hz)).cwiseSqrt();
}

DetectorReading Detector::detect(const Eigen::Vector3d& r) {
    DetectorReading out;
    const double noise[3] = {nx_(), ny_(), nz_()};
    for (int a = 0; a < 3; ++a) {
        double v = cfg_.volts_per_meter[a] * r[a] + sigma_[a] * noise[a];
        if (cfg_.saturation_V && std::abs(v) > *cfg_.saturation_V) {
            v = std::copysign(*cfg_.saturation_V, v);
            out.saturated = true;
        }
        out.volts[a] = v;
    }
    return out;
}

}  // namespace mgtrap::control
