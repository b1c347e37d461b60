#pragma once

#include <cstdint>
#include <random>

namespace mgtrap::dynamics {

/// Stream identifiers. Each (seed, stream) pair owns an independent engine so
/// that draws never depend on evaluation order.
enum class Stream : std::uint32_t {
    thermal_x = 0,
    thermal_y = 1,
    thermal_z = 2,
    boltzmann_init = 10,
    detector = 20,
    charge_arrivals = 30,
    synthetic = 40,
};

inline std::uint32_t stream_id(Stream s, std::uint32_t sub = 0) { return static_cast<std::uint32_t>(s) + 1000u * sub; }

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream);

class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint32_t stream) : engine_(make_engine(seed, stream)) {}
    double operator()() { return dist_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

}  // namespace mgtrap::dynamics
