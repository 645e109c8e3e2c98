#pragma once

#include <cmath>
#include <cstdint>

namespace rfsync {

/// Simulation true time and durations, integer picoseconds.
using SimTime = std::int64_t;

inline constexpr double kSpeedOfLight = 299'792'458.0; // m/s
inline constexpr SimTime kPsPerSecond = 1'000'000'000'000;

inline constexpr SimTime ps_from_ns(double ns) {
    // llround is not constexpr before C++23
    return static_cast<SimTime>(ns * 1000.0 + (ns >= 0 ? 0.5 : -0.5));
}

inline SimTime ps_from_seconds(double s) {
    return static_cast<SimTime>(std::llround(s * 1e12));
}

inline constexpr double seconds_from_ps(SimTime t) {
    return static_cast<double>(t) * 1e-12;
}

inline constexpr double ns_from_ps(SimTime t) {
    return static_cast<double>(t) * 1e-3;
}

} // namespace rfsync
