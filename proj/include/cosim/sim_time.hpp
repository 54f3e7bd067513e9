#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace cosim {

// Simulation clock. There is no now(): simulation time only moves when the
// coordinator advances it. Integer nanoseconds keep traces reproducible.
struct SimClock {
    using rep = std::int64_t;
    using period = std::nano;
    using duration = std::chrono::duration<rep, period>;
    using time_point = std::chrono::time_point<SimClock>;
    static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using SimTime = SimClock::time_point;

inline constexpr SimTime kSimStart{};

constexpr std::int64_t to_ns(SimTime t) noexcept { return t.time_since_epoch().count(); }
constexpr std::int64_t to_ns(Duration d) noexcept { return d.count(); }
constexpr SimTime sim_time_ns(std::int64_t ns) noexcept { return SimTime{Duration{ns}}; }

// Rounds to the nearest nanosecond.
Duration from_seconds(double seconds);
double to_seconds(Duration d) noexcept;
double to_seconds(SimTime t) noexcept;

// Exact decimal parse of "10ms", "1.5s", "250us", "42ns" or a bare number
// of seconds ("0.02"). Throws ParseError on anything else.
Duration parse_duration(std::string_view text);

// Canonical text form: the largest unit that divides the value exactly,
// so parse_duration(format_duration(d)) == d.
std::string format_duration(Duration d);

// Paired simulation and wall readings, both relative to run start.
struct ClockPair {
    SimTime sim{};
    Duration wall{};
};

}  // namespace cosim
