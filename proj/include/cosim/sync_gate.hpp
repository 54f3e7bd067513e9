#pragma once

#include <string>
#include <variant>

#include "cosim/sim_time.hpp"

namespace cosim {

enum class SyncMode { Synchronized, Unsynchronized };

const char* to_string(SyncMode mode) noexcept;
SyncMode sync_mode_from_string(const std::string& text);

struct SyncConfig {
    SyncMode mode = SyncMode::Synchronized;
    Duration physics_step = std::chrono::milliseconds(10);
    // Fraction of wall-clock speed the physics side is allowed to run at.
    double real_time_factor = 1.0;
    // Dilation applied to network-facing wall waits.
    int time_scale = 1;
    // When false, the rho slowdown is accounted on the virtual wall clock
    // only and the process does not actually sleep. Outcomes are identical.
    bool emulate_stall = true;

    // Throws ValidationError naming the bad field.
    void validate() const;

    bool operator==(const SyncConfig&) const = default;
};

struct Release {
    Duration wait{};
    bool operator==(const Release&) const = default;
};

struct Discard {
    std::string reason;
    bool operator==(const Discard&) const = default;
};

struct GateDecision {
    std::variant<Release, Discard> verdict;

    bool released() const noexcept { return std::holds_alternative<Release>(verdict); }
    Duration wait() const { return std::get<Release>(verdict).wait; }
    bool operator==(const GateDecision&) const = default;
};

// Timestamp gate between the network and physics sides. The packet is due
// at deadline = sent + net_delay (sim time). A packet that reaches the gate
// no later than its deadline is held until the deadline; a late one is
// discarded. Pre: net_delay >= 0.
GateDecision gate(SimTime packet_sent_sim, Duration net_delay, SimTime now_sim);

// Virtual wall clock of the paced physics side: each simulated second costs
// 1/rho wall seconds.
Duration wall_at(SimTime sim, double real_time_factor);
SimTime sim_at_wall(Duration wall, double real_time_factor);

// Sim time at which the network side hands a packet back to the middleware.
// The network emulator works on wall time, and its waits are dilated by
// time_scale, so the hand-off lands at wall(sent) + N * net_delay.
SimTime handoff_time(SimTime sent, Duration net_delay, const SyncConfig& cfg);

}  // namespace cosim
