#include "cosim/sync_gate.hpp"

#include <cmath>

#include "cosim/error.hpp"

namespace cosim {

const char* to_string(SyncMode mode) noexcept {
    return mode == SyncMode::Synchronized ? "synchronized" : "unsynchronized";
}

SyncMode sync_mode_from_string(const std::string& text) {
    if (text == "synchronized") return SyncMode::Synchronized;
    if (text == "unsynchronized") return SyncMode::Unsynchronized;
    throw ValidationError("sync.mode", "expected 'synchronized' or 'unsynchronized', got '" +
                                           text + "'");
}

void SyncConfig::validate() const {
    if (physics_step <= Duration::zero()) {
        throw ValidationError("sync.physics_step", "must be > 0");
    }
    if (!(real_time_factor > 0.0 && real_time_factor <= 1.0)) {
        throw ValidationError("sync.real_time_factor", "must be in (0, 1]");
    }
    if (time_scale < 1) {
        throw ValidationError("sync.time_scale", "must be >= 1");
    }
}

GateDecision gate(SimTime packet_sent_sim, Duration net_delay, SimTime now_sim) {
    const SimTime deadline = packet_sent_sim + net_delay;
    if (now_sim <= deadline) {
        return GateDecision{Release{deadline - now_sim}};
    }
    return GateDecision{Discard{"missed deadline"}};
}

Duration wall_at(SimTime sim, double real_time_factor) {
    const long double ns = static_cast<long double>(to_ns(sim)) / real_time_factor;
    return Duration{std::llround(ns)};
}

SimTime sim_at_wall(Duration wall, double real_time_factor) {
    const long double ns = static_cast<long double>(wall.count()) * real_time_factor;
    return sim_time_ns(std::llround(ns));
}

SimTime handoff_time(SimTime sent, Duration net_delay, const SyncConfig& cfg) {
    const Duration wall = wall_at(sent, cfg.real_time_factor) + net_delay * cfg.time_scale;
    const SimTime h = sim_at_wall(wall, cfg.real_time_factor);
    // Rounding through the wall clock must never move the hand-off before
    // the send.
    return h < sent ? sent : h;
}

}  // namespace cosim
