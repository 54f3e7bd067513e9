#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cosim/event_queue.hpp"
#include "cosim/net_world.hpp"
#include "cosim/physics.hpp"
#include "cosim/sync_gate.hpp"
#include "cosim/trace.hpp"

namespace cosim {

struct RunReport {
    std::int64_t steps = 0;
    std::int64_t packets_sent = 0;
    std::int64_t delivered = 0;
    std::int64_t discarded = 0;  // released too late by the gate
    std::int64_t dropped = 0;    // lost inside the network
    SimTime final_time{};
    Duration final_wall{};  // virtual wall clock, see wall_at()
    std::string error;      // set when the run aborted

    bool aborted() const noexcept { return !error.empty(); }
    bool operator==(const RunReport&) const = default;
};

std::string to_json_string(const RunReport& report);

class Coordinator;

// Physics-side application logic (sensors, controllers, traffic sources).
// All callbacks run on the coordinator thread inside a step.
class Application {
public:
    virtual ~Application() = default;
    virtual void on_start(Coordinator&) {}
    virtual void on_timer(Coordinator&, std::uint64_t /*token*/, SimTime /*at*/) {}
    virtual void on_deliver(Coordinator&, const Packet&, SimTime /*at*/) {}
    // End of every step, after all events up to now() were processed.
    virtual void on_step(Coordinator&) {}
};

struct CoordinatorOptions {
    // Pose/rssi/control sampling period; must be a multiple of the physics step.
    std::optional<Duration> trace_interval;  // defaults to the physics step
};

// Lockstep loop: one physics step, mobility sync, every network event up to
// the new sim time, then gate-released deliveries. Single-threaded.
class Coordinator {
public:
    Coordinator(PhysicsWorld& physics, NetWorld& net, SyncConfig cfg,
                std::map<std::string, LossProfile> profiles, TraceSink* trace = nullptr,
                CoordinatorOptions options = {});

    // Registers an application. Packets whose destination is one of `nodes`
    // are delivered to it.
    void add_application(Application& app, std::vector<std::string> nodes = {});

    // Initial association, t = 0 samples and on_start hooks. Idempotent;
    // step() calls it on first use.
    void begin();

    // One lockstep iteration. Throws on simulator errors.
    void step();

    // Steps until now() >= until. Errors abort the run and are reported in
    // RunReport::error together with the partial counters.
    RunReport run_until(SimTime until);

    // Emits rows for packets still in flight and flushes the trace.
    void finish();

    SimTime now() const noexcept { return now_; }
    ClockPair clocks() const noexcept { return {now_, wall_at(now_, cfg_.real_time_factor)}; }
    const RunReport& report() const noexcept { return report_; }
    const SyncConfig& sync_config() const noexcept { return cfg_; }

    PhysicsWorld& physics() noexcept { return physics_; }
    const PhysicsWorld& physics() const noexcept { return physics_; }
    NetWorld& net() noexcept { return net_; }
    const NetWorld& net() const noexcept { return net_; }

    // Sends a packet at the current event time. Returns its id.
    std::uint64_t send(const std::string& src, const std::string& dst, std::size_t size_bytes,
                       std::vector<std::uint8_t> payload, const std::string& profile);

    void schedule_timer(Application& app, SimTime at, std::uint64_t token);

    // Current event time while events are processed, now() otherwise.
    SimTime event_time() const noexcept { return queue_.now(); }

    void trace(TraceRecord record);

    // Sets the wall-clock origin used for real pacing (emulate_stall).
    void restart_pacing();

private:
    struct InFlight {
        Packet packet;
        SimTime arrival{};
        std::string profile;
    };
    struct Timer {
        Application* app = nullptr;
        std::uint64_t token = 0;
    };

    void start();
    void handle(const Event& ev);
    void deliver(std::uint64_t packet_id, SimTime at);
    void sample(SimTime at);
    void trace_transitions(const std::vector<AssocTransition>& transitions);
    void trace_packet(const Packet& p, SimTime at, const char* event, Duration delay,
                      const std::string& reason);
    std::vector<RobotState> station_states() const;
    void pace();

    PhysicsWorld& physics_;
    NetWorld& net_;
    SyncConfig cfg_;
    std::map<std::string, LossProfile> profiles_;
    TraceSink* trace_;
    Duration trace_interval_;

    EventQueue queue_;
    SimTime now_{};
    bool started_ = false;
    RunReport report_;

    std::vector<Application*> apps_;
    std::map<std::string, Application*> receivers_;
    std::map<std::uint64_t, InFlight> in_flight_;
    std::map<std::uint64_t, Timer> timers_;
    std::uint64_t next_timer_ = 0;

    std::chrono::steady_clock::time_point pacing_origin_;
    SimTime pacing_sim_origin_{};
};

// Convenience wrapper: builds a coordinator without applications and runs it.
RunReport run_lockstep(PhysicsWorld& physics, NetWorld& net, const SyncConfig& cfg, SimTime until,
                       std::map<std::string, LossProfile> profiles = {},
                       TraceSink* trace = nullptr);

}  // namespace cosim
