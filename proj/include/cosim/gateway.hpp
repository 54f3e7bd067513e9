#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cosim/apps.hpp"
#include "cosim/coordinator.hpp"
#include "cosim/scenario.hpp"

namespace cosim {

// ---------------------------------------------------------------------------
// Wire types

struct StateSnapshot {
    struct RobotView {
        std::string id;
        double x = 0.0;
        double y = 0.0;
        double theta = 0.0;
        double rssi_dbm = 0.0;  // 0 while not associated
        std::optional<std::string> ap;
        bool operator==(const RobotView&) const = default;
    };
    struct ApView {
        std::string id;
        double x = 0.0;
        double y = 0.0;
        bool operator==(const ApView&) const = default;
    };

    SimTime t{};
    std::vector<RobotView> robots;
    std::vector<ApView> aps;
    std::int64_t delivered = 0;
    std::int64_t discarded = 0;

    bool operator==(const StateSnapshot&) const = default;
};

// {"t_ns", "robots":[{"id","x","y","theta","rssi","ap"}], "aps":[{"id","x","y"}],
//  "counters":{"delivered","discarded"}}; "ap" is null while unassociated.
std::string to_json_string(const StateSnapshot& snapshot);

struct TeleopCommand {
    std::string robot;
    double v = 0.0;
    double w = 0.0;
    std::int64_t stamp_ms = 0;  // client wall clock, informational
};
struct PauseRequest {};
struct ResumeRequest {};
struct ResetRequest {};
using ClientFrame = std::variant<TeleopCommand, PauseRequest, ResumeRequest, ResetRequest>;

// Throws ParseError for malformed JSON and ValidationError for frames that
// do not match the schema.
ClientFrame parse_client_frame(std::string_view text);

struct Accepted {};
struct Rejected {
    std::string reason;
};
using InjectResult = std::variant<Accepted, Rejected>;

std::string rejection_frame(const std::string& reason);

// ---------------------------------------------------------------------------
// Live simulation

// Owns the world and the coordinator of a live run. submit(), snapshot() and
// running() may be called from any thread; tick() and finish() belong to the
// coordinator thread.
class LiveSim {
public:
    static constexpr std::size_t kCommandBytes = 48;

    explicit LiveSim(ScenarioConfig cfg, TraceSink* trace = nullptr);
    ~LiveSim();
    LiveSim(const LiveSim&) = delete;
    LiveSim& operator=(const LiveSim&) = delete;

    // Validates and queues a frame for the next step boundary.
    InjectResult submit(ClientFrame frame);

    // Applies queued frames, advances one physics step unless paused and
    // publishes a snapshot. After an error the run stays halted.
    void tick();

    // Emits in-flight rows, flushes traces and returns the final report.
    RunReport finish();

    std::shared_ptr<const StateSnapshot> snapshot() const;
    bool paused() const noexcept { return paused_.load(); }
    bool failed() const noexcept { return failed_.load(); }
    // True while time advances: not paused and not failed.
    bool running() const noexcept { return !paused() && !failed(); }

    const ScenarioConfig& config() const noexcept { return cfg_; }
    Duration physics_step() const noexcept { return cfg_.sync.physics_step; }

    // Coordinator-thread access, for tests and the final report.
    Coordinator& coordinator() noexcept { return *coord_; }

private:
    class TeleopApp;

    void apply(const ClientFrame& frame);
    void reset();
    void publish();

    ScenarioConfig cfg_;
    World world_;
    std::vector<Robot> initial_robots_;
    std::vector<Plant> initial_plants_;
    std::set<std::string> robot_ids_;
    std::unique_ptr<TeleopApp> app_;
    std::unique_ptr<FlowApp> flows_;
    std::unique_ptr<Coordinator> coord_;

    std::mutex queue_mutex_;
    std::deque<ClientFrame> queue_;

    mutable std::mutex snapshot_mutex_;
    std::shared_ptr<const StateSnapshot> snapshot_;

    std::atomic<bool> paused_{false};
    std::atomic<bool> failed_{false};
    std::string error_;
};

// ---------------------------------------------------------------------------
// Service

struct GatewayOptions {
    std::string address = "127.0.0.1";
    unsigned short port = 0;  // 0 picks a free port
    std::filesystem::path out_dir;  // traces, resolved.json, run_report.json
};

// WebSocket snapshot stream and command ingestion plus plain HTTP endpoints
// on a single port. One I/O thread, one coordinator thread paced at
// real time.
class Gateway {
public:
    Gateway(ScenarioConfig cfg, GatewayOptions options);
    ~Gateway();
    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    // Binds and starts both threads. Throws BindError.
    void start();
    // Stops stepping, writes run_report.json, closes every socket. Idempotent.
    RunReport stop();
    // Blocks until SIGINT/SIGTERM, then stops.
    RunReport wait_for_signal();

    unsigned short port() const noexcept;
    LiveSim& sim() noexcept;

    struct Impl;  // opaque; defined next to the socket sessions

private:
    std::unique_ptr<Impl> impl_;
};

// serve(): start, block until a signal, stop.
RunReport serve(const ScenarioConfig& cfg, unsigned short port,
                const std::filesystem::path& out_dir, const std::string& address = "127.0.0.1");

}  // namespace cosim
