#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cosim/net_world.hpp"
#include "cosim/physics.hpp"
#include "cosim/propagation.hpp"
#include "cosim/sync_gate.hpp"

namespace cosim {

struct RobotSpec {
    std::string id;
    Pose2D pose;
    DiffDriveParams params;
    WaypointParams waypoint;
    std::vector<Pose2D> waypoints;
    RadioParams radio;
    bool operator==(const RobotSpec&) const = default;
};

struct PlantSpec {
    std::string id;
    Pose2D mount;
    CartPoleParams params;
    CartPoleState initial;
    RadioParams radio;
    bool operator==(const PlantSpec&) const = default;
};

// Static wireless node (e.g. the remote controller station).
struct StationSpec {
    std::string id;
    Pose2D pos;
    RadioParams radio;
    bool operator==(const StationSpec&) const = default;
};

struct ApSpec {
    std::string id;
    Pose2D pos;
    RadioParams radio;
    bool operator==(const ApSpec&) const = default;
};

// Host on an ethernet link to an AP.
struct HostSpec {
    std::string id;
    std::string ap;
    bool operator==(const HostSpec&) const = default;
};

struct FlowSpec {
    std::string src;
    std::string dst;
    Duration period{};
    std::size_t size_bytes = 0;
    std::string profile = "default";
    bool operator==(const FlowSpec&) const = default;
};

struct Case1Spec {
    std::string robot;
    std::vector<double> system_loss_sweep_db;  // empty: single run with the configured model
    bool operator==(const Case1Spec&) const = default;
};

struct Case2Spec {
    std::string plant;
    std::string controller;
    std::string profile = "default";
    std::vector<double> loss_grid;
    std::vector<std::uint64_t> seeds;
    PidGains gains;
    Duration control_period = std::chrono::milliseconds(10);
    std::size_t sensor_bytes = 64;
    std::size_t control_bytes = 32;
    double converge_band_rad = 0.01;
    Duration converge_window = std::chrono::seconds(2);
    bool write_traces = false;
    bool operator==(const Case2Spec&) const = default;
};

struct SyncValidationSpec {
    std::string src;
    std::string dst;
    int packets = 100;
    Duration interval = std::chrono::milliseconds(20);
    Duration net_delay = std::chrono::seconds(1);
    bool operator==(const SyncValidationSpec&) const = default;
};

struct GatewaySpec {
    std::string teleop_node = "teleop";
    std::string profile = "default";
    Duration command_timeout = std::chrono::milliseconds(500);
    double snapshot_hz = 10.0;
    std::string ui_dir;  // static teleop bundle; empty disables static hosting
    bool operator==(const GatewaySpec&) const = default;
};

struct ScenarioConfig {
    std::string name;
    Duration duration{};
    std::uint64_t seed = 0;
    std::string outputs = "out";
    SyncConfig sync;
    AssociationParams association;
    PropagationModel propagation = FreeSpace{};
    RadioParams radio_defaults;
    std::optional<Duration> trace_interval;

    std::vector<RobotSpec> robots;
    std::vector<PlantSpec> plants;
    std::vector<StationSpec> stations;
    std::vector<ApSpec> aps;
    std::vector<HostSpec> hosts;
    std::map<std::string, LossProfile> profiles;
    std::vector<FlowSpec> traffic;

    std::optional<Case1Spec> case1;
    std::optional<Case2Spec> case2;
    std::optional<SyncValidationSpec> sync_validation;
    GatewaySpec gateway;

    // Throws ValidationError naming the offending field.
    void validate() const;
    bool has_node(const std::string& id) const;

    bool operator==(const ScenarioConfig&) const = default;
};

// Throws ParseError for malformed JSON and ValidationError for bad content.
ScenarioConfig parse_scenario(const nlohmann::json& doc);
ScenarioConfig parse_scenario_text(const std::string& text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// Canonical, fully resolved form. parse_scenario(to_json(cfg)) == cfg.
nlohmann::ordered_json to_json(const ScenarioConfig& cfg);

// Writes <dir>/resolved.json.
void write_resolved(const ScenarioConfig& cfg, const std::filesystem::path& dir);

struct World {
    PhysicsWorld physics;
    NetWorld net;
};

// Instantiates physics bodies and network nodes. Every robot and plant gets
// a station with the same id.
World build_world(const ScenarioConfig& cfg);

}  // namespace cosim
