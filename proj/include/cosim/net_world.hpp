#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cosim/physics.hpp"
#include "cosim/propagation.hpp"
#include "cosim/sim_time.hpp"

namespace cosim {

using Rng = std::mt19937_64;

// Uniform in [0, 1) from the top 53 bits. Used instead of the standard
// distributions, whose algorithms differ between library implementations.
double uniform01(Rng& rng) noexcept;

enum class NodeKind { Station, AccessPoint, WiredHost };

const char* to_string(NodeKind kind) noexcept;

struct NetNode {
    std::string id;
    NodeKind kind = NodeKind::Station;
    Pose2D position;  // theta ignored
    RadioParams radio;
    std::string uplink_ap;  // WiredHost only: the AP its ethernet link ends at
};

struct Associated {
    std::string ap;
    bool operator==(const Associated&) const = default;
};
struct Scanning {
    SimTime until{};
    bool operator==(const Scanning&) const = default;
};
struct Unassociated {
    bool operator==(const Unassociated&) const = default;
};

// A station holds exactly one of these, so it can never be associated to
// two APs at once.
using AssocState = std::variant<Unassociated, Scanning, Associated>;

std::string describe(const AssocState& state);

struct AssocTransition {
    SimTime t{};
    std::string station;
    AssocState from;
    AssocState to;
    Pose2D position;  // station position when the transition happened
};

struct AssociationParams {
    double assoc_threshold_dbm = -90.0;
    double hysteresis_db = 4.0;
    Duration handover_gap = std::chrono::milliseconds(200);
    double sensitivity_dbm = -94.0;
    Duration scan_interval = std::chrono::milliseconds(100);
    double scan_epsilon_m = 0.5;

    void validate(const std::string& field) const;
    bool operator==(const AssociationParams&) const = default;
};

struct Packet {
    std::uint64_t id = 0;
    std::string src;
    std::string dst;
    std::size_t size_bytes = 0;
    std::vector<std::uint8_t> payload;
    SimTime sent_sim{};
};

struct CongestionWindow {
    SimTime start{};
    SimTime end{};
    double extra_loss = 0.0;
    bool operator==(const CongestionWindow&) const = default;
};

struct LossProfile {
    double base_loss = 0.0;
    Duration fixed_latency{};
    Duration jitter{};  // half-width of the uniform jitter
    double bitrate_bps = 54e6;
    std::vector<CongestionWindow> congestion_schedule;

    // Loss probability in effect at t, clamped to 1.
    double loss_at(SimTime t) const noexcept;
    void validate(const std::string& field) const;
    bool operator==(const LossProfile&) const = default;
};

struct Dropped {
    std::string reason;
    bool operator==(const Dropped&) const = default;
};
struct Scheduled {
    SimTime arrival{};
    bool operator==(const Scheduled&) const = default;
};
using DeliveryOutcome = std::variant<Dropped, Scheduled>;

inline constexpr Duration kBackhaulLatency = std::chrono::milliseconds(1);

// Received signal strength at rx for a transmission from tx.
double rssi(const NetNode& tx, const NetNode& rx, const PropagationModel& model);

class NetWorld {
public:
    NetWorld(PropagationModel model, AssociationParams params, std::uint64_t seed);

    void add_node(NetNode node);
    bool has_node(const std::string& id) const { return index_.contains(id); }
    const NetNode& node(const std::string& id) const;
    const std::vector<NetNode>& nodes() const noexcept { return nodes_; }

    const PropagationModel& model() const noexcept { return model_; }
    const AssociationParams& association_params() const noexcept { return params_; }

    double rssi(const std::string& tx, const std::string& rx) const;

    // rssi from the serving AP, or the sentinel 0 while scanning or
    // unassociated.
    double reported_rssi(const std::string& station) const;

    const AssocState& association(const std::string& station) const;
    std::optional<std::string> associated_ap(const std::string& station) const;

    // Binds every unassociated station in range to its strongest AP without
    // the scanning gap. Used once when a run starts.
    std::vector<AssocTransition> associate_initial(SimTime now);

    // One pass of the signal-level state machine over all stations.
    std::vector<AssocTransition> association_scan(SimTime now);

    // Copies robot poses onto the matching stations. Re-runs the scan when
    // any station has moved more than scan_epsilon since the last scan.
    std::vector<AssocTransition> mobility_update(std::span<const RobotState> states, SimTime now);

    // Route, loss and delay for one packet. Consumes exactly two draws from
    // rng per call so outcomes for the k-th packet line up across profiles.
    DeliveryOutcome send(const Packet& packet, const LossProfile& profile, Rng& rng) const;

    Rng& rng() noexcept { return rng_; }
    std::uint64_t next_packet_id() noexcept { return next_packet_id_++; }

    // Drops all associations; used by reset.
    void clear_associations();
    void set_position(const std::string& id, const Pose2D& pose);

private:
    struct StationState {
        AssocState assoc = Unassociated{};
        Pose2D scan_anchor;
    };

    std::optional<std::string> strongest_ap(const NetNode& station, double& best_rssi) const;
    std::optional<std::string> serving_ap(const NetNode& node) const;
    NetNode& mutable_node(const std::string& id);

    PropagationModel model_;
    AssociationParams params_;
    std::vector<NetNode> nodes_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, StationState> stations_;
    Rng rng_;
    std::uint64_t next_packet_id_ = 0;
};

}  // namespace cosim
