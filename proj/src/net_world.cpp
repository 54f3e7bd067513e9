#include "cosim/net_world.hpp"

#include <algorithm>
#include <cmath>

#include "cosim/error.hpp"

namespace cosim {

double uniform01(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

const char* to_string(NodeKind kind) noexcept {
    switch (kind) {
        case NodeKind::Station: return "station";
        case NodeKind::AccessPoint: return "access_point";
        case NodeKind::WiredHost: return "wired_host";
    }
    return "unknown";
}

std::string describe(const AssocState& state) {
    if (std::holds_alternative<Unassociated>(state)) return "unassociated";
    if (std::holds_alternative<Scanning>(state)) return "scanning";
    return "associated";
}

void AssociationParams::validate(const std::string& field) const {
    for (const auto& [name, value] : {std::pair{"assoc_threshold_dbm", assoc_threshold_dbm},
                                      {"sensitivity_dbm", sensitivity_dbm}}) {
        if (!std::isfinite(value)) {
            throw ValidationError(field + "." + name, "must be finite");
        }
    }
    if (!(hysteresis_db >= 0.0) || !std::isfinite(hysteresis_db)) {
        throw ValidationError(field + ".hysteresis_db", "must be >= 0");
    }
    if (handover_gap < Duration::zero()) {
        throw ValidationError(field + ".handover_gap", "must be >= 0");
    }
    if (scan_interval <= Duration::zero()) {
        throw ValidationError(field + ".scan_interval", "must be > 0");
    }
    if (!(scan_epsilon_m >= 0.0) || !std::isfinite(scan_epsilon_m)) {
        throw ValidationError(field + ".scan_epsilon_m", "must be >= 0");
    }
}

double LossProfile::loss_at(SimTime t) const noexcept {
    double p = base_loss;
    for (const CongestionWindow& w : congestion_schedule) {
        if (w.start <= t && t < w.end) {
            p += w.extra_loss;
        }
    }
    return std::clamp(p, 0.0, 1.0);
}

void LossProfile::validate(const std::string& field) const {
    const auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!probability(base_loss)) {
        throw ValidationError(field + ".base_loss", "must be a probability in [0, 1]");
    }
    if (fixed_latency < Duration::zero()) {
        throw ValidationError(field + ".fixed_latency", "must be >= 0");
    }
    if (jitter < Duration::zero()) {
        throw ValidationError(field + ".jitter", "must be >= 0");
    }
    if (!(bitrate_bps > 0.0) || !std::isfinite(bitrate_bps)) {
        throw ValidationError(field + ".bitrate_bps", "must be > 0");
    }
    std::vector<CongestionWindow> sorted = congestion_schedule;
    for (std::size_t i = 0; i < congestion_schedule.size(); ++i) {
        const auto& w = congestion_schedule[i];
        const std::string at = field + ".congestion_schedule[" + std::to_string(i) + "]";
        if (!(w.start < w.end)) {
            throw ValidationError(at, "start must be before end");
        }
        if (!probability(w.extra_loss)) {
            throw ValidationError(at + ".extra_loss", "must be a probability in [0, 1]");
        }
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i].start < sorted[i - 1].end) {
            throw ValidationError(field + ".congestion_schedule", "intervals overlap");
        }
    }
}

double rssi(const NetNode& tx, const NetNode& rx, const PropagationModel& model) {
    return received_power_dbm(tx.radio, rx.radio, distance(tx.position, rx.position), model);
}

NetWorld::NetWorld(PropagationModel model, AssociationParams params, std::uint64_t seed)
    : model_(model), params_(params), rng_(seed) {}

void NetWorld::add_node(NetNode node) {
    if (index_.contains(node.id)) {
        throw ValidationError("nodes." + node.id, "duplicate node id");
    }
    if (node.kind == NodeKind::Station) {
        stations_[node.id] = StationState{Unassociated{}, node.position};
    }
    index_[node.id] = nodes_.size();
    nodes_.push_back(std::move(node));
}

const NetNode& NetWorld::node(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode(id);
    return nodes_[it->second];
}

NetNode& NetWorld::mutable_node(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw UnknownNode(id);
    return nodes_[it->second];
}

double NetWorld::rssi(const std::string& tx, const std::string& rx) const {
    return cosim::rssi(node(tx), node(rx), model_);
}

const AssocState& NetWorld::association(const std::string& station) const {
    auto it = stations_.find(station);
    if (it == stations_.end()) throw UnknownNode(station);
    return it->second.assoc;
}

std::optional<std::string> NetWorld::associated_ap(const std::string& station) const {
    if (const auto* a = std::get_if<Associated>(&association(station))) {
        return a->ap;
    }
    return std::nullopt;
}

double NetWorld::reported_rssi(const std::string& station) const {
    if (auto ap = associated_ap(station)) {
        return rssi(*ap, station);
    }
    return 0.0;
}

std::optional<std::string> NetWorld::strongest_ap(const NetNode& station, double& best) const {
    std::optional<std::string> best_id;
    for (const NetNode& n : nodes_) {
        if (n.kind != NodeKind::AccessPoint) continue;
        const double r = cosim::rssi(n, station, model_);
        if (!best_id || r > best) {
            best = r;
            best_id = n.id;
        }
    }
    return best_id;
}

std::vector<AssocTransition> NetWorld::associate_initial(SimTime now) {
    std::vector<AssocTransition> out;
    for (auto& [id, st] : stations_) {
        if (!std::holds_alternative<Unassociated>(st.assoc)) continue;
        const NetNode& sta = node(id);
        double best = 0.0;
        auto ap = strongest_ap(sta, best);
        st.scan_anchor = sta.position;
        if (ap && best >= params_.assoc_threshold_dbm) {
            AssocState next = Associated{*ap};
            out.push_back({now, id, st.assoc, next, sta.position});
            st.assoc = std::move(next);
        }
    }
    return out;
}

std::vector<AssocTransition> NetWorld::association_scan(SimTime now) {
    std::vector<AssocTransition> out;
    for (auto& [id, st] : stations_) {
        const NetNode& sta = node(id);
        st.scan_anchor = sta.position;
        double best = 0.0;
        const auto candidate = strongest_ap(sta, best);
        const bool candidate_ok = candidate && best >= params_.assoc_threshold_dbm;

        std::optional<AssocState> next;
        if (const auto* a = std::get_if<Associated>(&st.assoc)) {
            const double current = cosim::rssi(node(a->ap), sta, model_);
            if (current < params_.assoc_threshold_dbm) {
                next = Unassociated{};
            } else if (candidate && *candidate != a->ap &&
                       best > current + params_.hysteresis_db) {
                next = Scanning{now + params_.handover_gap};
            }
        } else if (const auto* s = std::get_if<Scanning>(&st.assoc)) {
            if (now >= s->until) {
                next = candidate_ok ? AssocState{Associated{*candidate}} : AssocState{Unassociated{}};
            }
        } else if (candidate_ok) {
            next = Scanning{now + params_.handover_gap};
        }

        if (next) {
            out.push_back({now, id, st.assoc, *next, sta.position});
            st.assoc = std::move(*next);
        }
    }
    return out;
}

std::vector<AssocTransition> NetWorld::mobility_update(std::span<const RobotState> states,
                                                       SimTime now) {
    bool rescan = false;
    for (const RobotState& s : states) {
        NetNode& n = mutable_node(s.id);
        if (n.kind != NodeKind::Station) {
            throw UnknownNode(s.id);
        }
        n.position = Pose2D{s.pose.x, s.pose.y, 0.0};
        if (distance(n.position, stations_.at(s.id).scan_anchor) > params_.scan_epsilon_m) {
            rescan = true;
        }
    }
    if (!rescan) {
        return {};
    }
    return association_scan(now);
}

std::optional<std::string> NetWorld::serving_ap(const NetNode& n) const {
    switch (n.kind) {
        case NodeKind::AccessPoint: return n.id;
        case NodeKind::WiredHost: return n.uplink_ap;
        case NodeKind::Station: return associated_ap(n.id);
    }
    return std::nullopt;
}

DeliveryOutcome NetWorld::send(const Packet& packet, const LossProfile& profile, Rng& rng) const {
    const NetNode& src = node(packet.src);
    const NetNode& dst = node(packet.dst);

    // Draw first and unconditionally: see header.
    const double loss_draw = uniform01(rng);
    const double jitter_draw = uniform01(rng);

    const auto src_ap = serving_ap(src);
    const auto dst_ap = serving_ap(dst);
    if (!src_ap || !dst_ap) {
        return Dropped{"unassociated"};
    }

    bool wireless = false;
    for (const NetNode* n : {&src, &dst}) {
        if (n->kind != NodeKind::Station) continue;
        wireless = true;
        const NetNode& ap = node(n == &src ? *src_ap : *dst_ap);
        if (cosim::rssi(ap, *n, model_) < params_.sensitivity_dbm) {
            return Dropped{"below sensitivity"};
        }
    }

    if (wireless && loss_draw < profile.loss_at(packet.sent_sim)) {
        return Dropped{"loss"};
    }

    const auto tx_ns = static_cast<std::int64_t>(
        std::llround(static_cast<double>(packet.size_bytes) * 8.0 * 1e9 / profile.bitrate_bps));
    Duration delay = Duration{tx_ns} + profile.fixed_latency;
    if (profile.jitter > Duration::zero()) {
        const std::int64_t span = 2 * profile.jitter.count() + 1;
        const auto offset = static_cast<std::int64_t>(jitter_draw * static_cast<double>(span));
        delay += Duration{offset - profile.jitter.count()};
    }
    if (*src_ap != *dst_ap) {
        delay += kBackhaulLatency;
    }
    const SimTime arrival = packet.sent_sim + delay;
    return Scheduled{std::max(arrival, packet.sent_sim)};
}

void NetWorld::clear_associations() {
    for (auto& [id, st] : stations_) {
        st.assoc = Unassociated{};
        st.scan_anchor = node(id).position;
    }
}

void NetWorld::set_position(const std::string& id, const Pose2D& pose) {
    NetNode& n = mutable_node(id);
    n.position = Pose2D{pose.x, pose.y, 0.0};
}

}  // namespace cosim
