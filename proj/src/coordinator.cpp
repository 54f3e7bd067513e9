#include "cosim/coordinator.hpp"

#include <thread>

#include <json.hpp>

#include "cosim/error.hpp"

namespace cosim {

namespace {

constexpr const char* kTagTimer = "timer";
constexpr const char* kTagHandoff = "handoff";
constexpr const char* kTagDeliver = "deliver";

std::string ap_of(const AssocState& s) {
    if (const auto* a = std::get_if<Associated>(&s)) return a->ap;
    return {};
}

}  // namespace

std::string to_json_string(const RunReport& report) {
    nlohmann::ordered_json j;
    j["steps"] = report.steps;
    j["packets_sent"] = report.packets_sent;
    j["delivered"] = report.delivered;
    j["discarded"] = report.discarded;
    j["dropped"] = report.dropped;
    j["final_time_ns"] = to_ns(report.final_time);
    j["final_wall_ns"] = report.final_wall.count();
    j["aborted"] = report.aborted();
    if (report.aborted()) {
        j["error"] = report.error;
    }
    return j.dump();
}

Coordinator::Coordinator(PhysicsWorld& physics, NetWorld& net, SyncConfig cfg,
                         std::map<std::string, LossProfile> profiles, TraceSink* trace,
                         CoordinatorOptions options)
    : physics_(physics),
      net_(net),
      cfg_(cfg),
      profiles_(std::move(profiles)),
      trace_(trace),
      trace_interval_(options.trace_interval.value_or(cfg.physics_step)) {
    cfg_.validate();
    if (trace_interval_ <= Duration::zero() || trace_interval_ % cfg_.physics_step != Duration::zero()) {
        throw ValidationError("trace.interval", "must be a positive multiple of the physics step");
    }
}

void Coordinator::add_application(Application& app, std::vector<std::string> nodes) {
    apps_.push_back(&app);
    for (auto& n : nodes) {
        if (!net_.has_node(n)) {
            throw UnknownNode(n);
        }
        receivers_[n] = &app;
    }
}

void Coordinator::start() {
    started_ = true;
    restart_pacing();
    for (const RobotState& s : station_states()) {
        net_.set_position(s.id, s.pose);
    }
    trace_transitions(net_.associate_initial(now_));
    sample(now_);
    queue_.schedule(now_ + net_.association_params().scan_interval, EventKind::AssociationScan);
    queue_.schedule(now_ + trace_interval_, EventKind::TraceSample);
    for (Application* app : apps_) {
        app->on_start(*this);
    }
    // Sends issued from on_start happen at t = 0 and are resolved in the
    // first step like every other event.
    if (trace_) trace_->commit();
}

void Coordinator::begin() {
    if (!started_) {
        start();
    }
}

void Coordinator::step() {
    begin();
    const SimTime next = now_ + cfg_.physics_step;
    physics_.step(cfg_.physics_step);
    now_ = next;
    ++report_.steps;

    trace_transitions(net_.mobility_update(station_states(), now_));

    while (auto ev = queue_.pop_until(now_)) {
        handle(*ev);
    }
    queue_.advance_to(now_);

    for (Application* app : apps_) {
        app->on_step(*this);
    }

    report_.final_time = now_;
    report_.final_wall = wall_at(now_, cfg_.real_time_factor);
    if (trace_) trace_->commit();
    pace();
}

RunReport Coordinator::run_until(SimTime until) {
    try {
        while (now_ < until) {
            step();
        }
    } catch (const std::exception& e) {
        report_.error = e.what();
    }
    report_.final_time = now_;
    report_.final_wall = wall_at(now_, cfg_.real_time_factor);
    return report_;
}

void Coordinator::finish() {
    for (const auto& [id, f] : in_flight_) {
        trace_packet(f.packet, now_, "in_flight", f.arrival - f.packet.sent_sim, "");
    }
    if (trace_) trace_->commit();
}

void Coordinator::restart_pacing() {
    pacing_origin_ = std::chrono::steady_clock::now();
    pacing_sim_origin_ = now_;
}

void Coordinator::pace() {
    if (!cfg_.emulate_stall || cfg_.real_time_factor >= 1.0) {
        return;
    }
    const Duration wall = wall_at(now_, cfg_.real_time_factor) -
                          wall_at(pacing_sim_origin_, cfg_.real_time_factor);
    std::this_thread::sleep_until(pacing_origin_ +
                                  std::chrono::duration_cast<std::chrono::steady_clock::duration>(wall));
}

std::vector<RobotState> Coordinator::station_states() const {
    std::vector<RobotState> states = physics_.robot_states();
    for (const Plant& p : physics_.plants()) {
        RobotState s;
        s.id = p.id;
        s.pose = Pose2D{p.mount.x + p.state.x, p.mount.y, 0.0};
        states.push_back(std::move(s));
    }
    return states;
}

std::uint64_t Coordinator::send(const std::string& src, const std::string& dst,
                                std::size_t size_bytes, std::vector<std::uint8_t> payload,
                                const std::string& profile) {
    auto prof = profiles_.find(profile);
    if (prof == profiles_.end()) {
        throw ValidationError("profile", "unknown loss profile '" + profile + "'");
    }
    Packet p;
    p.id = net_.next_packet_id();
    p.src = src;
    p.dst = dst;
    p.size_bytes = size_bytes;
    p.payload = std::move(payload);
    p.sent_sim = queue_.now();
    ++report_.packets_sent;

    const DeliveryOutcome outcome = net_.send(p, prof->second, net_.rng());
    if (const auto* d = std::get_if<Dropped>(&outcome)) {
        ++report_.dropped;
        trace_packet(p, p.sent_sim, "dropped", Duration::zero(), d->reason);
        return p.id;
    }
    const SimTime arrival = std::get<Scheduled>(outcome).arrival;
    const SimTime handoff = handoff_time(p.sent_sim, arrival - p.sent_sim, cfg_);
    const std::uint64_t id = p.id;
    in_flight_.emplace(id, InFlight{std::move(p), arrival, profile});
    queue_.schedule(handoff, EventKind::PacketArrival, kTagHandoff, id);
    return id;
}

void Coordinator::schedule_timer(Application& app, SimTime at, std::uint64_t token) {
    const std::uint64_t id = next_timer_++;
    timers_[id] = Timer{&app, token};
    queue_.schedule(at, EventKind::Custom, kTagTimer, id);
}

void Coordinator::trace(TraceRecord record) {
    if (trace_) trace_->append(std::move(record));
}

void Coordinator::handle(const Event& ev) {
    switch (ev.kind) {
        case EventKind::AssociationScan:
            trace_transitions(net_.association_scan(ev.at));
            queue_.schedule(ev.at + net_.association_params().scan_interval,
                            EventKind::AssociationScan);
            break;
        case EventKind::TraceSample:
            sample(ev.at);
            queue_.schedule(ev.at + trace_interval_, EventKind::TraceSample);
            break;
        case EventKind::Custom: {
            if (ev.tag != kTagTimer) break;
            auto it = timers_.find(ev.payload);
            if (it == timers_.end()) break;
            const Timer t = it->second;
            timers_.erase(it);
            t.app->on_timer(*this, t.token, ev.at);
            break;
        }
        case EventKind::PacketArrival: {
            if (ev.tag == kTagDeliver) {
                deliver(ev.payload, ev.at);
                break;
            }
            auto it = in_flight_.find(ev.payload);
            if (it == in_flight_.end()) break;
            const InFlight& f = it->second;
            if (cfg_.mode == SyncMode::Unsynchronized) {
                deliver(ev.payload, ev.at);
                break;
            }
            const GateDecision decision =
                gate(f.packet.sent_sim, f.arrival - f.packet.sent_sim, ev.at);
            if (!decision.released()) {
                ++report_.discarded;
                trace_packet(f.packet, ev.at, "discarded", ev.at - f.packet.sent_sim,
                             std::get<Discard>(decision.verdict).reason);
                in_flight_.erase(it);
            } else if (decision.wait() == Duration::zero()) {
                deliver(ev.payload, ev.at);
            } else {
                queue_.schedule(ev.at + decision.wait(), EventKind::PacketArrival, kTagDeliver,
                                ev.payload);
            }
            break;
        }
        case EventKind::PhysicsStep:
            break;
    }
}

void Coordinator::deliver(std::uint64_t packet_id, SimTime at) {
    auto it = in_flight_.find(packet_id);
    if (it == in_flight_.end()) return;
    const Packet packet = std::move(it->second.packet);
    in_flight_.erase(it);
    ++report_.delivered;
    trace_packet(packet, at, "delivered", at - packet.sent_sim, "");
    if (auto r = receivers_.find(packet.dst); r != receivers_.end()) {
        r->second->on_deliver(*this, packet, at);
    }
}

void Coordinator::sample(SimTime at) {
    if (!trace_) return;
    for (const Robot& r : physics_.robots()) {
        const RobotState& s = r.state;
        trace_->append({at, s.id, TraceKind::Pose,
                        {s.pose.x, s.pose.y, s.pose.theta, s.v, s.w}});
    }
    for (const NetNode& n : net_.nodes()) {
        if (n.kind != NodeKind::Station) continue;
        const auto ap = net_.associated_ap(n.id);
        trace_->append({at, n.id, TraceKind::Rssi,
                        {n.position.x, n.position.y, net_.reported_rssi(n.id), ap.value_or("")}});
    }
    for (const Plant& p : physics_.plants()) {
        const CartPoleState& s = p.state;
        trace_->append({at, p.id, TraceKind::Control,
                        {s.x, s.x_dot, s.theta, s.theta_dot, p.applied_force}});
    }
}

void Coordinator::trace_transitions(const std::vector<AssocTransition>& transitions) {
    if (!trace_) return;
    for (const AssocTransition& t : transitions) {
        std::string ap = ap_of(t.to);
        if (ap.empty()) ap = ap_of(t.from);
        trace_->append({t.t, t.station, TraceKind::Assoc,
                        {describe(t.from), describe(t.to), ap, t.position.x, t.position.y}});
    }
}

void Coordinator::trace_packet(const Packet& p, SimTime at, const char* event, Duration delay,
                               const std::string& reason) {
    if (!trace_) return;
    trace_->append({at, p.src, TraceKind::Packet,
                    {static_cast<std::int64_t>(p.id), p.dst, std::string(event),
                     to_ns(p.sent_sim), delay.count(), reason}});
}

RunReport run_lockstep(PhysicsWorld& physics, NetWorld& net, const SyncConfig& cfg, SimTime until,
                       std::map<std::string, LossProfile> profiles, TraceSink* trace) {
    if (until <= kSimStart) {
        throw Error("run_lockstep: until must be > 0");
    }
    Coordinator c(physics, net, cfg, std::move(profiles), trace);
    RunReport report = c.run_until(until);
    c.finish();
    return report;
}

}  // namespace cosim
