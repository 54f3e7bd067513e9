#include "cosim/apps.hpp"

#include <cstring>

namespace cosim {

std::vector<std::uint8_t> encode_doubles(std::initializer_list<double> values) {
    std::vector<std::uint8_t> out(values.size() * sizeof(double));
    std::size_t offset = 0;
    for (double v : values) {
        std::memcpy(out.data() + offset, &v, sizeof v);
        offset += sizeof v;
    }
    return out;
}

std::vector<double> decode_doubles(const std::vector<std::uint8_t>& bytes) {
    std::vector<double> out(bytes.size() / sizeof(double));
    std::memcpy(out.data(), bytes.data(), out.size() * sizeof(double));
    return out;
}

void FlowApp::on_start(Coordinator& c) {
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        c.schedule_timer(*this, c.event_time() + flows_[i].period, i);
    }
}

void FlowApp::on_timer(Coordinator& c, std::uint64_t token, SimTime at) {
    const FlowSpec& f = flows_.at(token);
    c.send(f.src, f.dst, f.size_bytes, {}, f.profile);
    c.schedule_timer(*this, at + f.period, token);
}

void DelayProbeApp::on_start(Coordinator& c) { c.schedule_timer(*this, c.event_time(), 0); }

void DelayProbeApp::on_timer(Coordinator& c, std::uint64_t, SimTime at) {
    c.send(spec_.src, spec_.dst, 0, {}, profile_);
    if (++sent_ < spec_.packets) {
        c.schedule_timer(*this, at + spec_.interval, 0);
    }
}

void DelayProbeApp::on_deliver(Coordinator&, const Packet& p, SimTime at) {
    if (p.src != spec_.src) return;
    samples_.push_back({p.id, p.sent_sim, at - p.sent_sim});
}

namespace {
enum : std::uint64_t { kSensorTick = 0, kControlTick = 1 };
}

PendulumLoopApp::PendulumLoopApp(Case2Spec spec) : spec_(std::move(spec)) {
    pid_.gains = spec_.gains;
}

void PendulumLoopApp::on_start(Coordinator& c) {
    const SimTime t0 = c.event_time();
    theta_.emplace_back(t0, c.physics().plant(spec_.plant).state.theta);
    // Sensor before control at equal timestamps: the controller acts on
    // whatever reached it by then.
    c.schedule_timer(*this, t0, kSensorTick);
    c.schedule_timer(*this, t0, kControlTick);
}

void PendulumLoopApp::on_timer(Coordinator& c, std::uint64_t token, SimTime at) {
    if (token == kSensorTick) {
        const CartPoleState& s = c.physics().plant(spec_.plant).state;
        c.send(spec_.plant, spec_.controller, spec_.sensor_bytes,
               encode_doubles({s.theta, s.theta_dot, s.x, s.x_dot}), spec_.profile);
    } else if (last_theta_) {
        auto [next, force] = pid_step(pid_, *last_theta_, spec_.control_period);
        pid_ = next;
        c.send(spec_.controller, spec_.plant, spec_.control_bytes, encode_doubles({force}),
               spec_.profile);
    }
    c.schedule_timer(*this, at + spec_.control_period, token);
}

void PendulumLoopApp::on_deliver(Coordinator& c, const Packet& p, SimTime) {
    const std::vector<double> values = decode_doubles(p.payload);
    if (values.empty()) return;
    if (p.dst == spec_.controller) {
        last_theta_ = values[0];
    } else if (p.dst == spec_.plant) {
        c.physics().plant(spec_.plant).applied_force = values[0];
    }
}

void PendulumLoopApp::on_step(Coordinator& c) {
    theta_.emplace_back(c.now(), c.physics().plant(spec_.plant).state.theta);
}

}  // namespace cosim
