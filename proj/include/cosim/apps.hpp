#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cosim/coordinator.hpp"
#include "cosim/scenario.hpp"

namespace cosim {

// Periodic constant-size traffic, one timer per flow.
class FlowApp final : public Application {
public:
    explicit FlowApp(std::vector<FlowSpec> flows) : flows_(std::move(flows)) {}
    void on_start(Coordinator& c) override;
    void on_timer(Coordinator& c, std::uint64_t token, SimTime at) override;

private:
    std::vector<FlowSpec> flows_;
};

// Injects a fixed number of packets and records the sim-time delay the
// receiving application observes for each.
class DelayProbeApp final : public Application {
public:
    struct Sample {
        std::uint64_t packet = 0;
        SimTime sent{};
        Duration observed{};
    };

    DelayProbeApp(SyncValidationSpec spec, std::string profile)
        : spec_(std::move(spec)), profile_(std::move(profile)) {}

    void on_start(Coordinator& c) override;
    void on_timer(Coordinator& c, std::uint64_t token, SimTime at) override;
    void on_deliver(Coordinator& c, const Packet& p, SimTime at) override;

    const std::vector<Sample>& samples() const noexcept { return samples_; }
    bool done() const noexcept { return sent_ == spec_.packets; }

private:
    SyncValidationSpec spec_;
    std::string profile_;
    int sent_ = 0;
    std::vector<Sample> samples_;
};

// Networked PID loop around a cart-pole: the plant samples its state and
// sends it to the controller station, the controller answers with a force.
// Both sides hold the last value they received when packets are lost.
class PendulumLoopApp final : public Application {
public:
    explicit PendulumLoopApp(Case2Spec spec);

    void on_start(Coordinator& c) override;
    void on_timer(Coordinator& c, std::uint64_t token, SimTime at) override;
    void on_deliver(Coordinator& c, const Packet& p, SimTime at) override;
    void on_step(Coordinator& c) override;

    // (t, theta) after every physics step, starting with the initial state.
    const std::vector<std::pair<SimTime, double>>& theta_trace() const noexcept { return theta_; }

private:
    Case2Spec spec_;
    PidController pid_;
    std::optional<double> last_theta_;
    std::vector<std::pair<SimTime, double>> theta_;
};

// Encodes doubles as their IEEE-754 bytes (host order) for packet payloads.
std::vector<std::uint8_t> encode_doubles(std::initializer_list<double> values);
std::vector<double> decode_doubles(const std::vector<std::uint8_t>& bytes);

}  // namespace cosim
