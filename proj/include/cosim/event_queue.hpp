#pragma once

#include <cstdint>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "cosim/sim_time.hpp"

namespace cosim {

enum class EventKind { PhysicsStep, PacketArrival, AssociationScan, TraceSample, Custom };

const char* to_string(EventKind kind) noexcept;

struct Event {
    SimTime at{};
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Custom;
    std::string tag;            // sub-type for Custom events
    std::uint64_t payload = 0;  // opaque handle owned by whoever scheduled it
};

// Min-queue over (at, seq). seq is assigned at insertion, which makes the
// order total and reproducible for simultaneous events.
class EventQueue {
public:
    // Returns the sequence number given to the event. Throws
    // SchedulingInPast if at < now().
    std::uint64_t schedule(SimTime at, EventKind kind, std::string tag = {},
                           std::uint64_t payload = 0);

    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    const Event& top() const;

    // Removes the earliest event and advances now() to its timestamp.
    Event pop();

    // Pops the earliest event if its timestamp is <= limit.
    std::optional<Event> pop_until(SimTime limit);

    SimTime now() const noexcept { return now_; }
    // Moves the clock forward without consuming events. Never backwards.
    void advance_to(SimTime t);

    void clear() noexcept;

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const noexcept {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> heap_;
    SimTime now_{};
    std::uint64_t next_seq_ = 0;
};

}  // namespace cosim
