#include "cosim/event_queue.hpp"

#include "cosim/error.hpp"

namespace cosim {

const char* to_string(EventKind kind) noexcept {
    switch (kind) {
        case EventKind::PhysicsStep: return "physics_step";
        case EventKind::PacketArrival: return "packet_arrival";
        case EventKind::AssociationScan: return "association_scan";
        case EventKind::TraceSample: return "trace_sample";
        case EventKind::Custom: return "custom";
    }
    return "unknown";
}

std::uint64_t EventQueue::schedule(SimTime at, EventKind kind, std::string tag,
                                   std::uint64_t payload) {
    if (at < now_) {
        throw SchedulingInPast("event at " + std::to_string(to_ns(at)) +
                               "ns scheduled when now is " + std::to_string(to_ns(now_)) + "ns");
    }
    const std::uint64_t seq = next_seq_++;
    heap_.push(Event{at, seq, kind, std::move(tag), payload});
    return seq;
}

const Event& EventQueue::top() const {
    if (heap_.empty()) {
        throw Error("top() on empty event queue");
    }
    return heap_.top();
}

Event EventQueue::pop() {
    if (heap_.empty()) {
        throw Error("pop() on empty event queue");
    }
    Event ev = heap_.top();
    heap_.pop();
    now_ = ev.at;
    return ev;
}

std::optional<Event> EventQueue::pop_until(SimTime limit) {
    if (heap_.empty() || heap_.top().at > limit) {
        return std::nullopt;
    }
    return pop();
}

void EventQueue::advance_to(SimTime t) {
    if (t < now_) {
        throw SchedulingInPast("clock cannot move backwards");
    }
    if (!heap_.empty() && heap_.top().at < t) {
        // Leaving pending events behind would let them fire in the past.
        throw SchedulingInPast("advance_to would skip pending events");
    }
    now_ = t;
}

void EventQueue::clear() noexcept {
    heap_ = {};
}

}  // namespace cosim
