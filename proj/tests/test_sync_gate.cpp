#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cosim/error.hpp"
#include "cosim/sync_gate.hpp"
#include "support/gen.hpp"

using namespace cosim;
using namespace std::chrono_literals;

TEST_CASE("on-time packet is held until its deadline") {
    const GateDecision d = gate(sim_time_ns(1'000), Duration{500}, sim_time_ns(1'200));
    REQUIRE(d.released());
    CHECK(d.wait() == Duration{300});
}

TEST_CASE("packet exactly at its deadline is released with zero wait") {
    const GateDecision d = gate(kSimStart + 1s, 1s, kSimStart + 2s);
    REQUIRE(d.released());
    CHECK(d.wait() == Duration::zero());
}

TEST_CASE("late packet is discarded") {
    const GateDecision d = gate(kSimStart, 1s, kSimStart + 1s + 1ns);
    CHECK_FALSE(d.released());
    CHECK(std::get<Discard>(d.verdict).reason == "missed deadline");
}

TEST_CASE("property: release iff now <= sent + delay, wait exact") {
    testing::Gen g(99);
    for (int i = 0; i < testing::kCases * 5; ++i) {
        const std::int64_t sent = g.integer(0, 1'000'000'000'000);
        const std::int64_t delay = g.integer(0, 10'000'000'000);
        const std::int64_t now = sent + g.integer(-1'000, delay + 1'000);
        CAPTURE(sent);
        CAPTURE(delay);
        CAPTURE(now);
        const GateDecision d = gate(sim_time_ns(sent), Duration{delay}, sim_time_ns(now));
        CHECK(d.released() == (now <= sent + delay));
        if (d.released()) CHECK(d.wait().count() == sent + delay - now);
    }
}

TEST_CASE("virtual wall clock scales by 1/rho") {
    CHECK(wall_at(kSimStart + 1s, 0.5) == 2s);
    CHECK(sim_at_wall(2s, 0.5) == kSimStart + 1s);
    CHECK(wall_at(kSimStart + 3s, 1.0) == 3s);
}

TEST_CASE("hand-off lands rho * N * delay after the send") {
    SyncConfig cfg;
    cfg.real_time_factor = 0.5;
    cfg.time_scale = 1;
    CHECK(handoff_time(kSimStart + 1s, 1s, cfg) == kSimStart + 1500ms);
    cfg.time_scale = 2;
    CHECK(handoff_time(kSimStart + 1s, 1s, cfg) == kSimStart + 2s);
    cfg.real_time_factor = 1.0;
    cfg.time_scale = 1;
    CHECK(handoff_time(kSimStart + 7ms, 3ms, cfg) == kSimStart + 10ms);
}

TEST_CASE("property: hand-off is never before the send") {
    testing::Gen g(5);
    SyncConfig cfg;
    for (int i = 0; i < testing::kCases; ++i) {
        cfg.real_time_factor = g.real(0.01, 1.0);
        cfg.time_scale = static_cast<int>(g.integer(1, 8));
        const SimTime sent = sim_time_ns(g.integer(0, 100'000'000'000));
        const Duration delay{g.integer(0, 2'000'000'000)};
        CHECK(handoff_time(sent, delay, cfg) >= sent);
    }
}

TEST_CASE("sync config validation names the field") {
    SyncConfig cfg;
    cfg.real_time_factor = 0.0;
    try {
        cfg.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.field() == "sync.real_time_factor");
    }
    cfg = {};
    cfg.physics_step = Duration::zero();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.time_scale = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK_THROWS_AS(sync_mode_from_string("sometimes"), ValidationError);
    CHECK(sync_mode_from_string("unsynchronized") == SyncMode::Unsynchronized);
}
