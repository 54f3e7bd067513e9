#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "cosim/error.hpp"
#include "cosim/physics.hpp"
#include "support/gen.hpp"

using namespace cosim;
using namespace std::chrono_literals;

namespace {

constexpr double kPi = std::numbers::pi;

// Total mechanical energy of a cart with a uniform pole of half-length l,
// pole centre at (x + l sin(theta), l cos(theta)).
double energy(const CartPoleState& s, const CartPoleParams& p) {
    const double M = p.cart_mass, m = p.pole_mass, l = p.half_length;
    return 0.5 * (M + m) * s.x_dot * s.x_dot + m * l * std::cos(s.theta) * s.x_dot * s.theta_dot +
           (2.0 / 3.0) * m * l * l * s.theta_dot * s.theta_dot + m * p.gravity * l * std::cos(s.theta);
}

// Accelerations from the Lagrangian mass matrix, solved by Cramer's rule.
std::pair<double, double> lagrange_accel(const CartPoleState& s, double force, const CartPoleParams& p) {
    const double M = p.cart_mass, m = p.pole_mass, l = p.half_length;
    const double c = std::cos(s.theta), sn = std::sin(s.theta);
    const double a11 = M + m, a12 = m * l * c, a22 = (4.0 / 3.0) * m * l * l;
    const double b1 = force + m * l * sn * s.theta_dot * s.theta_dot;
    const double b2 = m * p.gravity * l * sn;
    const double det = a11 * a22 - a12 * a12;
    return {(b1 * a22 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det};
}

CartPoleState fine_euler(CartPoleState s, double force, double seconds, const CartPoleParams& p) {
    const double h = 1e-6;
    const int n = static_cast<int>(std::llround(seconds / h));
    for (int i = 0; i < n; ++i) {
        const auto [xdd, tdd] = lagrange_accel(s, force, p);
        s = {s.x + h * s.x_dot, s.x_dot + h * xdd, s.theta + h * s.theta_dot, s.theta_dot + h * tdd};
    }
    return s;
}

}  // namespace

TEST_CASE("normalize_angle maps into (-pi, pi]") {
    CHECK(normalize_angle(kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(-kPi) == doctest::Approx(kPi));
    CHECK(normalize_angle(3 * kPi / 2) == doctest::Approx(-kPi / 2));
    CHECK(normalize_angle(0.0) == 0.0);
}

TEST_CASE("property: normalize_angle is in range and preserves direction") {
    testing::Gen g(3);
    for (int i = 0; i < testing::kCases; ++i) {
        const double a = g.real(-1e4, 1e4);
        const double n = normalize_angle(a);
        CAPTURE(a);
        CHECK(n > -kPi);
        CHECK(n <= kPi);
        CHECK(std::cos(n) == doctest::Approx(std::cos(a)).epsilon(1e-9));
        CHECK(std::sin(n) == doctest::Approx(std::sin(a)).epsilon(1e-9));
    }
}

TEST_CASE("straight drive at full speed covers v * t") {
    DiffDriveParams params{1.0, 1.0, 100.0};
    RobotState s;
    s.v = 1.0;
    for (int i = 0; i < 100; ++i) s = step_diff_drive(s, {1.0, 0.0}, 10ms, params);
    CHECK(s.pose.x == doctest::Approx(1.0));
    CHECK(s.pose.y == doctest::Approx(0.0));
}

TEST_CASE("commands are clamped and v is slewed by the acceleration limit") {
    DiffDriveParams params{1.0, 0.5, 2.0};
    RobotState s;
    s = step_diff_drive(s, {10.0, 10.0}, 100ms, params);
    CHECK(s.v == doctest::Approx(0.2));
    CHECK(s.w == doctest::Approx(0.5));
    for (int i = 0; i < 20; ++i) s = step_diff_drive(s, {10.0, -10.0}, 100ms, params);
    CHECK(s.v == doctest::Approx(1.0));
    CHECK(s.w == doctest::Approx(-0.5));
}

TEST_CASE("non-finite commands are rejected") {
    RobotState s;
    CHECK_THROWS_AS(step_diff_drive(s, {std::nan(""), 0.0}, 10ms, {}), NonFiniteInput);
    CHECK_THROWS_AS(step_diff_drive(s, {0.0, INFINITY}, 10ms, {}), NonFiniteInput);
}

TEST_CASE("property: velocities stay within limits") {
    testing::Gen g(17);
    for (int i = 0; i < testing::kCases; ++i) {
        DiffDriveParams params{g.real(0.1, 5), g.real(0.1, 5), g.real(0.1, 10)};
        RobotState s;
        s.v = g.real(-params.v_max, params.v_max);
        const RobotState n =
            step_diff_drive(s, {g.real(-20, 20), g.real(-20, 20)}, Duration{g.integer(1'000'000, 100'000'000)}, params);
        CHECK(std::abs(n.v) <= params.v_max + 1e-12);
        CHECK(std::abs(n.w) <= params.w_max + 1e-12);
    }
}

TEST_CASE("waypoint follower reaches and stops on the goal") {
    DiffDriveParams params{1.0, 2.0, 1.0};
    RobotState s;
    std::deque<Pose2D> path{{5.0, 0.0, 0.0}};
    for (int i = 0; i < 2000 && !path.empty(); ++i) {
        s = follow_waypoints(s, path, 10ms, params).first;
    }
    CHECK(path.empty());
    CHECK(std::hypot(s.pose.x - 5.0, s.pose.y) <= 0.5);
}

TEST_CASE("waypoint follower turns toward a target behind it") {
    DiffDriveParams params{1.0, 1.0, 1.0};
    RobotState s;
    std::deque<Pose2D> path{{-5.0, 0.0, 0.0}, {-10.0, 0.0, 0.0}};
    const auto [next, cmd] = follow_waypoints(s, path, 10ms, params);
    CHECK(cmd.v == doctest::Approx(0.0));
    CHECK(std::abs(cmd.w) == doctest::Approx(1.0));
}

TEST_CASE("cart-pole at rest upright stays at rest") {
    const CartPoleState s = step_cart_pole({}, 0.0, 10ms, {});
    CHECK(s == CartPoleState{});
}

TEST_CASE("cart-pole energy drift over 10 s unforced is below 1e-6") {
    const CartPoleParams p;
    CartPoleState s{0.0, 0.0, 0.5, 0.0};
    const double e0 = energy(s, p);
    for (int i = 0; i < 10'000; ++i) s = step_cart_pole(s, 0.0, 1ms, p);
    CHECK(std::abs(energy(s, p) - e0) / std::abs(e0) <= 1e-6);
}

TEST_CASE("RK4 step agrees with a fine Euler integration of the Lagrangian") {
    const CartPoleParams p;
    testing::Gen g(41);
    for (int i = 0; i < 5; ++i) {
        const CartPoleState s0{g.real(-1, 1), g.real(-1, 1), g.real(-0.5, 0.5), g.real(-1, 1)};
        const double force = g.real(-5, 5);
        CartPoleState rk = s0;
        for (int k = 0; k < 10; ++k) rk = step_cart_pole(rk, force, 10ms, p);
        const CartPoleState ref = fine_euler(s0, force, 0.1, p);
        CHECK(std::abs(rk.x - ref.x) < 1e-4);
        CHECK(std::abs(rk.x_dot - ref.x_dot) < 1e-4);
        CHECK(std::abs(rk.theta - ref.theta) < 1e-4);
        CHECK(std::abs(rk.theta_dot - ref.theta_dot) < 1e-4);
    }
}

TEST_CASE("positive force under a tilted pole pushes it back toward upright") {
    const CartPoleState s{0.0, 0.0, 0.1, 0.0};
    const CartPoleState free = step_cart_pole(s, 0.0, 10ms, {});
    const CartPoleState pushed = step_cart_pole(s, 10.0, 10ms, {});
    CHECK(pushed.theta_dot < free.theta_dot);
}

TEST_CASE("cart-pole rejects non-finite input") {
    CHECK_THROWS_AS(step_cart_pole({}, std::nan(""), 10ms, {}), NonFiniteInput);
    CHECK_THROWS_AS(step_cart_pole({0, 0, INFINITY, 0}, 0.0, 10ms, {}), NonFiniteInput);
}

TEST_CASE("PID: no derivative kick on the first sample, clamped integral and output") {
    PidController c;
    c.gains = {2.0, 1.0, 0.5, 3.0, 0.05};
    auto [c1, u1] = pid_step(c, 1.0, 100ms);
    CHECK(u1 == doctest::Approx(2.0 + 0.05));
    CHECK(c1.integral == doctest::Approx(0.05));
    auto [c2, u2] = pid_step(c1, 2.0, 100ms);
    CHECK(u2 == doctest::Approx(3.0));  // 4 + 0.05 + 5 clamped to 3
    auto [c3, u3] = pid_step(c2, -1.0, 100ms);
    CHECK(u3 == doctest::Approx(-3.0));
    CHECK(c3.integral == doctest::Approx(-0.05));
}

TEST_CASE("physics world rejects duplicates and unknown ids") {
    PhysicsWorld w;
    Robot r;
    r.state.id = "r1";
    w.add_robot(r);
    CHECK_THROWS_AS(w.add_robot(r), ValidationError);
    CHECK_THROWS_AS(w.add_plant(Plant{"r1", {}, {}, {}, 0.0}), ValidationError);
    CHECK_THROWS_AS(w.robot("ghost"), UnknownNode);
    CHECK_THROWS_AS(w.plant("ghost"), UnknownNode);
}

TEST_CASE("externally driven robot ignores its waypoint path") {
    PhysicsWorld w;
    Robot r;
    r.state.id = "r1";
    r.params = {1.0, 1.0, 100.0};
    r.path = {{10.0, 0.0, 0.0}};
    r.external = VelocityCommand{0.0, 0.0};
    r.externally_driven = true;
    w.add_robot(r);
    for (int i = 0; i < 10; ++i) w.step(10ms);
    CHECK(w.robot("r1").state.pose.x == 0.0);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(DiffDriveParams({0.0, 1.0, 1.0}).validate("p"), ValidationError);
    CHECK_THROWS_AS(CartPoleParams({1.0, -1.0, 0.5, 9.81}).validate("p"), ValidationError);
    PidGains g;
    g.kp = std::nan("");
    CHECK_THROWS_AS(g.validate("gains"), ValidationError);
}

TEST_CASE("unicycle on a unit circle matches the closed form") {
    DiffDriveParams params{1.0, 1.0, 1e9};
    RobotState s;
    for (int i = 0; i < 1000; ++i) s = step_diff_drive(s, {1.0, 1.0}, 1ms, params);
    CHECK(std::abs(s.pose.x - std::sin(1.0)) <= 1e-3);
    CHECK(std::abs(s.pose.y - (1.0 - std::cos(1.0))) <= 1e-3);
    CHECK(std::abs(s.pose.theta - 1.0) <= 1e-3);
}

TEST_CASE("pure rotation by pi lands on +pi") {
    DiffDriveParams params{1.0, kPi, 1.0};
    const RobotState s = step_diff_drive({}, {0.0, kPi}, 1s, params);
    CHECK(s.pose.theta == doctest::Approx(kPi));
    CHECK(s.pose.theta <= kPi);
    CHECK(s.pose.x == 0.0);
}

TEST_CASE("waypoint follower: diagonal path within the step bound") {
    const DiffDriveParams params{2.0, 2.0, 2.0};
    RobotState s;
    std::deque<Pose2D> path{{300.0, 100.0, 0.0}};
    const Duration dt = 10ms;
    // Path length over v_max * dt, doubled for the turn-in and braking phases.
    const int bound = static_cast<int>(2 * std::hypot(300.0, 100.0) / (params.v_max * to_seconds(dt)));
    int steps = 0;
    while (!path.empty() && steps < bound) {
        s = follow_waypoints(s, path, dt, params).first;
        ++steps;
    }
    CHECK(path.empty());
    CHECK(std::hypot(s.pose.x - 300.0, s.pose.y - 100.0) <= 0.5);
}

TEST_CASE("waypoint follower consumes a waypoint it is already on") {
    std::deque<Pose2D> path{{0.1, 0.0, 0.0}};
    const auto [next, cmd] = follow_waypoints({}, path, 10ms, {});
    CHECK(path.empty());
    CHECK(cmd == VelocityCommand{});
    CHECK(next.pose == Pose2D{});
}

TEST_CASE("upright equilibrium is unstable") {
    CartPoleState s{0.0, 0.0, 0.01, 0.0};
    double prev = s.theta;
    for (int i = 0; i < 500; ++i) {
        s = step_cart_pole(s, 0.0, 1ms, {});
        CHECK(std::abs(s.theta) > std::abs(prev));
        prev = s.theta;
    }
}

TEST_CASE("PID: pure proportional and zero error") {
    PidController c;
    c.gains.kp = 2.0;
    CHECK(pid_step(c, 1.5, 10ms).second == 3.0);
    CHECK(pid_step(c, 0.0, 10ms).second == 0.0);
}

TEST_CASE("property: stepping is a pure function of its inputs") {
    testing::Gen g(99);
    for (int i = 0; i < 500; ++i) {
        const CartPoleState s{g.real(-1, 1), g.real(-1, 1), g.real(-1, 1), g.real(-1, 1)};
        const double f = g.real(-10, 10);
        const Duration dt{g.integer(100'000, 20'000'000)};
        CHECK(step_cart_pole(s, f, dt, {}) == step_cart_pole(s, f, dt, {}));
        RobotState r;
        r.pose = {g.real(-10, 10), g.real(-10, 10), g.real(-3, 3)};
        r.v = g.real(-1, 1);
        const VelocityCommand cmd{g.real(-2, 2), g.real(-2, 2)};
        const RobotState a = step_diff_drive(r, cmd, dt, {});
        CHECK(a == step_diff_drive(r, cmd, dt, {}));
        CHECK(a.pose.theta > -kPi);
        CHECK(a.pose.theta <= kPi);
    }
}
