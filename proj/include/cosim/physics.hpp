#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cosim/sim_time.hpp"

namespace cosim {

// ---------------------------------------------------------------------------
// Mobile robots

struct Pose2D {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // radians, kept in (-pi, pi]

    bool operator==(const Pose2D&) const = default;
};

// Maps any finite angle into (-pi, pi].
double normalize_angle(double theta) noexcept;

struct DiffDriveParams {
    double v_max = 1.0;        // m/s
    double w_max = 1.0;        // rad/s
    double accel_limit = 1.0;  // m/s^2, applied to the linear velocity

    void validate(const std::string& field) const;
    bool operator==(const DiffDriveParams&) const = default;
};

struct RobotState {
    std::string id;
    Pose2D pose;
    double v = 0.0;
    double w = 0.0;

    bool operator==(const RobotState&) const = default;
};

struct VelocityCommand {
    double v = 0.0;
    double w = 0.0;

    bool operator==(const VelocityCommand&) const = default;
};

// Unicycle step: the commanded velocities are clamped to the limits, the
// linear velocity is slewed by accel_limit, then the pose is advanced with
// forward Euler using the heading at the start of the step.
// Throws NonFiniteInput for a non-finite command.
RobotState step_diff_drive(const RobotState& state, VelocityCommand cmd, Duration dt,
                           const DiffDriveParams& params);

struct WaypointParams {
    double capture_radius = 0.5;  // m
    double heading_gain = 2.0;    // rad/s per rad of heading error

    bool operator==(const WaypointParams&) const = default;
};

// Steers toward path.front(), popping waypoints that are within the capture
// radius. The final waypoint is approached on a braking curve so the robot
// comes to rest on it. Returns the stepped state and the command it applied.
std::pair<RobotState, VelocityCommand> follow_waypoints(const RobotState& state,
                                                        std::deque<Pose2D>& path, Duration dt,
                                                        const DiffDriveParams& params,
                                                        const WaypointParams& wp = {});

// ---------------------------------------------------------------------------
// Cart-pole plant

struct CartPoleParams {
    double cart_mass = 1.0;    // M, kg
    double pole_mass = 0.1;    // m, kg
    double half_length = 0.5;  // l, m
    double gravity = 9.81;     // g, m/s^2

    void validate(const std::string& field) const;
    bool operator==(const CartPoleParams&) const = default;
};

struct CartPoleState {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0;  // 0 = upright
    double theta_dot = 0.0;

    bool operator==(const CartPoleState&) const = default;
};

// Frictionless cart-pole with a uniform pole, integrated with one RK4 step.
// Throws NonFiniteInput for a non-finite force or state.
CartPoleState step_cart_pole(const CartPoleState& state, double force, Duration dt,
                             const CartPoleParams& params);

// ---------------------------------------------------------------------------
// PID

struct PidGains {
    double kp = 0.0;
    double ki = 0.0;
    double kd = 0.0;
    double output_limit = 1e9;
    double integral_limit = 1e9;  // anti-windup bound on the accumulated error

    void validate(const std::string& field) const;
    bool operator==(const PidGains&) const = default;
};

struct PidController {
    PidGains gains;
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev = false;  // no derivative kick on the first sample

    bool operator==(const PidController&) const = default;
};

// Returns the updated controller and the clamped output.
std::pair<PidController, double> pid_step(const PidController& ctrl, double error, Duration dt);

// ---------------------------------------------------------------------------
// World container

struct Robot {
    RobotState state;
    DiffDriveParams params;
    WaypointParams waypoint;
    std::deque<Pose2D> path;
    // Set by an external controller (teleoperation). Takes precedence over
    // the waypoint path while present.
    std::optional<VelocityCommand> external;
    bool externally_driven = false;
};

struct Plant {
    std::string id;
    Pose2D mount;  // where the cart's rail starts; its radio rides on the cart
    CartPoleParams params;
    CartPoleState state;
    double applied_force = 0.0;  // held until replaced
};

class PhysicsWorld {
public:
    Robot& add_robot(Robot robot);
    Plant& add_plant(Plant plant);

    // Advances every robot and plant by dt. Pure per body: the result only
    // depends on (state, input, dt).
    void step(Duration dt);

    std::vector<RobotState> robot_states() const;

    Robot& robot(const std::string& id);
    const Robot& robot(const std::string& id) const;
    Plant& plant(const std::string& id);
    const Plant& plant(const std::string& id) const;
    bool has_robot(const std::string& id) const { return robot_index_.contains(id); }
    bool has_plant(const std::string& id) const { return plant_index_.contains(id); }

    std::vector<Robot>& robots() noexcept { return robots_; }
    const std::vector<Robot>& robots() const noexcept { return robots_; }
    std::vector<Plant>& plants() noexcept { return plants_; }
    const std::vector<Plant>& plants() const noexcept { return plants_; }

private:
    std::vector<Robot> robots_;
    std::vector<Plant> plants_;
    std::map<std::string, std::size_t> robot_index_;
    std::map<std::string, std::size_t> plant_index_;
};

}  // namespace cosim
