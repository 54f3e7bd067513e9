#include "cosim/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cosim/error.hpp"

namespace cosim {

namespace {

constexpr double kPi = std::numbers::pi;

double dt_seconds(Duration dt) {
    if (dt <= Duration::zero()) {
        throw Error("time step must be > 0");
    }
    return to_seconds(dt);
}

void require_positive(double value, const std::string& field) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ValidationError(field, "must be a finite value > 0");
    }
}

}  // namespace

double normalize_angle(double theta) noexcept {
    double a = std::remainder(theta, 2.0 * kPi);
    if (a <= -kPi) {
        a += 2.0 * kPi;
    }
    return a;
}

void DiffDriveParams::validate(const std::string& field) const {
    require_positive(v_max, field + ".v_max");
    require_positive(w_max, field + ".w_max");
    require_positive(accel_limit, field + ".accel_limit");
}

RobotState step_diff_drive(const RobotState& state, VelocityCommand cmd, Duration dt,
                           const DiffDriveParams& params) {
    if (!std::isfinite(cmd.v) || !std::isfinite(cmd.w)) {
        throw NonFiniteInput("velocity command for '" + state.id + "' is not finite");
    }
    const double h = dt_seconds(dt);

    const double v_target = std::clamp(cmd.v, -params.v_max, params.v_max);
    const double max_dv = params.accel_limit * h;
    const double v = std::clamp(state.v + std::clamp(v_target - state.v, -max_dv, max_dv),
                                -params.v_max, params.v_max);
    const double w = std::clamp(cmd.w, -params.w_max, params.w_max);

    RobotState next = state;
    next.v = v;
    next.w = w;
    next.pose.x += v * std::cos(state.pose.theta) * h;
    next.pose.y += v * std::sin(state.pose.theta) * h;
    next.pose.theta = normalize_angle(state.pose.theta + w * h);
    return next;
}

std::pair<RobotState, VelocityCommand> follow_waypoints(const RobotState& state,
                                                        std::deque<Pose2D>& path, Duration dt,
                                                        const DiffDriveParams& params,
                                                        const WaypointParams& wp) {
    const auto distance_to = [&](const Pose2D& target) {
        return std::hypot(target.x - state.pose.x, target.y - state.pose.y);
    };
    while (!path.empty() && distance_to(path.front()) <= wp.capture_radius) {
        path.pop_front();
    }

    VelocityCommand cmd;
    if (!path.empty()) {
        const Pose2D& target = path.front();
        const double bearing = std::atan2(target.y - state.pose.y, target.x - state.pose.x);
        const double error = normalize_angle(bearing - state.pose.theta);
        cmd.w = std::clamp(wp.heading_gain * error, -params.w_max, params.w_max);
        // Turn in place when facing away, full speed when aligned.
        cmd.v = params.v_max * std::max(0.0, std::cos(error));
        if (path.size() == 1) {
            // Braking curve v = sqrt(2 a d) so the robot stops on the goal.
            cmd.v = std::min(cmd.v, std::sqrt(2.0 * params.accel_limit * distance_to(target)));
        }
    }
    return {step_diff_drive(state, cmd, dt, params), cmd};
}

void CartPoleParams::validate(const std::string& field) const {
    require_positive(cart_mass, field + ".cart_mass");
    require_positive(pole_mass, field + ".pole_mass");
    require_positive(half_length, field + ".half_length");
    require_positive(gravity, field + ".gravity");
}

namespace {

struct CartPoleDeriv {
    double x_dot, x_ddot, theta_dot, theta_ddot;
};

CartPoleDeriv cart_pole_deriv(const CartPoleState& s, double force, const CartPoleParams& p) {
    const double total = p.cart_mass + p.pole_mass;
    const double sin_t = std::sin(s.theta);
    const double cos_t = std::cos(s.theta);
    const double pole_ml = p.pole_mass * p.half_length;

    const double temp = (force + pole_ml * s.theta_dot * s.theta_dot * sin_t) / total;
    const double theta_ddot =
        (p.gravity * sin_t - cos_t * temp) /
        (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total));
    const double x_ddot = temp - pole_ml * theta_ddot * cos_t / total;
    return {s.x_dot, x_ddot, s.theta_dot, theta_ddot};
}

CartPoleState advance(const CartPoleState& s, const CartPoleDeriv& d, double h) {
    return {s.x + h * d.x_dot, s.x_dot + h * d.x_ddot, s.theta + h * d.theta_dot,
            s.theta_dot + h * d.theta_ddot};
}

bool finite(const CartPoleState& s) {
    return std::isfinite(s.x) && std::isfinite(s.x_dot) && std::isfinite(s.theta) &&
           std::isfinite(s.theta_dot);
}

}  // namespace

CartPoleState step_cart_pole(const CartPoleState& state, double force, Duration dt,
                             const CartPoleParams& params) {
    if (!std::isfinite(force)) {
        throw NonFiniteInput("cart-pole force is not finite");
    }
    if (!finite(state)) {
        throw NonFiniteInput("cart-pole state is not finite");
    }
    const double h = dt_seconds(dt);

    const CartPoleDeriv k1 = cart_pole_deriv(state, force, params);
    const CartPoleDeriv k2 = cart_pole_deriv(advance(state, k1, h / 2), force, params);
    const CartPoleDeriv k3 = cart_pole_deriv(advance(state, k2, h / 2), force, params);
    const CartPoleDeriv k4 = cart_pole_deriv(advance(state, k3, h), force, params);

    const auto combine = [h](double y, double a, double b, double c, double d) {
        return y + h / 6.0 * (a + 2.0 * b + 2.0 * c + d);
    };
    CartPoleState next{
        combine(state.x, k1.x_dot, k2.x_dot, k3.x_dot, k4.x_dot),
        combine(state.x_dot, k1.x_ddot, k2.x_ddot, k3.x_ddot, k4.x_ddot),
        combine(state.theta, k1.theta_dot, k2.theta_dot, k3.theta_dot, k4.theta_dot),
        combine(state.theta_dot, k1.theta_ddot, k2.theta_ddot, k3.theta_ddot, k4.theta_ddot),
    };
    if (!finite(next)) {
        throw NonFiniteInput("cart-pole state diverged");
    }
    return next;
}

void PidGains::validate(const std::string& field) const {
    for (const auto& [name, value] : {std::pair{"kp", kp}, {"ki", ki}, {"kd", kd}}) {
        if (!std::isfinite(value)) {
            throw ValidationError(field + "." + name, "must be finite");
        }
    }
    require_positive(output_limit, field + ".output_limit");
    require_positive(integral_limit, field + ".integral_limit");
}

std::pair<PidController, double> pid_step(const PidController& ctrl, double error, Duration dt) {
    const double h = dt_seconds(dt);
    PidController next = ctrl;
    const PidGains& g = ctrl.gains;

    next.integral = std::clamp(ctrl.integral + error * h, -g.integral_limit, g.integral_limit);
    const double derivative = ctrl.has_prev ? (error - ctrl.prev_error) / h : 0.0;
    next.prev_error = error;
    next.has_prev = true;

    const double raw = g.kp * error + g.ki * next.integral + g.kd * derivative;
    return {next, std::clamp(raw, -g.output_limit, g.output_limit)};
}

Robot& PhysicsWorld::add_robot(Robot robot) {
    const std::string id = robot.state.id;
    if (robot_index_.contains(id) || plant_index_.contains(id)) {
        throw ValidationError("robots." + id, "duplicate id");
    }
    robot_index_[id] = robots_.size();
    robots_.push_back(std::move(robot));
    return robots_.back();
}

Plant& PhysicsWorld::add_plant(Plant plant) {
    const std::string id = plant.id;
    if (robot_index_.contains(id) || plant_index_.contains(id)) {
        throw ValidationError("plants." + id, "duplicate id");
    }
    plant_index_[id] = plants_.size();
    plants_.push_back(std::move(plant));
    return plants_.back();
}

void PhysicsWorld::step(Duration dt) {
    for (Robot& r : robots_) {
        if (r.external) {
            r.state = step_diff_drive(r.state, *r.external, dt, r.params);
        } else if (!r.externally_driven && !r.path.empty()) {
            r.state = follow_waypoints(r.state, r.path, dt, r.params, r.waypoint).first;
        } else {
            r.state = step_diff_drive(r.state, VelocityCommand{}, dt, r.params);
        }
    }
    for (Plant& p : plants_) {
        p.state = step_cart_pole(p.state, p.applied_force, dt, p.params);
    }
}

std::vector<RobotState> PhysicsWorld::robot_states() const {
    std::vector<RobotState> out;
    out.reserve(robots_.size());
    for (const Robot& r : robots_) {
        out.push_back(r.state);
    }
    return out;
}

Robot& PhysicsWorld::robot(const std::string& id) {
    auto it = robot_index_.find(id);
    if (it == robot_index_.end()) throw UnknownNode(id);
    return robots_[it->second];
}

const Robot& PhysicsWorld::robot(const std::string& id) const {
    auto it = robot_index_.find(id);
    if (it == robot_index_.end()) throw UnknownNode(id);
    return robots_[it->second];
}

Plant& PhysicsWorld::plant(const std::string& id) {
    auto it = plant_index_.find(id);
    if (it == plant_index_.end()) throw UnknownNode(id);
    return plants_[it->second];
}

const Plant& PhysicsWorld::plant(const std::string& id) const {
    auto it = plant_index_.find(id);
    if (it == plant_index_.end()) throw UnknownNode(id);
    return plants_[it->second];
}

}  // namespace cosim
