#include "glide/vehicle.hpp"

#include <algorithm>

namespace glide {

void VehicleParams::validate() const {
  if (!(wheelbase > 0.0)) throw ConfigError("vehicle.wheelbase must be positive");
  if (!(max_steer > 0.0 && max_steer < kPi / 2.0))
    throw ConfigError("vehicle.max_steer must lie in (0, pi/2)");
  if (!(base_half_width > 0.0)) throw ConfigError("vehicle.base_half_width must be positive");
  if (!(brake_decel > 0.0)) throw ConfigError("vehicle.brake_decel must be positive");
  if (!(max_steer_rate >= 0.0)) throw ConfigError("vehicle.max_steer_rate must be >= 0");
}

double effective_speed(const HandleState& handle, const VehicleState& state) {
  if (state.brake_engaged) return 0.0;
  return std::max(0.0, handle.push_speed);
}

VehicleState step_kinematics(const VehicleState& state, const HandleState& handle,
                             double steer_command, double dt, const VehicleParams& params) {
  VehicleState next = state;
  next.steering = std::clamp(steer_command, -params.max_steer, params.max_steer);
  if (params.max_steer_rate > 0.0) {
    const double lim = params.max_steer_rate * dt;
    next.steering = state.steering + std::clamp(next.steering - state.steering, -lim, lim);
  }
  double v = effective_speed(handle, state);
  if (state.brake_engaged && !params.brake_stop)
    v = std::max(0.0, state.speed - params.brake_decel * dt);
  next.speed = v;
  if (v == 0.0) return next;
  const double yaw_rate = v / params.wheelbase * std::tan(next.steering) +
                          params.misalignment_gain * handle.lateral_offset * v;
  next.pose.theta = wrap_angle(state.pose.theta + yaw_rate * dt);
  next.pose.x = state.pose.x + v * dt * std::cos(next.pose.theta);
  next.pose.y = state.pose.y + v * dt * std::sin(next.pose.theta);
  next.odom_distance = state.odom_distance + v * dt;
  return next;
}

OdomDelta sample_odometry(const VehicleState& prev, const VehicleState& next,
                          const OdomNoiseParams& noise, Rng& rng) {
  const Vec2 d = next.pose.position() - prev.pose.position();
  const Vec2 fwd = unit(next.pose.theta);
  // signed so repositioning backwards yields a negative distance
  const double dist = d.dot(fwd) >= 0.0 ? d.norm() : -d.norm();
  const double dh = wrap_angle(next.pose.theta - prev.pose.theta);
  OdomDelta out{dist, dh};
  const double sd = noise.distance_std_per_m * std::abs(dist);
  const double sh = noise.heading_std_per_m * std::abs(dist) + noise.heading_std_per_rad * std::abs(dh);
  if (sd > 0.0) out.distance += rng.normal(0.0, sd);
  if (sh > 0.0) out.heading += rng.normal(0.0, sh);
  return out;
}

Pose2 apply_odometry(const Pose2& pose, const OdomDelta& delta) {
  Pose2 out;
  out.theta = wrap_angle(pose.theta + delta.heading);
  out.x = pose.x + delta.distance * std::cos(out.theta);
  out.y = pose.y + delta.distance * std::sin(out.theta);
  return out;
}

}  // namespace glide
