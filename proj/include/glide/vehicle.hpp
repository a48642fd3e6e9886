#pragma once

#include "glide/core.hpp"

namespace glide {

/// Geometry of the pushed platform. The wheelbase runs from the handle
/// contact point to the steered axle.
struct VehicleParams {
  double wheelbase = 0.6;
  double max_steer = 0.7;          // rad
  double base_half_width = 0.115;  // half of the 9 in square base
  bool brake_stop = true;          // brakes stop the platform instantly
  double brake_decel = 2.0;        // m/s^2 when brake_stop is off: the user's momentum carries on
  double max_steer_rate = 0.0;     // rad/s servo slew limit; 0 = unlimited
  double misalignment_gain = 0.3;  // heading disturbance per meter of offset per meter travelled

  void validate() const;
};

struct VehicleState {
  Pose2 pose;
  double steering = 0.0;
  bool brake_engaged = false;
  double odom_distance = 0.0;
  double speed = 0.0;  // effective speed over the last step
};

/// What the traveller does to the handle.
struct HandleState {
  double push_speed = 0.0;      // m/s, never negative
  double lateral_offset = 0.0;  // m, + when the user stands to the left of centre
  double torque = 0.0;          // N m, + twists right
};

struct OdomDelta {
  double distance = 0.0;
  double heading = 0.0;
};

struct OdomNoiseParams {
  double distance_std_per_m = 0.0;
  double heading_std_per_m = 0.0;
  double heading_std_per_rad = 0.0;
};

/// Zero while braked; otherwise the user's push. The platform has no motor.
double effective_speed(const HandleState& handle, const VehicleState& state);

/// Bicycle-model step for the pushed platform. Heading updates first, then the
/// position advances along the new heading.
VehicleState step_kinematics(const VehicleState& state, const HandleState& handle,
                             double steer_command, double dt, const VehicleParams& params);

/// Noisy copy of the motion between two states.
OdomDelta sample_odometry(const VehicleState& prev, const VehicleState& next,
                          const OdomNoiseParams& noise, Rng& rng);

/// Applies an odometry delta in the same order as step_kinematics.
Pose2 apply_odometry(const Pose2& pose, const OdomDelta& delta);

}  // namespace glide
