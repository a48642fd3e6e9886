#pragma once

#include <optional>
#include <string>
#include <vector>

#include "glide/core.hpp"
#include "glide/modes.hpp"
#include "glide/vehicle.hpp"

namespace glide {

/// Mean-reverting lateral offset of the traveller behind the handle.
struct DriftParams {
  double mean = 0.0;       // m
  double stddev = 0.1;     // stationary standard deviation, m
  double reversion = 0.5;  // 1/s
};

enum class PolicyKind : std::uint8_t { Scripted, ToDestination, Random };

struct TwistPolicy {
  PolicyKind kind = PolicyKind::ToDestination;
  std::vector<RelativeDirection> route;  // Scripted
  std::string destination;               // ToDestination
};

struct UserModelConfig {
  double target_speed = 1.2;      // m/s
  double slow_speed = 0.5;        // m/s
  double accel = 1.0;             // m/s^2, both speeding up and slowing down
  double reaction_latency = 0.5;  // s
  DriftParams drift;
  TwistPolicy policy;
  double twist_torque = 1.0;      // N m
  double twist_duration = 0.4;    // s
  bool proximity_slowing = false;
  double proximity_range = 1.0;   // m

  void validate() const;
};

struct TorquePulse {
  double torque = 0.0;
  double duration = 0.0;
};

/// Scripted route cursor plus the policy it belongs to.
class TwistDecider {
 public:
  explicit TwistDecider(TwistPolicy policy) : policy_(std::move(policy)) {}

  /// Direction the user chooses at an announced junction. Throws
  /// ScriptExhausted when a scripted route has no turn left.
  RelativeDirection choose(const JunctionAnnouncement& ann, Rng& rng);
  std::size_t decisions() const { return next_; }

 private:
  TwistPolicy policy_;
  std::size_t next_ = 0;
};

/// Pulse that the handle sensor will read as a twist in `dir`; nullopt for
/// Forward, which is expressed by not twisting.
std::optional<TorquePulse> twist_pulse(RelativeDirection dir, const UserModelConfig& cfg);

/// One-shot form: chooses and converts to a pulse.
std::optional<TorquePulse> policy_decide(TwistDecider& decider, const JunctionAnnouncement& ann,
                                         const UserModelConfig& cfg, Rng& rng);

/// What the user perceives at a tick.
struct UserPerception {
  double now = 0.0;
  double dt = 0.02;
  bool brake_engaged = false;
  std::vector<HapticPattern> haptics;                // emitted since the last tick
  std::optional<JunctionAnnouncement> announcement;  // emitted since the last tick
  std::optional<double> nearest_range;               // latest depth reading
};

/// Anything that drives the handle: a simulated user, a live client, or a
/// recorded input stream.
class UserSource {
 public:
  virtual ~UserSource() = default;
  virtual HandleState tick(const UserPerception& p) = 0;
  /// Experimenter re-centres the traveller behind the device.
  virtual void recenter() {}
};

class SimUser : public UserSource {
 public:
  SimUser(UserModelConfig cfg, Rng rng);

  HandleState tick(const UserPerception& p) override;
  void recenter() override { offset_ = 0.0; }

  double speed() const { return speed_; }
  double offset() const { return offset_; }

 private:
  UserModelConfig cfg_;
  Rng rng_;
  TwistDecider decider_;
  double speed_ = 0.0;
  double offset_;
  std::optional<double> slow_from_;     // time the slow-down takes effect
  bool was_braked_ = false;
  std::optional<double> resume_at_;     // time the user notices the brake release
  std::optional<double> pulse_start_;
  TorquePulse pulse_;
};

}  // namespace glide
