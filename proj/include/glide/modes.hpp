#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "glide/floorplan.hpp"
#include "glide/planning.hpp"
#include "glide/sensing.hpp"

namespace glide {

enum class ModeKind : std::uint8_t { GlideDirected, UserDirected };

std::string_view to_string(ModeKind m);
std::optional<ModeKind> parse_mode(std::string_view s);

// ---------------------------------------------------------------------------
// Handle torque

enum class TwistDirection : std::uint8_t { Left, Right };

std::string_view to_string(TwistDirection d);
RelativeDirection to_relative(TwistDirection d);

struct TwistCommand {
  TwistDirection direction = TwistDirection::Left;
  double timestamp = 0.0;
};

struct TorqueConfig {
  double on = 0.3;     // N m
  double off = 0.1;    // N m, re-arm level
  double hold = 0.2;   // s
  double range = 5.0;  // sensor saturation, N m

  void validate() const;
};

/// Debounced twist detector. Negative torque is a left twist. After a command
/// the detector stays disarmed until |torque| drops below `off`.
class TorqueInterpreter {
 public:
  explicit TorqueInterpreter(TorqueConfig cfg = {}) : cfg_(cfg) {}

  std::optional<TwistCommand> step(double torque, double now);
  void reset();

 private:
  TorqueConfig cfg_;
  bool armed_ = true;
  std::optional<TwistDirection> candidate_;
  double since_ = 0.0;
};

/// Runs a sampled torque trace (sample i at time i*dt) through the detector.
std::vector<TwistCommand> interpret_torque(std::span<const double> torque, double dt,
                                           const TorqueConfig& cfg);

// ---------------------------------------------------------------------------
// Haptics and announcements

enum class HapticMeaning : std::uint8_t { LeftAck, RightAck, SlowDown };

std::string_view to_string(HapticMeaning m);
std::optional<HapticMeaning> parse_haptic(std::string_view s);

struct HapticPattern {
  std::vector<int> actuators;
  double duration = 0.0;
  HapticMeaning meaning = HapticMeaning::SlowDown;

  /// Canonical actuator set for a meaning: left trio, right trio, or all six.
  static HapticPattern make(HapticMeaning meaning, double duration);
  bool operator==(const HapticPattern&) const = default;
};

struct JunctionAnnouncement {
  std::string node;
  std::string text;
  std::map<RelativeDirection, std::vector<std::string>> options;
};

/// Sentence listing each onward direction (Forward, Left, Right order) with
/// the destinations reachable through it. Directions without destinations are
/// kept in `options` but left out of the text.
JunctionAnnouncement render_announcement(const JunctionNode& node, double approach_heading,
                                         std::span<const Destination> dests,
                                         const JunctionGraph& graph);

/// The sentence alone, from already grouped options.
std::string announcement_text(const std::map<RelativeDirection, std::vector<std::string>>& options);

// ---------------------------------------------------------------------------
// Guidance

struct GuidanceConfig {
  double junction_radius = 1.0;   // r_J, m
  double announce_time = 1.0;     // t_announce, s
  double infeasible_time = 2.0;   // t_infeasible, s
  bool fourway_holds = false;     // treat four-way junctions like T junctions
  double ack_duration = 0.3;      // s
  double slowdown_duration = 0.5; // s
  double approach_tail = 1.5;     // m of the arrival corridor kept ahead of a new edge plan

  void validate() const;
};

struct GuidanceOutput {
  SteeringCommand command;
  std::vector<HapticPattern> haptics;
  std::optional<JunctionAnnouncement> announcement;
  std::optional<std::string> fault;
  bool plan_changed = false;
};

/// The device owns the route: follow the plan, slow near the goal, brake on
/// arrival.
class GlideDirectedGuidance {
 public:
  enum class State : std::uint8_t { Guiding, NearGoal, Arrived };

  GlideDirectedGuidance(GuidanceConfig gcfg, ControllerConfig ccfg, VehicleParams params)
      : gcfg_(gcfg), ccfg_(ccfg), params_(params) {}

  GuidanceOutput tick(const PoseEstimate& est, const GlobalPlan& plan, const LocalCostmap& costmap);

  State state() const { return state_; }
  std::string state_name() const;
  nlohmann::json describe() const;

 private:
  GuidanceConfig gcfg_;
  ControllerConfig ccfg_;
  VehicleParams params_;
  State state_ = State::Guiding;
};

/// The user owns the route: travel corridor by corridor, stop at junctions,
/// and take direction from handle twists.
class UserDirectedGuidance {
 public:
  enum class Phase : std::uint8_t { Traveling, AtJunction, InfeasibleHold, NearGoal, Arrived };

  /// `map` must outlive the guidance object. `goal_name` may be empty when the
  /// trial has no destination.
  UserDirectedGuidance(const ScenarioMap& map, std::string goal_name, GuidanceConfig gcfg,
                       ControllerConfig ccfg, PlannerConfig pcfg, VehicleParams params);

  /// Chooses the corridor leaving the start node closest to the start heading
  /// and plans along it.
  void start(const Pose2& pose, std::string_view start_node);

  GuidanceOutput tick(const PoseEstimate& est, const LocalCostmap& costmap,
                      std::optional<TwistCommand> twist, double now);

  const GlobalPlan& plan() const { return plan_; }
  void replace_plan(GlobalPlan plan) { plan_ = std::move(plan); }
  Phase phase() const { return phase_; }
  bool brake() const;
  std::optional<JunctionKind> junction_kind() const { return kind_; }
  const std::vector<RelativeDirection>& options() const { return options_; }
  const std::string& target_node() const { return target_; }
  const std::string& current_edge() const { return edge_; }
  std::string state_name() const;
  nlohmann::json describe() const;

 private:
  void travel(const std::string& node_id, const std::string& edge_id,
              const std::string& arrival_edge);
  bool near_goal(const PoseEstimate& est, double radius) const;
  void enter_node(const PoseEstimate& est, double now, GuidanceOutput& out);
  void take_direction(RelativeDirection dir, GuidanceOutput& out);
  SteeringCommand steer(const PoseEstimate& est, const LocalCostmap& costmap);

  const ScenarioMap* map_;
  std::string goal_name_;
  GuidanceConfig gcfg_;
  ControllerConfig ccfg_;
  PlannerConfig pcfg_;
  VehicleParams params_;

  Phase phase_ = Phase::Traveling;
  GlobalPlan plan_;
  std::string from_;    // node the current edge leaves
  std::string target_;  // node the current edge leads to
  std::string edge_;
  double approach_ = 0.0;  // heading of travel into `target_`
  std::optional<JunctionKind> kind_;
  std::vector<RelativeDirection> options_;
  bool junction_brake_ = false;
  double phase_since_ = 0.0;
};

}  // namespace glide
