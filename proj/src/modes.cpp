#include "glide/modes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace glide {

std::string_view to_string(ModeKind m) {
  return m == ModeKind::GlideDirected ? "glide-directed" : "user-directed";
}

std::optional<ModeKind> parse_mode(std::string_view s) {
  if (s == "glide-directed" || s == "glide") return ModeKind::GlideDirected;
  if (s == "user-directed" || s == "user") return ModeKind::UserDirected;
  return std::nullopt;
}

std::string_view to_string(TwistDirection d) { return d == TwistDirection::Left ? "Left" : "Right"; }

RelativeDirection to_relative(TwistDirection d) {
  return d == TwistDirection::Left ? RelativeDirection::Left : RelativeDirection::Right;
}

void TorqueConfig::validate() const {
  if (!(off >= 0.0 && off < on)) throw ConfigError("torque: need 0 <= off < on");
  if (!(hold >= 0.0)) throw ConfigError("torque.hold must be >= 0");
  if (!(range >= on)) throw ConfigError("torque.range must be >= on");
}

std::optional<TwistCommand> TorqueInterpreter::step(double torque, double now) {
  if (!armed_) {
    if (std::abs(torque) < cfg_.off) armed_ = true;
    return std::nullopt;
  }
  std::optional<TwistDirection> dir;
  if (torque < -cfg_.on) dir = TwistDirection::Left;
  else if (torque > cfg_.on) dir = TwistDirection::Right;
  if (!dir) {
    candidate_.reset();
    return std::nullopt;
  }
  if (candidate_ != dir) {
    candidate_ = dir;
    since_ = now;
  }
  // small slack so a hold of exactly k ticks is not lost to rounding
  if (now - since_ >= cfg_.hold - 1e-9) {
    armed_ = false;
    candidate_.reset();
    return TwistCommand{*dir, now};
  }
  return std::nullopt;
}

void TorqueInterpreter::reset() {
  armed_ = true;
  candidate_.reset();
  since_ = 0.0;
}

std::vector<TwistCommand> interpret_torque(std::span<const double> torque, double dt,
                                           const TorqueConfig& cfg) {
  TorqueInterpreter ti(cfg);
  std::vector<TwistCommand> out;
  for (std::size_t i = 0; i < torque.size(); ++i)
    if (auto c = ti.step(torque[i], static_cast<double>(i) * dt)) out.push_back(*c);
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(HapticMeaning m) {
  switch (m) {
    case HapticMeaning::LeftAck: return "LeftAck";
    case HapticMeaning::RightAck: return "RightAck";
    case HapticMeaning::SlowDown: return "SlowDown";
  }
  return "SlowDown";
}

std::optional<HapticMeaning> parse_haptic(std::string_view s) {
  if (s == "LeftAck") return HapticMeaning::LeftAck;
  if (s == "RightAck") return HapticMeaning::RightAck;
  if (s == "SlowDown") return HapticMeaning::SlowDown;
  return std::nullopt;
}

HapticPattern HapticPattern::make(HapticMeaning meaning, double duration) {
  HapticPattern p;
  p.meaning = meaning;
  p.duration = duration;
  switch (meaning) {
    case HapticMeaning::LeftAck: p.actuators = {0, 1, 2}; break;
    case HapticMeaning::RightAck: p.actuators = {3, 4, 5}; break;
    case HapticMeaning::SlowDown: p.actuators = {0, 1, 2, 3, 4, 5}; break;
  }
  return p;
}

std::string announcement_text(const std::map<RelativeDirection, std::vector<std::string>>& options) {
  std::vector<std::string> parts;
  for (RelativeDirection d : {RelativeDirection::Forward, RelativeDirection::Left,
                              RelativeDirection::Right}) {
    auto it = options.find(d);
    if (it == options.end() || it->second.empty()) continue;
    std::string verb = d == RelativeDirection::Forward ? "go straight"
                       : d == RelativeDirection::Left  ? "turn left"
                                                       : "turn right";
    std::string names;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (i) names += " or ";
      names += it->second[i];
    }
    parts.push_back(verb + " to get to the " + names);
  }
  std::string text;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) text += " or ";
    text += parts[i];
  }
  if (!text.empty()) text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  return text;
}

JunctionAnnouncement render_announcement(const JunctionNode& node, double approach_heading,
                                         std::span<const Destination> dests,
                                         const JunctionGraph& graph) {
  const auto grouped = destinations_by_direction(graph, node, approach_heading, dests);
  JunctionAnnouncement a;
  a.node = node.id;
  for (RelativeDirection d : exits_available(node, approach_heading)) {
    auto it = grouped.by_direction.find(d);
    a.options[d] = it == grouped.by_direction.end() ? std::vector<std::string>{} : it->second;
  }
  a.text = announcement_text(a.options);
  return a;
}

// ---------------------------------------------------------------------------

void GuidanceConfig::validate() const {
  if (!(junction_radius > 0.0)) throw ConfigError("guidance.junction_radius must be positive");
  if (announce_time < 0.0) throw ConfigError("guidance.announce_time must be >= 0");
  if (infeasible_time < 0.0) throw ConfigError("guidance.infeasible_time must be >= 0");
  if (approach_tail < 0.0) throw ConfigError("guidance.approach_tail must be >= 0");
}

std::string GlideDirectedGuidance::state_name() const {
  switch (state_) {
    case State::Guiding: return "Guiding";
    case State::NearGoal: return "NearGoal";
    case State::Arrived: return "Arrived";
  }
  return "Guiding";
}

nlohmann::json GlideDirectedGuidance::describe() const { return {{"state", state_name()}}; }

GuidanceOutput GlideDirectedGuidance::tick(const PoseEstimate& est, const GlobalPlan& plan,
                                           const LocalCostmap& costmap) {
  GuidanceOutput out;
  if (state_ == State::Arrived) {
    out.command.brake_request = true;
    return out;
  }
  const GoalStatus status = goal_check(est, plan.goal.position(), ccfg_);
  if (status == GoalStatus::Arrived) {
    state_ = State::Arrived;
    out.command.brake_request = true;
    return out;
  }
  if (status == GoalStatus::Near && state_ == State::Guiding) {
    state_ = State::NearGoal;
    out.haptics.push_back(HapticPattern::make(HapticMeaning::SlowDown, gcfg_.slowdown_duration));
  }
  try {
    const auto [cmd, geo] = pure_pursuit_steer(est, plan, ccfg_, params_);
    out.command = avoid_adjust(cmd, est, costmap, ccfg_, params_);
  } catch (const PlanExhausted& e) {
    out.fault = std::string("plan exhausted: ") + e.what();
    out.command.brake_request = true;
  }
  if (state_ == State::NearGoal) out.command.advisory = Advisory::SlowDown;
  return out;
}

// ---------------------------------------------------------------------------

UserDirectedGuidance::UserDirectedGuidance(const ScenarioMap& map, std::string goal_name,
                                           GuidanceConfig gcfg, ControllerConfig ccfg,
                                           PlannerConfig pcfg, VehicleParams params)
    : map_(&map),
      goal_name_(std::move(goal_name)),
      gcfg_(gcfg),
      ccfg_(ccfg),
      pcfg_(pcfg),
      params_(params) {
  gcfg_.validate();
}

namespace {

std::optional<Heading> exit_heading_of(const JunctionNode& node, const std::string& edge_id) {
  for (const auto& [h, e] : node.exits)
    if (e == edge_id) return h;
  return std::nullopt;
}

}  // namespace

void UserDirectedGuidance::travel(const std::string& node_id, const std::string& edge_id,
                                  const std::string& arrival_edge) {
  const JunctionGraph& g = map_->graph;
  const CorridorEdge* edge = g.find_edge(edge_id);
  if (!edge) throw DanglingEdge("exit of node '" + node_id + "' names missing edge '" + edge_id + "'");
  const std::vector<Vec2> poly = g.polyline_from(*edge, node_id);
  const std::string target = g.other_end(*edge, node_id);
  const JunctionNode* to = g.find_node(target);
  if (!to) throw DanglingEdge("edge '" + edge_id + "' leads to missing node '" + target + "'");
  const auto arrive = exit_heading_of(*to, edge_id);
  if (!arrive) throw DanglingEdge("node '" + target + "' has no exit for edge '" + edge_id + "'");

  std::vector<Vec2> pts;
  if (!arrival_edge.empty()) {
    const auto back = g.polyline_from(g.edge(arrival_edge), node_id);
    const double tail = std::min(gcfg_.approach_tail, polyline_length(back));
    if (tail > 1e-9) pts.push_back(point_at_arc(back, tail));
  }
  pts.insert(pts.end(), poly.begin(), poly.end());
  plan_ = plan_along(pts, Pose2{to->position.x, to->position.y, 0.0}, pcfg_);
  from_ = node_id;
  target_ = target;
  edge_ = edge_id;
  approach_ = wrap_angle(heading_angle(*arrive) + kPi);
}

void UserDirectedGuidance::start(const Pose2& pose, std::string_view start_node) {
  const JunctionNode& node = map_->graph.node(start_node);
  if (node.exits.empty()) throw DanglingEdge("start node '" + node.id + "' has no exits");
  const std::string* best = nullptr;
  double best_err = 10.0;
  for (const auto& [h, e] : node.exits) {
    const double err = std::abs(wrap_angle(heading_angle(h) - pose.theta));
    if (err < best_err) {
      best_err = err;
      best = &e;
    }
  }
  travel(node.id, *best, "");
  phase_ = Phase::Traveling;
  kind_.reset();
  options_.clear();
  junction_brake_ = false;
}

bool UserDirectedGuidance::brake() const {
  switch (phase_) {
    case Phase::Arrived:
    case Phase::InfeasibleHold: return true;
    case Phase::AtJunction: return junction_brake_;
    default: return false;
  }
}

std::string UserDirectedGuidance::state_name() const {
  switch (phase_) {
    case Phase::Traveling: return "Traveling";
    case Phase::AtJunction: return "AtJunction";
    case Phase::InfeasibleHold: return "InfeasibleHold";
    case Phase::NearGoal: return "NearGoal";
    case Phase::Arrived: return "Arrived";
  }
  return "Traveling";
}

nlohmann::json UserDirectedGuidance::describe() const {
  nlohmann::json j{{"state", state_name()}, {"target", target_}, {"edge", edge_}};
  if (kind_) {
    j["kind"] = std::string(to_string(*kind_));
    nlohmann::json opts = nlohmann::json::array();
    for (auto d : options_) opts.push_back(std::string(to_string(d)));
    j["options"] = opts;
    j["brake"] = brake();
  }
  return j;
}

bool UserDirectedGuidance::near_goal(const PoseEstimate& est, double radius) const {
  if (goal_name_.empty()) return false;
  for (const auto& d : map_->destinations) {
    if (d.name != goal_name_) continue;
    const GraphLocation loc = locate_destination(map_->graph, d);
    const bool on_route = loc.at_node() ? loc.node == target_ : loc.edge == edge_;
    if (on_route && distance(est.mean.position(), d.pose.position()) <= radius) return true;
  }
  return false;
}

void UserDirectedGuidance::take_direction(RelativeDirection dir, GuidanceOutput& out) {
  const JunctionNode& node = map_->graph.node(target_);
  const auto eid = exit_edge(node, approach_, dir);
  if (!eid)
    throw DanglingEdge("node '" + node.id + "' has no " + std::string(to_string(dir)) + " exit");
  const std::string arrival = edge_;
  travel(node.id, *eid, arrival);
  phase_ = Phase::Traveling;
  kind_.reset();
  options_.clear();
  junction_brake_ = false;
  out.plan_changed = true;
}

void UserDirectedGuidance::enter_node(const PoseEstimate&, double now, GuidanceOutput& out) {
  const JunctionGraph& g = map_->graph;
  const JunctionNode& node = g.node(target_);
  const auto opts = exits_available(node, approach_);
  if (opts.empty()) {
    for (const auto& d : map_->destinations)
      if (d.name == goal_name_ && locate_destination(g, d).node == node.id) return;
    throw DanglingEdge("reached dead end '" + node.id + "' without a destination");
  }
  if (opts.size() == 1) {
    take_direction(opts.front(), out);
    return;
  }
  kind_ = classify_junction(node, approach_);
  options_ = opts;
  phase_ = Phase::AtJunction;
  junction_brake_ = true;
  phase_since_ = now;
  out.announcement = render_announcement(node, approach_, map_->destinations, g);
}

SteeringCommand UserDirectedGuidance::steer(const PoseEstimate& est, const LocalCostmap& costmap) {
  const auto [cmd, geo] = pure_pursuit_steer(est, plan_, ccfg_, params_);
  return avoid_adjust(cmd, est, costmap, ccfg_, params_);
}

GuidanceOutput UserDirectedGuidance::tick(const PoseEstimate& est, const LocalCostmap& costmap,
                                          std::optional<TwistCommand> twist, double now) {
  GuidanceOutput out;
  if (phase_ == Phase::Arrived) {
    out.command.brake_request = true;
    return out;
  }
  try {
    if (near_goal(est, ccfg_.arrival_tolerance)) {
      phase_ = Phase::Arrived;
      out.command.brake_request = true;
      return out;
    }
    if (phase_ == Phase::Traveling && near_goal(est, ccfg_.slowdown_distance)) {
      phase_ = Phase::NearGoal;
      out.haptics.push_back(HapticPattern::make(HapticMeaning::SlowDown, gcfg_.slowdown_duration));
    }

    const bool t_like = kind_ == JunctionKind::T ||
                        (kind_ == JunctionKind::FourWay && gcfg_.fourway_holds);
    switch (phase_) {
      case Phase::Traveling:
      case Phase::NearGoal:
        if (distance(est.mean.position(), map_->graph.node(target_).position) < gcfg_.junction_radius)
          enter_node(est, now, out);
        break;
      case Phase::AtJunction:
        if (twist) {
          const RelativeDirection dir = to_relative(twist->direction);
          if (std::find(options_.begin(), options_.end(), dir) != options_.end()) {
            out.haptics.push_back(HapticPattern::make(
                twist->direction == TwistDirection::Left ? HapticMeaning::LeftAck
                                                         : HapticMeaning::RightAck,
                gcfg_.ack_duration));
            take_direction(dir, out);
          } else {
            phase_ = Phase::InfeasibleHold;
            phase_since_ = now;
          }
        } else if (!t_like && now - phase_since_ >= gcfg_.announce_time - 1e-9) {
          take_direction(RelativeDirection::Forward, out);
        }
        break;
      case Phase::InfeasibleHold:
        if (now - phase_since_ >= gcfg_.infeasible_time - 1e-9) {
          if (t_like) {
            phase_ = Phase::AtJunction;
            junction_brake_ = true;
          } else {
            take_direction(RelativeDirection::Forward, out);
          }
        }
        break;
      case Phase::Arrived: break;
    }

    if (phase_ == Phase::Traveling || phase_ == Phase::NearGoal ||
        (phase_ == Phase::AtJunction && !junction_brake_)) {
      out.command = steer(est, costmap);
    }
  } catch (const PlanExhausted& e) {
    out.fault = std::string("plan exhausted: ") + e.what();
  } catch (const DanglingEdge& e) {
    out.fault = std::string("dangling edge: ") + e.what();
  } catch (const InvalidApproach& e) {
    out.fault = std::string("invalid approach: ") + e.what();
  } catch (const NoPath& e) {
    out.fault = std::string("no path: ") + e.what();
  }
  if (phase_ == Phase::NearGoal) out.command.advisory = Advisory::SlowDown;
  out.command.brake_request = out.command.brake_request || brake() || out.fault.has_value();
  return out;
}

}  // namespace glide
