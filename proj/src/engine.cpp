#include "glide/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace glide {

std::string_view to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Running: return "running";
    case TrialStatus::Arrived: return "arrived";
    case TrialStatus::Timeout: return "timeout";
    case TrialStatus::Fault: return "fault";
    case TrialStatus::Aborted: return "aborted";
  }
  return "running";
}

ojson TrialMetrics::to_json() const {
  return {{"completed", completed},
          {"time", time},
          {"misalignment_events", misalignment_events},
          {"potential_collisions", potential_collisions}};
}

std::vector<DetectedEvent> EventDetector::step(double now, double lateral_offset, double gap) {
  std::vector<DetectedEvent> out;
  if (std::abs(lateral_offset) > cfg_.misalignment_offset) {
    if (!mis_since_) mis_since_ = now;
    if (!mis_latched_ && now - *mis_since_ >= cfg_.misalignment_dwell - 1e-9) {
      mis_latched_ = true;
      out.push_back({DetectedEvent::Kind::Misalignment, lateral_offset});
    }
  } else {
    mis_since_.reset();
    mis_latched_ = false;
  }
  if (gap < cfg_.safety_distance) {
    if (collision_armed_) {
      collision_armed_ = false;
      out.push_back({DetectedEvent::Kind::PotentialCollision, gap});
    }
  } else if (gap > cfg_.safety_distance + cfg_.rearm_margin) {
    collision_armed_ = true;
  }
  return out;
}

HandleState RecordedUserSource::tick(const UserPerception&) {
  if (next_ < stream_.size()) return stream_[next_++];
  return {};
}

// ---------------------------------------------------------------------------

namespace {

ojson pose_json(const Pose2& p) { return ojson::array({p.x, p.y, p.theta}); }

ojson haptic_json(const HapticPattern& h) {
  return {{"meaning", std::string(to_string(h.meaning))},
          {"actuators", h.actuators},
          {"duration", h.duration}};
}

ojson announcement_json(const JunctionAnnouncement& a) {
  ojson opts = ojson::object();
  for (const auto& [dir, names] : a.options) opts[std::string(to_string(dir))] = names;
  return {{"node", a.node}, {"text", a.text}, {"options", opts}};
}

Obstacle shifted(const Obstacle& o, Vec2 d) {
  if (const auto* disc = std::get_if<DiscObstacle>(&o)) return DiscObstacle{disc->center + d, disc->radius};
  const auto& b = std::get<BoxObstacle>(o);
  return BoxObstacle{b.lo + d, b.hi + d};
}

}  // namespace

Simulation::Simulation(SimConfig cfg, std::shared_ptr<const ScenarioMap> map,
                       std::unique_ptr<UserSource> user)
    : cfg_(std::move(cfg)),
      map_(std::move(map)),
      user_(std::move(user)),
      sensor_rng_(derive_seed(cfg_.seed, "sensor")),
      obstacle_rng_(derive_seed(cfg_.seed, "obstacles")),
      costmap_(cfg_.costmap),
      torque_(cfg_.torque),
      detector_(cfg_.events),
      blockage_(cfg_.blockage) {
  cfg_.validate();
  if (!map_) throw ConfigError("simulation needs a map");
  const JunctionNode* start = map_->graph.find_node(cfg_.start_node);
  if (!start) throw ConfigError("config: start node '" + cfg_.start_node + "' is not in the map");
  // An unset destination means the user heads for the trial goal.
  if (cfg_.user.policy.kind == PolicyKind::ToDestination && cfg_.user.policy.destination.empty())
    cfg_.user.policy.destination = cfg_.goal;
  if (!user_) user_ = std::make_unique<SimUser>(cfg_.user, Rng(derive_seed(cfg_.seed, "user")));

  for (ObstacleSpec spec : cfg_.obstacles) {
    if (spec.jitter > 0.0) {
      const Vec2 d{obstacle_rng_.normal(0.0, spec.jitter), obstacle_rng_.normal(0.0, spec.jitter)};
      spec.shape = shifted(spec.shape, d);
    }
    obstacles_.push_back(spec);
  }

  vstate_.pose = {start->position.x, start->position.y, cfg_.start_heading};
  if (cfg_.truth_localization) {
    est_ = PoseEstimate::exact(vstate_.pose);
  } else {
    localizer_ = std::make_unique<Localizer>(map_->grid, cfg_.localization);
    localizer_->reset(vstate_.pose, sensor_rng_);
    est_ = localizer_->estimate();
  }
  history_.push_back({vstate_.pose, 0.0});

  ojson header;
  header["type"] = "header";
  header["format"] = kLogFormat;
  header["version"] = kVersion;
  header["seed"] = cfg_.seed;
  header["config_hash"] = config_hash(cfg_);
  header["map"] = map_->name;
  header["map_digest"] = map_digest(*map_);
  header["mode"] = std::string(to_string(cfg_.mode));
  header["dt"] = cfg_.dt;
  header["controller_period"] = cfg_.controller_period;
  header["config"] = config_to_json(cfg_);
  header_ = header.dump();

  try {
    if (cfg_.mode == ModeKind::GlideDirected) {
      std::optional<GlobalPlan> best;
      bool known = false;
      std::string why;
      for (const auto& d : map_->destinations) {
        if (d.name != cfg_.goal) continue;
        known = true;
        try {
          GlobalPlan p = plan_global(map_->grid, vstate_.pose, d.pose, cfg_.planner);
          if (!best || p.length() < best->length()) best = std::move(p);
        } catch (const NoPath& e) {
          why = e.what();
        }
      }
      if (!known) throw ConfigError("config: goal '" + cfg_.goal + "' is not a destination of the map");
      if (!best) throw NoPath("no plan to '" + cfg_.goal + "': " + why);
      glide_plan_ = std::move(*best);
      goal_pose_ = glide_plan_.goal;
      glide_.emplace(cfg_.guidance, cfg_.controller, cfg_.vehicle);
    } else {
      if (!cfg_.goal.empty() &&
          std::none_of(map_->destinations.begin(), map_->destinations.end(),
                       [&](const Destination& d) { return d.name == cfg_.goal; }))
        throw ConfigError("config: goal '" + cfg_.goal + "' is not a destination of the map");
      ud_.emplace(*map_, cfg_.goal, cfg_.guidance, cfg_.controller, cfg_.planner, cfg_.vehicle);
      ud_->start(vstate_.pose, cfg_.start_node);
    }
  } catch (const NoPath& e) {
    status_ = TrialStatus::Fault;
    message_ = std::string("no path: ") + e.what();
  } catch (const DanglingEdge& e) {
    status_ = TrialStatus::Fault;
    message_ = std::string("dangling edge: ") + e.what();
  }
}

const GlobalPlan& Simulation::plan() const { return glide_ ? glide_plan_ : ud_->plan(); }

std::string Simulation::guidance_state() const {
  if (glide_) return glide_->state_name();
  if (ud_) return ud_->state_name();
  return "None";
}

std::vector<Obstacle> Simulation::obstacles_at(double t) const {
  std::vector<Obstacle> out;
  for (const auto& s : obstacles_) {
    if (t < s.appear || (s.vanish && t >= *s.vanish)) continue;
    out.push_back(shifted(s.shape, s.velocity * (t - s.appear)));
  }
  return out;
}

double Simulation::truth_gap(double t) const {
  const Vec2 p = vstate_.pose.position();
  double d = clearance_to_occupied(map_->grid, p, 1.0);
  for (const auto& o : obstacles_at(t)) d = std::min(d, surface_distance(o, p));
  return d - cfg_.vehicle.base_half_width;
}

void Simulation::intervene(double t, ojson& events, const char* reason) {
  hold_until_ = t + cfg_.events.intervention_hold;
  user_->recenter();
  // The experimenter pulls the device back along the way it came.
  const VehicleState before = vstate_;
  Pose2 target = history_.front().pose;
  for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
    if (travelled_ - it->travelled >= cfg_.events.backup_distance) {
      target = it->pose;
      break;
    }
  }
  vstate_.pose = target;
  const OdomDelta od = sample_odometry(before, vstate_, cfg_.odometry, sensor_rng_);
  if (localizer_) localizer_->predict(od, sensor_rng_);
  history_.clear();
  travelled_ = 0.0;
  history_.push_back({vstate_.pose, 0.0});
  force_replan_ = true;
  avoid_brake_since_.reset();
  events.push_back({{"kind", "intervention"}, {"reason", reason}});
}

void Simulation::replan(double t, ojson& events, const char* reason) {
  (void)t;
  force_replan_ = false;
  blockage_.reset();
  const Pose2 goal = glide_ ? goal_pose_ : ud_->plan().goal;
  try {
    const OccupancyGrid stamped = stamp_obstacles(map_->grid, costmap_.costmap());
    GlobalPlan p = plan_global(stamped, est_.mean, goal, cfg_.planner);
    if (glide_) glide_plan_ = std::move(p);
    else ud_->replace_plan(std::move(p));
    events.push_back({{"kind", "replan"}, {"reason", reason}});
  } catch (const NoPath& e) {
    events.push_back({{"kind", "replan_failed"}, {"reason", reason}, {"message", e.what()}});
  }
}

void Simulation::controller_tick(double t, ojson& events) {
  const DepthScan scan = simulate_scan(map_->grid, vstate_.pose, cfg_.sensor, obstacles_at(t), sensor_rng_);
  nearest_range_ = scan.nearest();
  if (localizer_) {
    localizer_->update(scan, sensor_rng_);
    est_ = localizer_->estimate();
  } else {
    est_ = PoseEstimate::exact(vstate_.pose);
  }
  const LocalCostmap& cm = costmap_.update(scan, est_, t);

  std::optional<TwistCommand> twist;
  if (!twists_.empty()) {
    twist = twists_.front();
    twists_.pop_front();
  }

  if (force_replan_) replan(t, events, "intervention");
  else if (blockage_.replan_needed(plan(), cm, est_, t)) replan(t, events, "blocked");

  GuidanceOutput out;
  bool guidance_brake = false;
  if (glide_) {
    out = glide_->tick(est_, glide_plan_, cm);
    guidance_brake = glide_->state() == GlideDirectedGuidance::State::Arrived;
    if (glide_->state() == GlideDirectedGuidance::State::Arrived) status_ = TrialStatus::Arrived;
  } else {
    out = ud_->tick(est_, cm, twist, t);
    guidance_brake = ud_->brake();
    if (ud_->phase() == UserDirectedGuidance::Phase::Arrived) status_ = TrialStatus::Arrived;
  }
  steer_cmd_ = out.command.steer;
  brake_cmd_ = out.command.brake_request;
  advisory_ = out.command.advisory;
  pending_haptics_ = out.haptics;
  pending_announcement_ = out.announcement;
  if (out.fault) {
    status_ = TrialStatus::Fault;
    message_ = *out.fault;
    events.push_back({{"kind", "fault"}, {"message", *out.fault}});
    return;
  }

  if (brake_cmd_ && !guidance_brake) {
    if (!avoid_brake_since_) avoid_brake_since_ = t;
    else if (t - *avoid_brake_since_ >= cfg_.events.stuck_time - 1e-9) intervene(t, events, "stuck");
  } else {
    avoid_brake_since_.reset();
  }
}

const ojson& Simulation::step() {
  if (finished()) throw std::logic_error("simulation already finished");
  const double t = time();
  ojson events = ojson::array();

  UserPerception per;
  per.now = t;
  per.dt = cfg_.dt;
  per.brake_engaged = brake_applied_;
  per.haptics = std::move(pending_haptics_);
  per.announcement = std::move(pending_announcement_);
  per.nearest_range = nearest_range_;
  pending_haptics_.clear();
  pending_announcement_.reset();

  HandleState h;
  try {
    h = user_->tick(per);
  } catch (const ScriptExhausted& e) {
    status_ = TrialStatus::Fault;
    message_ = std::string("script exhausted: ") + e.what();
    events.push_back({{"kind", "fault"}, {"message", message_}});
  }
  if (!std::isfinite(h.push_speed) || h.push_speed < 0.0) h.push_speed = 0.0;
  if (!std::isfinite(h.torque)) h.torque = 0.0;
  h.torque = std::clamp(h.torque, -cfg_.torque.range, cfg_.torque.range);
  if (!std::isfinite(h.lateral_offset)) h.lateral_offset = 0.0;

  if (auto tw = torque_.step(h.torque, t)) {
    twists_.push_back(*tw);
    events.push_back({{"kind", "twist"}, {"direction", std::string(to_string(tw->direction))}});
  }

  VehicleState prev = vstate_;
  prev.brake_engaged = brake_applied_;
  const VehicleState next = step_kinematics(prev, h, steer_applied_, cfg_.dt, cfg_.vehicle);
  const OdomDelta od = sample_odometry(prev, next, cfg_.odometry, sensor_rng_);
  if (localizer_) localizer_->predict(od, sensor_rng_);
  vstate_ = next;
  travelled_ += distance(prev.pose.position(), next.pose.position());
  history_.push_back({vstate_.pose, travelled_});
  while (history_.size() > 2 && travelled_ - history_[1].travelled > 4.0 * cfg_.events.backup_distance)
    history_.pop_front();

  for (const auto& ev : detector_.step(t, h.lateral_offset, truth_gap(t))) {
    if (ev.kind == DetectedEvent::Kind::Misalignment) {
      ++misalignments_;
      events.push_back({{"kind", "misalignment"}, {"offset", ev.value}});
    } else {
      ++collisions_;
      events.push_back({{"kind", "potential_collision"}, {"gap", ev.value}});
      intervene(t, events, "potential_collision");
    }
  }

  if (status_ == TrialStatus::Running && tick_ % static_cast<std::uint64_t>(cfg_.period_ticks()) == 0)
    controller_tick(t, events);
  if (status_ == TrialStatus::Running && t >= cfg_.timeout) {
    status_ = TrialStatus::Timeout;
    message_ = "timeout after " + std::to_string(cfg_.timeout) + " s";
  }

  ojson rec;
  rec["type"] = "tick";
  rec["tick"] = tick_;
  rec["t"] = t;
  rec["truth"] = pose_json(vstate_.pose);
  rec["est"] = pose_json(est_.mean);
  rec["converged"] = est_.converged;
  rec["handle"] = {{"push", h.push_speed}, {"offset", h.lateral_offset}, {"torque", h.torque}};
  rec["steer"] = vstate_.steering;
  rec["brake"] = prev.brake_engaged;
  rec["steer_cmd"] = steer_cmd_;
  rec["brake_cmd"] = brake_cmd_;
  rec["advisory"] = std::string(to_string(advisory_));
  rec["guidance"] = glide_ ? ojson(glide_->describe()) : ud_ ? ojson(ud_->describe()) : ojson();
  ojson haptics = ojson::array();
  for (const auto& hp : pending_haptics_) haptics.push_back(haptic_json(hp));
  rec["haptics"] = haptics;
  if (pending_announcement_) rec["announcement"] = announcement_json(*pending_announcement_);
  rec["events"] = std::move(events);
  record_ = std::move(rec);

  steer_applied_ = steer_cmd_;
  brake_applied_ = brake_cmd_ || t < hold_until_;
  ++tick_;
  return record_;
}

void Simulation::abort(std::string message) {
  if (finished()) return;
  status_ = TrialStatus::Aborted;
  message_ = std::move(message);
}

TrialMetrics Simulation::metrics() const {
  TrialMetrics m;
  m.completed = status_ == TrialStatus::Arrived;
  m.time = tick_ > 0 ? static_cast<double>(tick_ - 1) * cfg_.dt : 0.0;
  m.misalignment_events = misalignments_;
  m.potential_collisions = collisions_;
  return m;
}

std::string Simulation::end_line() const {
  ojson end;
  end["type"] = "end";
  end["tick"] = tick_ > 0 ? ojson(tick_ - 1) : ojson(nullptr);
  end["t"] = metrics().time;
  end["status"] = std::string(to_string(status_));
  end["message"] = message_;
  end["metrics"] = metrics().to_json();
  return end.dump();
}

RunResult run(const SimConfig& cfg, std::shared_ptr<const ScenarioMap> map,
              std::unique_ptr<UserSource> user) {
  Simulation sim(cfg, std::move(map), std::move(user));
  RunResult r;
  r.log.push_back(sim.header_line());
  while (!sim.finished()) r.log.push_back(sim.step().dump());
  r.log.push_back(sim.end_line());
  r.metrics = sim.metrics();
  r.status = sim.status();
  r.message = sim.message();
  return r;
}

RunResult rerun(const ParsedLog& recorded, std::shared_ptr<const ScenarioMap> map) {
  SimConfig cfg;
  try {
    cfg = parse_config(recorded.header.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptLog(std::string("log header has no usable config: ") + e.what());
  }
  std::vector<HandleState> stream = handle_stream(recorded);
  const std::size_t n = stream.size();
  Simulation sim(cfg, std::move(map), std::make_unique<RecordedUserSource>(std::move(stream)));
  RunResult r;
  r.log.push_back(sim.header_line());
  const bool aborted = recorded.end.value("status", "") == "aborted";
  while (!sim.finished()) {
    if (aborted && sim.tick() >= n) {
      sim.abort(recorded.end.value("message", ""));
      break;
    }
    r.log.push_back(sim.step().dump());
  }
  r.log.push_back(sim.end_line());
  r.metrics = sim.metrics();
  r.status = sim.status();
  r.message = sim.message();
  return r;
}

RunResult run_file(const std::filesystem::path& config_path, std::optional<std::uint64_t> seed) {
  SimConfig cfg = load_config(config_path);
  if (seed) cfg.seed = *seed;
  const auto map_path = resolve_map_path(cfg.map, config_path.parent_path());
  auto map = std::make_shared<const ScenarioMap>(load_map(map_path));
  return run(cfg, std::move(map));
}

std::string join_log(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  return out;
}

std::vector<std::string> split_log(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    if (nl > pos) out.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return out;
}

void write_log(const std::vector<std::string>& lines, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write log '" + path.string() + "'");
  out << join_log(lines);
}

std::vector<std::string> read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptLog("cannot open log '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return split_log(ss.str());
}

// ---------------------------------------------------------------------------

ParsedLog parse_log(const std::vector<std::string>& lines) {
  ParsedLog log;
  std::optional<std::uint64_t> last;
  const auto where = [&]() {
    return last ? "last valid tick " + std::to_string(*last) : std::string("no valid tick");
  };
  bool ended = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error&) {
      throw CorruptLog("line " + std::to_string(i + 1) + " is not valid JSON (" + where() + ")");
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
      throw CorruptLog("line " + std::to_string(i + 1) + " has no record type (" + where() + ")");
    const std::string type = j["type"];
    if (i == 0) {
      if (type != "header" || j.value("format", "") != kLogFormat)
        throw CorruptLog("log does not start with a " + std::string(kLogFormat) + " header");
      log.header = std::move(j);
      continue;
    }
    if (ended) throw CorruptLog("records after the end record (" + where() + ")");
    if (type == "tick") {
      if (!j.contains("tick") || !j["tick"].is_number_unsigned())
        throw CorruptLog("line " + std::to_string(i + 1) + " has no tick number (" + where() + ")");
      const auto k = j["tick"].get<std::uint64_t>();
      if (last && k <= *last)
        throw CorruptLog("tick " + std::to_string(k) + " does not increase (" + where() + ")");
      last = k;
      log.ticks.push_back(std::move(j));
    } else if (type == "end") {
      log.end = std::move(j);
      ended = true;
    } else {
      throw CorruptLog("unknown record type '" + type + "' (" + where() + ")");
    }
  }
  if (lines.empty()) throw CorruptLog("log is empty");
  if (!ended) throw CorruptLog("log is truncated: no end record (" + where() + ")");
  return log;
}

TrialMetrics metrics(const ParsedLog& log) {
  TrialMetrics m;
  m.completed = log.end.value("status", "") == "arrived";
  m.time = log.end.value("t", 0.0);
  for (const auto& t : log.ticks) {
    if (!t.contains("events")) continue;
    for (const auto& e : t["events"]) {
      const std::string kind = e.value("kind", "");
      if (kind == "misalignment") ++m.misalignment_events;
      else if (kind == "potential_collision") ++m.potential_collisions;
    }
  }
  return m;
}

TrialMetrics metrics(const std::vector<std::string>& lines) { return metrics(parse_log(lines)); }

std::vector<HandleState> handle_stream(const ParsedLog& log) {
  std::vector<HandleState> out;
  out.reserve(log.ticks.size());
  for (const auto& t : log.ticks) {
    const auto& h = t.at("handle");
    out.push_back({h.at("push").get<double>(), h.at("offset").get<double>(), h.at("torque").get<double>()});
  }
  return out;
}

void replay(const std::vector<std::string>& lines, double rate,
            const std::function<void(const nlohmann::json&)>& sink,
            const std::function<void(double)>& sleep) {
  const ParsedLog log = parse_log(lines);
  const double dt = log.header.value("dt", 0.02);
  for (std::size_t i = 0; i < log.ticks.size(); ++i) {
    if (i > 0 && rate > 0.0) {
      const double delay = dt / rate;
      if (sleep) sleep(delay);
      else std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    sink(log.ticks[i]);
  }
}

}  // namespace glide
