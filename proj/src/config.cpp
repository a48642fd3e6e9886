#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "glide/engine.hpp"

#ifndef GLIDE_ASSET_DIR
#define GLIDE_ASSET_DIR "assets"
#endif

namespace glide {

namespace {

using json = nlohmann::json;

// Reads a JSON object into config fields and writes the resolved values back
// out, so parsing and canonical serialization share one field list.
class Binder {
 public:
  Binder(const json* src, std::string path) : src_(src), path_(std::move(path)) {
    if (src_ && !src_->is_object()) fail("", "must be an object");
    out = ojson::object();
  }

  void num(const char* key, double& v) {
    if (const json* j = get(key)) {
      if (!j->is_number()) fail(key, "must be a number");
      v = j->get<double>();
    }
    out[key] = v;
  }
  void count(const char* key, int& v) {
    if (const json* j = get(key)) {
      if (!j->is_number_integer()) fail(key, "must be an integer");
      v = j->get<int>();
    }
    out[key] = v;
  }
  void size(const char* key, std::size_t& v) {
    if (const json* j = get(key)) {
      if (!j->is_number_unsigned()) fail(key, "must be a non-negative integer");
      v = j->get<std::size_t>();
    }
    out[key] = v;
  }
  void u64(const char* key, std::uint64_t& v) {
    if (const json* j = get(key)) {
      if (!j->is_number_unsigned()) fail(key, "must be a non-negative integer");
      v = j->get<std::uint64_t>();
    }
    out[key] = v;
  }
  void byte(const char* key, std::uint8_t& v) {
    int i = v;
    count(key, i);
    if (i < 0 || i > 255) fail(key, "must lie in [0, 255]");
    v = static_cast<std::uint8_t>(i);
  }
  void flag(const char* key, bool& v) {
    if (const json* j = get(key)) {
      if (!j->is_boolean()) fail(key, "must be a boolean");
      v = j->get<bool>();
    }
    out[key] = v;
  }
  void str(const char* key, std::string& v) {
    if (const json* j = get(key)) {
      if (!j->is_string()) fail(key, "must be a string");
      v = j->get<std::string>();
    }
    out[key] = v;
  }
  void vec2(const char* key, Vec2& v) {
    if (const json* j = get(key)) {
      if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number())
        fail(key, "must be [x, y]");
      v = {(*j)[0].get<double>(), (*j)[1].get<double>()};
    }
    out[key] = ojson::array({v.x, v.y});
  }
  template <class F>
  void section(const char* key, F&& f) {
    const json* j = get(key);
    Binder sub(j, path_.empty() ? key : path_ + "." + key);
    f(sub);
    sub.finish();
    out[key] = std::move(sub.out);
  }
  const json* get(const char* key) {
    used_.insert(key);
    if (!src_) return nullptr;
    auto it = src_->find(key);
    return it == src_->end() ? nullptr : &*it;
  }
  void finish() const {
    if (!src_) return;
    for (auto it = src_->begin(); it != src_->end(); ++it)
      if (!used_.count(it.key())) fail(it.key(), "is not a recognised key");
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    std::string where = path_;
    if (!key.empty()) where = where.empty() ? key : where + "." + key;
    throw ConfigError("config: '" + (where.empty() ? std::string("<root>") : where) + "' " + what);
  }

  ojson out;

 private:
  const json* src_;
  std::string path_;
  std::set<std::string> used_;
};

std::string policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::Scripted: return "scripted";
    case PolicyKind::ToDestination: return "to_destination";
    case PolicyKind::Random: return "random";
  }
  return "scripted";
}

void bind_policy(Binder& b, TwistPolicy& p) {
  std::string kind = policy_name(p.kind);
  b.str("kind", kind);
  if (kind == "scripted") p.kind = PolicyKind::Scripted;
  else if (kind == "to_destination") p.kind = PolicyKind::ToDestination;
  else if (kind == "random") p.kind = PolicyKind::Random;
  else b.fail("kind", "must be scripted, to_destination or random");
  if (const json* r = b.get("route")) {
    if (!r->is_array()) b.fail("route", "must be an array of directions");
    p.route.clear();
    for (const auto& d : *r) {
      if (!d.is_string()) b.fail("route", "must be an array of directions");
      auto dir = parse_direction(d.get<std::string>());
      if (!dir) b.fail("route", "contains unknown direction '" + d.get<std::string>() + "'");
      p.route.push_back(*dir);
    }
  }
  ojson route = ojson::array();
  for (auto d : p.route) route.push_back(std::string(to_string(d)));
  b.out["route"] = route;
  b.str("destination", p.destination);
}

void bind_obstacles(Binder& b, std::vector<ObstacleSpec>& obstacles) {
  if (const json* arr = b.get("obstacles")) {
    if (!arr->is_array()) b.fail("obstacles", "must be an array");
    obstacles.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const json& o = (*arr)[i];
      Binder ob(&o, "obstacles[" + std::to_string(i) + "]");
      ObstacleSpec spec;
      std::string kind = "disc";
      ob.str("kind", kind);
      if (kind == "disc") {
        DiscObstacle d;
        ob.vec2("center", d.center);
        ob.num("radius", d.radius);
        if (!(d.radius > 0.0)) ob.fail("radius", "must be positive");
        spec.shape = d;
      } else if (kind == "box") {
        BoxObstacle bx;
        ob.vec2("lo", bx.lo);
        ob.vec2("hi", bx.hi);
        if (!(bx.lo.x < bx.hi.x && bx.lo.y < bx.hi.y)) ob.fail("hi", "must exceed lo");
        spec.shape = bx;
      } else {
        ob.fail("kind", "must be disc or box");
      }
      ob.num("appear", spec.appear);
      if (const json* v = ob.get("vanish")) {
        if (!v->is_number()) ob.fail("vanish", "must be a number");
        spec.vanish = v->get<double>();
      }
      ob.vec2("velocity", spec.velocity);
      ob.num("jitter", spec.jitter);
      ob.finish();
      obstacles.push_back(spec);
    }
  }
  ojson out = ojson::array();
  for (const auto& s : obstacles) {
    ojson o;
    if (const auto* d = std::get_if<DiscObstacle>(&s.shape)) {
      o["kind"] = "disc";
      o["center"] = ojson::array({d->center.x, d->center.y});
      o["radius"] = d->radius;
    } else {
      const auto& bx = std::get<BoxObstacle>(s.shape);
      o["kind"] = "box";
      o["lo"] = ojson::array({bx.lo.x, bx.lo.y});
      o["hi"] = ojson::array({bx.hi.x, bx.hi.y});
    }
    o["appear"] = s.appear;
    if (s.vanish) o["vanish"] = *s.vanish;
    o["velocity"] = ojson::array({s.velocity.x, s.velocity.y});
    o["jitter"] = s.jitter;
    out.push_back(o);
  }
  b.out["obstacles"] = out;
}

void bind(Binder& b, SimConfig& c) {
  std::string format = kConfigFormat;
  b.str("format", format);
  if (format != kConfigFormat) b.fail("format", "must be \"" + std::string(kConfigFormat) + "\"");
  b.str("map", c.map);
  std::string mode(to_string(c.mode));
  b.str("mode", mode);
  if (auto m = parse_mode(mode)) c.mode = *m;
  else b.fail("mode", "must be glide-directed or user-directed");
  b.u64("seed", c.seed);
  b.num("dt", c.dt);
  b.num("controller_period", c.controller_period);
  b.num("timeout", c.timeout);
  b.section("start", [&](Binder& s) {
    s.str("node", c.start_node);
    double deg = c.start_heading * 180.0 / kPi;
    s.num("heading_deg", deg);
    c.start_heading = wrap_angle(deg * kPi / 180.0);
  });
  b.str("goal", c.goal);
  b.section("user", [&](Binder& s) {
    s.num("target_speed", c.user.target_speed);
    s.num("slow_speed", c.user.slow_speed);
    s.num("accel", c.user.accel);
    s.num("reaction_latency", c.user.reaction_latency);
    s.section("drift", [&](Binder& d) {
      d.num("mean", c.user.drift.mean);
      d.num("std", c.user.drift.stddev);
      d.num("reversion", c.user.drift.reversion);
    });
    s.section("policy", [&](Binder& p) { bind_policy(p, c.user.policy); });
    s.num("twist_torque", c.user.twist_torque);
    s.num("twist_duration", c.user.twist_duration);
    s.flag("proximity_slowing", c.user.proximity_slowing);
    s.num("proximity_range", c.user.proximity_range);
  });
  b.section("vehicle", [&](Binder& s) {
    s.num("wheelbase", c.vehicle.wheelbase);
    s.num("max_steer", c.vehicle.max_steer);
    s.num("base_half_width", c.vehicle.base_half_width);
    s.flag("brake_stop", c.vehicle.brake_stop);
    s.num("brake_decel", c.vehicle.brake_decel);
    s.num("max_steer_rate", c.vehicle.max_steer_rate);
    s.num("misalignment_gain", c.vehicle.misalignment_gain);
  });
  b.section("odometry", [&](Binder& s) {
    s.num("distance_std_per_m", c.odometry.distance_std_per_m);
    s.num("heading_std_per_m", c.odometry.heading_std_per_m);
    s.num("heading_std_per_rad", c.odometry.heading_std_per_rad);
  });
  b.section("sensor", [&](Binder& s) {
    double fov_deg = c.sensor.fov * 180.0 / kPi;
    s.num("fov_deg", fov_deg);
    c.sensor.fov = fov_deg * kPi / 180.0;
    s.num("max_range", c.sensor.max_range);
    s.count("rays", c.sensor.ray_count);
    s.num("noise_std", c.sensor.noise_std);
  });
  b.section("costmap", [&](Binder& s) {
    s.num("side", c.costmap.side);
    s.num("resolution", c.costmap.resolution);
    s.num("inflation_radius", c.costmap.inflation_radius);
    s.num("inscribed_radius", c.costmap.inscribed_radius);
    s.num("cost_scaling", c.costmap.cost_scaling);
    s.num("decay_time", c.costmap.decay_time);
  });
  b.section("localization", [&](Binder& s) {
    std::string mode = c.truth_localization ? "truth" : "mcl";
    s.str("mode", mode);
    if (mode != "truth" && mode != "mcl") s.fail("mode", "must be mcl or truth");
    c.truth_localization = mode == "truth";
    auto& l = c.localization;
    s.size("particles", l.particle_count);
    s.num("init_std_xy", l.init_std_xy);
    s.num("init_std_theta", l.init_std_theta);
    s.section("motion", [&](Binder& m) {
      m.num("distance_std_per_m", l.motion.distance_std_per_m);
      m.num("heading_std_per_m", l.motion.heading_std_per_m);
      m.num("heading_std_per_rad", l.motion.heading_std_per_rad);
    });
    s.section("likelihood", [&](Binder& m) {
      m.num("sigma_hit", l.likelihood.sigma_hit);
      m.num("z_hit", l.likelihood.z_hit);
      m.num("z_rand", l.likelihood.z_rand);
      m.count("beam_stride", l.likelihood.beam_stride);
      m.num("exponent", l.likelihood.exponent);
    });
    s.num("converged_trace", l.estimate.converged_position_trace);
    s.num("converged_concentration", l.estimate.converged_heading_concentration);
  });
  b.section("planner", [&](Binder& s) {
    s.num("min_radius", c.planner.min_radius);
    s.num("preferred_radius", c.planner.preferred_radius);
    s.num("spacing", c.planner.spacing);
    s.num("robot_radius", c.planner.robot_radius);
    s.num("centering_range", c.planner.centering_range);
    s.num("centering_weight", c.planner.centering_weight);
  });
  b.section("controller", [&](Binder& s) {
    s.num("lookahead", c.controller.lookahead);
    s.num("slowdown_distance", c.controller.slowdown_distance);
    s.num("arrival_tolerance", c.controller.arrival_tolerance);
    s.num("curvature_slow", c.controller.curvature_slow);
    s.count("candidate_steer_count", c.controller.candidate_steer_count);
    s.num("safety_distance", c.controller.safety_distance);
    s.num("avoid_horizon", c.controller.avoid_horizon);
    s.num("deviation_weight", c.controller.deviation_weight);
    s.byte("cost_slow_threshold", c.controller.cost_slow_threshold);
  });
  b.section("guidance", [&](Binder& s) {
    s.num("junction_radius", c.guidance.junction_radius);
    s.num("announce_time", c.guidance.announce_time);
    s.num("infeasible_time", c.guidance.infeasible_time);
    s.flag("fourway_holds", c.guidance.fourway_holds);
    s.num("ack_duration", c.guidance.ack_duration);
    s.num("slowdown_duration", c.guidance.slowdown_duration);
    s.num("approach_tail", c.guidance.approach_tail);
  });
  b.section("torque", [&](Binder& s) {
    s.num("on", c.torque.on);
    s.num("off", c.torque.off);
    s.num("hold", c.torque.hold);
    s.num("range", c.torque.range);
  });
  b.section("blockage", [&](Binder& s) {
    s.num("horizon", c.blockage.horizon);
    s.num("hold_time", c.blockage.hold_time);
  });
  b.section("events", [&](Binder& s) {
    s.num("misalignment_offset", c.events.misalignment_offset);
    s.num("misalignment_dwell", c.events.misalignment_dwell);
    s.num("safety_distance", c.events.safety_distance);
    s.num("rearm_margin", c.events.rearm_margin);
    s.num("intervention_hold", c.events.intervention_hold);
    s.num("backup_distance", c.events.backup_distance);
    s.num("stuck_time", c.events.stuck_time);
  });
  bind_obstacles(b, c.obstacles);
}

}  // namespace

int SimConfig::period_ticks() const {
  return std::max(1, static_cast<int>(std::lround(controller_period / dt)));
}

void SimConfig::validate() const {
  if (map.empty()) throw ConfigError("config: 'map' is required");
  if (start_node.empty()) throw ConfigError("config: 'start.node' is required");
  if (!(dt > 0.0)) throw ConfigError("config: 'dt' must be positive");
  if (!(controller_period >= dt)) throw ConfigError("config: 'controller_period' must be >= dt");
  const double ratio = controller_period / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-6)
    throw ConfigError("config: 'controller_period' must be a multiple of dt");
  if (!(timeout > 0.0)) throw ConfigError("config: 'timeout' must be positive");
  if (mode == ModeKind::GlideDirected && goal.empty())
    throw ConfigError("config: glide-directed trials need a 'goal'");
  if (sensor.ray_count < 1) throw ConfigError("config: 'sensor.rays' must be >= 1");
  if (!(sensor.max_range > 0.0)) throw ConfigError("config: 'sensor.max_range' must be positive");
  if (!truth_localization && localization.particle_count < 1)
    throw ConfigError("config: 'localization.particles' must be >= 1");
  user.validate();
  vehicle.validate();
  costmap.validate();
  planner.validate();
  controller.validate();
  guidance.validate();
  torque.validate();
}

SimConfig parse_config(const nlohmann::json& doc) {
  SimConfig cfg;
  Binder b(&doc, "");
  bind(b, cfg);
  b.finish();
  cfg.validate();
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

ojson config_to_json(const SimConfig& cfg) {
  SimConfig copy = cfg;
  Binder b(nullptr, "");
  bind(b, copy);
  return b.out;
}

std::string config_hash(const SimConfig& cfg) { return hex64(fnv1a(config_to_json(cfg).dump())); }

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("GLIDE_ASSET_DIR")) return env;
  return GLIDE_ASSET_DIR;
}

std::filesystem::path resolve_map_path(const std::string& map, const std::filesystem::path& base_dir) {
  namespace fs = std::filesystem;
  const fs::path p(map);
  if (p.is_absolute()) return p;
  if (fs::exists(base_dir / p)) return base_dir / p;
  const fs::path bundled = asset_dir() / "maps" / (p.has_extension() ? p : fs::path(map + ".json"));
  if (fs::exists(bundled)) return bundled;
  return base_dir / p;
}

}  // namespace glide
