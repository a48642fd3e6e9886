// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <queue>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "glide/bridge.hpp"
#include "glide/engine.hpp"
#include "glide/report.hpp"

using namespace glide;
using nlohmann::json;

namespace {

std::filesystem::path assets() { return GLIDE_TEST_ASSETS; }

std::shared_ptr<const ScenarioMap> bundled_map(const std::string& name) {
  return std::make_shared<const ScenarioMap>(load_map(assets() / "maps" / (name + ".json")));
}

SimConfig scenario(const std::string& name) { return load_config(assets() / "scenarios" / (name + ".json")); }

std::filesystem::path scratch(const std::string& tag) {
  auto d = std::filesystem::temp_directory_path() / ("glide-accept-" + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Vec2 xy(const json& v) { return {v[0].get<double>(), v[1].get<double>()}; }

Pose2 destination_pose(const ScenarioMap& m, const std::string& name) {
  for (const auto& d : m.destinations)
    if (d.name == name) return d.pose;
  throw std::runtime_error("no destination " + name);
}

// ---------------------------------------------------------------------------
// 1. Junction protocol

ScenarioMap fourway_map() {
  const double res = 0.1;
  OccupancyGrid grid(200, 180, res, {0, 0}, Cell::Occupied);
  std::map<std::string, Vec2> pos{{"S", {10, 2}}, {"X", {10, 8}}, {"N", {10, 15}}, {"E", {17, 8}}, {"W", {3, 8}}};
  std::vector<CorridorEdge> edges{{"s", "S", "X", {pos["S"], pos["X"]}},
                                  {"n", "X", "N", {pos["X"], pos["N"]}},
                                  {"e", "X", "E", {pos["X"], pos["E"]}},
                                  {"w", "X", "W", {pos["X"], pos["W"]}}};
  for (const auto& e : edges) {
    const Vec2 a = e.polyline[0], b = e.polyline[1];
    grid.fill_rect({std::min(a.x, b.x) - 1.0, std::min(a.y, b.y) - 1.0},
                   {std::max(a.x, b.x) + 1.0, std::max(a.y, b.y) + 1.0}, Cell::Free);
  }
  std::vector<JunctionNode> nodes;
  for (const char* id : {"S", "X", "N", "E", "W"}) {
    JunctionNode n{id, pos[id], {}};
    for (const auto& e : edges) {
      if (e.from == id) {
        const Vec2 d = e.polyline[1] - e.polyline[0];
        n.exits[quantize_heading(std::atan2(d.y, d.x))] = e.id;
      }
      if (e.to == id) {
        const Vec2 d = e.polyline[0] - e.polyline[1];
        n.exits[quantize_heading(std::atan2(d.y, d.x))] = e.id;
      }
    }
    nodes.push_back(std::move(n));
  }
  ScenarioMap m;
  m.name = "fourway";
  m.grid = std::move(grid);
  m.graph = JunctionGraph(std::move(nodes), edges);
  m.destinations = {{"north room", {10, 15, kPi / 2}, 0.3}, {"east room", {17, 8, 0.0}, 0.3},
                    {"west room", {3, 8, kPi}, 0.3}};
  return m;
}

struct Rig {
  const ScenarioMap& map;
  LocalCostmap free_map{{-5.0, -5.0}, 10, 3.0};
  UserDirectedGuidance g;

  Rig(const ScenarioMap& m, const std::string& goal, Pose2 start, const std::string& node, GuidanceConfig gc = {})
      : map(m), g(m, goal, gc, ControllerConfig{}, PlannerConfig{}, VehicleParams{}) {
    g.start(start, node);
  }
  GuidanceOutput at(double x, double y, double th, double now, std::optional<TwistDirection> tw = {}) {
    std::optional<TwistCommand> cmd;
    if (tw) cmd = TwistCommand{*tw, now};
    return g.tick(PoseEstimate::exact({x, y, th}), free_map, cmd, now);
  }
};

bool haptic_is(const GuidanceOutput& o, HapticMeaning m, std::vector<int> actuators) {
  return o.haptics.size() == 1 && o.haptics[0].meaning == m && o.haptics[0].actuators == actuators;
}

Verdict junction_protocol() {
  using Phase = UserDirectedGuidance::Phase;
  using RD = RelativeDirection;
  const auto t0 = std::chrono::steady_clock::now();
  const ScenarioMap three = load_map(assets() / "maps" / "three_destinations.json");
  const ScenarioMap four = fourway_map();
  const Pose2 s3{12.0, 2.0, kPi / 2}, s4{10.0, 2.0, kPi / 2};
  const double up = kPi / 2;

  std::vector<std::pair<std::string, std::function<bool()>>> table;
  // L junction (J1 heading north: forward or left)
  table.push_back({"L enter: announce, brake, options F/L", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     const auto o = r.at(12.0, 5.2, up, 1.0);
                     return o.announcement && o.command.brake_request && r.g.junction_kind() == JunctionKind::L &&
                            r.g.options() == std::vector<RD>{RD::Forward, RD::Left} &&
                            r.g.phase() == Phase::AtJunction;
                   }});
  table.push_back({"L before announce time: still held", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     r.at(12.0, 5.2, up, 1.0);
                     const auto o = r.at(12.0, 5.2, up, 1.9);
                     return !o.plan_changed && o.command.brake_request && r.g.phase() == Phase::AtJunction;
                   }});
  table.push_back({"L no twist: default forward", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     r.at(12.0, 5.2, up, 1.0);
                     const auto o = r.at(12.0, 5.2, up, 2.0);
                     return o.plan_changed && !o.command.brake_request && o.haptics.empty() &&
                            r.g.current_edge() == "n1" && r.g.target_node() == "J2";
                   }});
  table.push_back({"L feasible left twist: left ack, turn", [&] {
                     Rig r(three, "lounge", s3, "S");
                     r.at(12.0, 5.2, up, 1.0);
                     const auto o = r.at(12.0, 5.2, up, 1.3, TwistDirection::Left);
                     return haptic_is(o, HapticMeaning::LeftAck, {0, 1, 2}) && r.g.current_edge() == "w1" &&
                            !o.command.brake_request;
                   }});
  table.push_back({"L infeasible right twist: hold, no ack", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     r.at(12.0, 5.2, up, 1.0);
                     const auto o = r.at(12.0, 5.2, up, 1.2, TwistDirection::Right);
                     return o.haptics.empty() && o.command.brake_request && r.g.phase() == Phase::InfeasibleHold;
                   }});
  table.push_back({"L infeasible hold lasts its full duration", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     r.at(12.0, 5.2, up, 1.0);
                     r.at(12.0, 5.2, up, 1.2, TwistDirection::Right);
                     const auto mid = r.at(12.0, 5.2, up, 3.1);
                     const auto end = r.at(12.0, 5.2, up, 3.2);
                     return mid.command.brake_request && !mid.plan_changed && end.plan_changed &&
                            !end.command.brake_request && r.g.target_node() == "J2";
                   }});
  // T junction (J2 heading north: left or right)
  const auto at_t = [&](Rig& r) {
    r.at(12.0, 5.2, up, 1.0);
    r.at(12.0, 5.2, up, 2.0);
    return r.at(12.0, 11.2, up, 10.0);
  };
  table.push_back({"T enter: announce, brake, options L/R", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     const auto o = at_t(r);
                     return o.announcement && o.command.brake_request && r.g.junction_kind() == JunctionKind::T &&
                            r.g.options() == std::vector<RD>{RD::Left, RD::Right};
                   }});
  table.push_back({"T no twist: brake held indefinitely", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     at_t(r);
                     for (double t = 10.5; t < 60.0; t += 0.5) {
                       const auto o = r.at(12.0, 11.2, up, t);
                       if (!o.command.brake_request || o.plan_changed) return false;
                     }
                     return r.g.phase() == Phase::AtJunction;
                   }});
  table.push_back({"T right twist: right ack, turn", [&] {
                     Rig r(three, "kitchen", s3, "S");
                     at_t(r);
                     const auto o = r.at(12.0, 11.2, up, 15.0, TwistDirection::Right);
                     return haptic_is(o, HapticMeaning::RightAck, {3, 4, 5}) && r.g.target_node() == "K" &&
                            !o.command.brake_request;
                   }});
  table.push_back({"T left twist: left ack, turn", [&] {
                     Rig r(three, "work area", s3, "S");
                     at_t(r);
                     const auto o = r.at(12.0, 11.2, up, 15.0, TwistDirection::Left);
                     return haptic_is(o, HapticMeaning::LeftAck, {0, 1, 2}) && r.g.target_node() == "WA1";
                   }});
  // four-way (X heading north: forward, left and right)
  table.push_back({"4-way enter: options F/L/R, all announced", [&] {
                     Rig r(four, "east room", s4, "S");
                     const auto o = r.at(10.0, 7.2, up, 1.0);
                     return o.announcement && o.command.brake_request &&
                            r.g.junction_kind() == JunctionKind::FourWay &&
                            r.g.options() == std::vector<RD>{RD::Forward, RD::Left, RD::Right} &&
                            o.announcement->text ==
                                "Go straight to get to the north room or turn left to get to the west room or "
                                "turn right to get to the east room";
                   }});
  table.push_back({"4-way no twist: default forward", [&] {
                     Rig r(four, "east room", s4, "S");
                     r.at(10.0, 7.2, up, 1.0);
                     const auto o = r.at(10.0, 7.2, up, 2.0);
                     return o.plan_changed && r.g.current_edge() == "n";
                   }});
  table.push_back({"4-way right twist: right ack, east", [&] {
                     Rig r(four, "east room", s4, "S");
                     r.at(10.0, 7.2, up, 1.0);
                     const auto o = r.at(10.0, 7.2, up, 1.4, TwistDirection::Right);
                     return haptic_is(o, HapticMeaning::RightAck, {3, 4, 5}) && r.g.current_edge() == "e";
                   }});
  table.push_back({"4-way left twist: left ack, west", [&] {
                     Rig r(four, "east room", s4, "S");
                     r.at(10.0, 7.2, up, 1.0);
                     const auto o = r.at(10.0, 7.2, up, 1.4, TwistDirection::Left);
                     return haptic_is(o, HapticMeaning::LeftAck, {0, 1, 2}) && r.g.current_edge() == "w";
                   }});
  table.push_back({"4-way configured to hold: waits for a twist", [&] {
                     GuidanceConfig gc;
                     gc.fourway_holds = true;
                     Rig r(four, "east room", s4, "S", gc);
                     r.at(10.0, 7.2, up, 1.0);
                     const auto o = r.at(10.0, 7.2, up, 30.0);
                     return o.command.brake_request && r.g.phase() == Phase::AtJunction;
                   }});

  int passed = 0;
  std::string failed;
  for (const auto& [name, check] : table) {
    bool ok = false;
    try {
      ok = check();
    } catch (const std::exception& e) {
      ok = false;
    }
    passed += ok;
    if (!ok) failed += " [" + name + "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const int total = static_cast<int>(table.size());
  Verdict v;
  v.pass = passed == total && secs < 1.0;
  v.detail = std::to_string(passed) + "/" + std::to_string(total) + " transitions, " + fmt("%.3f s", secs) + failed;
  return v;
}

// ---------------------------------------------------------------------------
// 2. Goal behaviour

bool has_haptic(const json& rec, const char* meaning) {
  for (const auto& h : rec["haptics"])
    if (h["meaning"] == meaning) return true;
  return false;
}

Verdict goal_behaviour() {
  const auto map = bundled_map("corridor_loop");
  const Vec2 goal = destination_pose(*map, "goal").position();
  int violations = 0;
  double worst_slow = 0.0, worst_brake = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SimConfig c = scenario("loop_glide");
    c.seed = seed;
    c.truth_localization = true;
    const RunResult r = run(c, map);
    const ParsedLog log = parse_log(r.log);
    const double slack = c.user.target_speed * c.controller_period;
    std::optional<double> slow, brake;
    for (const auto& rec : log.ticks) {
      const double d = distance(xy(rec["truth"]), goal);
      if (!slow && has_haptic(rec, "SlowDown")) slow = d;
      if (!brake && rec["brake_cmd"] == true && rec["guidance"]["state"] == "Arrived") brake = d;
    }
    const bool ok = r.status == TrialStatus::Arrived && slow && brake &&
                    std::abs(*slow - c.controller.slowdown_distance) <= slack &&
                    *brake <= c.controller.arrival_tolerance;
    violations += !ok;
    if (slow) worst_slow = std::max(worst_slow, std::abs(*slow - c.controller.slowdown_distance));
    if (brake) worst_brake = std::max(worst_brake, *brake);
  }
  return {violations == 0, fmt("%.0f violations over 20 seeds; slow-down within %.3f m of 2.0 m, brake at <= %.3f m",
                               violations, worst_slow, worst_brake)};
}

// ---------------------------------------------------------------------------
// 3, 4. Pillar course

struct CourseStats {
  int arrived = 0;
  int collisions = 0;
  int runs = 0;
};

CourseStats pillar_course(double speed) {
  const auto map = bundled_map("corridor_loop");
  CourseStats s;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SimConfig c = scenario("loop_glide");
    c.seed = seed;
    c.user.target_speed = speed;
    const RunResult r = run(c, map);
    s.arrived += r.status == TrialStatus::Arrived;
    s.collisions += r.metrics.potential_collisions;
    ++s.runs;
  }
  return s;
}

// ---------------------------------------------------------------------------
// 5. Zig-zag

// Sign changes of the commanded steering per metre travelled. Commands inside
// the deadband keep the previous sign.
double sign_changes_per_metre(const ParsedLog& log, double deadband) {
  int changes = 0, sign = 0;
  double travelled = 0.0;
  std::optional<Vec2> last;
  for (const auto& rec : log.ticks) {
    const Vec2 p = xy(rec["truth"]);
    if (last) travelled += distance(p, *last);
    last = p;
    const double s = rec["steer_cmd"].get<double>();
    const int now = s > deadband ? 1 : s < -deadband ? -1 : 0;
    if (now != 0) {
      if (sign != 0 && now != sign) ++changes;
      sign = now;
    }
  }
  return travelled > 0.0 ? changes / travelled : 0.0;
}

Verdict zigzag(double deadband) {
  const auto map = bundled_map("straight_corridor");
  std::vector<double> means;
  for (double offset : {0.0, 0.15, 0.3}) {
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SimConfig c = scenario("straight_glide");
      c.seed = seed;
      c.user.drift.stddev = offset;
      const RunResult r = run(c, map);
      sum += sign_changes_per_metre(parse_log(r.log), deadband);
    }
    means.push_back(sum / 20.0);
  }
  const bool ok = means[0] < 0.1 && means[0] <= means[1] && means[1] <= means[2];
  return {ok, fmt("sign changes per m at offsets 0/0.15/0.3: %.3f / %.3f / %.3f (steer deadband %.2f rad)", means[0],
                  means[1], means[2], deadband)};
}

// ---------------------------------------------------------------------------
// 6. Planner

std::optional<double> dijkstra(const SearchGrid& g, CellIndex s, CellIndex t) {
  if (!g.ok(s.x, s.y) || !g.ok(t.x, t.y)) return std::nullopt;
  const auto id = [&](int x, int y) { return static_cast<std::size_t>(y) * g.width + x; };
  std::vector<double> dist(static_cast<std::size_t>(g.width * g.height), 1e300);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[id(s.x, s.y)] = 0.0;
  pq.push({0.0, id(s.x, s.y)});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    const int x = static_cast<int>(u % g.width), y = static_cast<int>(u / g.width);
    if (x == t.x && y == t.y) return d;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const int nx = x + dx, ny = y + dy;
        if (!g.ok(nx, ny)) continue;
        if (dx && dy && (!g.ok(x + dx, y) || !g.ok(x, y + dy))) continue;
        const double step = (dx && dy ? std::sqrt(2.0) : 1.0) * g.step_factor(nx, ny);
        if (d + step < dist[id(nx, ny)]) {
          dist[id(nx, ny)] = d + step;
          pq.push({d + step, id(nx, ny)});
        }
      }
  }
  return std::nullopt;
}

Verdict planner() {
  Rng rng(6);
  int agree = 0, solvable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    SearchGrid g;
    g.width = g.height = 20;
    g.traversable.assign(400, 1);
    for (auto& c : g.traversable) c = rng.uniform() < 0.25 ? 0 : 1;
    const CellIndex s{static_cast<int>(rng.index(20)), static_cast<int>(rng.index(20))};
    const CellIndex t{static_cast<int>(rng.index(20)), static_cast<int>(rng.index(20))};
    const auto want = dijkstra(g, s, t);
    try {
      const GridPath got = astar(g, s, t);
      agree += want && std::abs(got.cost - *want) < 1e-9;
      ++solvable;
    } catch (const NoPath&) {
      agree += !want;
    }
  }

  // smoothed plans through random 20 x 20 block worlds of 1 m blocks
  PlannerConfig pc;
  int plans = 0, bends = 0, curvature_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    OccupancyGrid grid(200, 200, 0.1, {0, 0}, Cell::Free);
    std::vector<std::pair<int, int>> open;
    for (int by = 0; by < 20; ++by)
      for (int bx = 0; bx < 20; ++bx) {
        const bool edge = bx == 0 || by == 0 || bx == 19 || by == 19;
        if (edge || rng.uniform() < 0.15)
          grid.fill_rect({bx * 1.0, by * 1.0}, {bx + 1.0, by + 1.0}, Cell::Occupied);
        else
          open.push_back({bx, by});
      }
    const auto a = open[rng.index(open.size())], b = open[rng.index(open.size())];
    const Pose2 start{a.first + 0.5, a.second + 0.5, 0.0}, goal{b.first + 0.5, b.second + 0.5, 0.0};
    try {
      const GlobalPlan p = plan_global(grid, start, goal, pc);
      ++plans;
      bool bent = false;
      for (std::size_t i = 1; i + 1 < p.waypoints.size(); ++i) {
        const double k = menger_curvature(p.waypoints[i - 1].position(), p.waypoints[i].position(),
                                          p.waypoints[i + 1].position());
        bent = bent || k > 0.05;
        if (k > 1.0 / pc.min_radius + 1e-6) ++curvature_violations;
      }
      bends += bent;
    } catch (const NoPath&) {
    }
  }
  const bool ok = agree == 100 && curvature_violations == 0 && bends > 10;
  return {ok, fmt("A* = oracle on %.0f/100 grids (%.0f solvable); %.0f smoothed plans (%.0f with turns), ", agree,
                  solvable, plans, bends) +
                  std::to_string(curvature_violations) + " waypoints over 1/R_min"};
}

// ---------------------------------------------------------------------------
// 7. Pure pursuit

Verdict pursuit() {
  GlobalPlan plan;
  for (int i = 0; i <= 400; ++i) plan.waypoints.push_back({i * 0.1, 0.0, 0.0});
  plan.goal = plan.waypoints.back();
  const ControllerConfig cc;
  const VehicleParams vp;
  VehicleState st;
  st.pose = {0.0, 1.0, 0.0};
  const HandleState push{1.0, 0.0, 0.0};
  const double dt = 0.02;
  double steer = 0.0, travelled = 0.0;
  std::optional<double> below;
  double worst_after = 0.0;
  for (int k = 0; travelled < 30.0; ++k) {
    if (k % 5 == 0) steer = pure_pursuit_steer(PoseEstimate::exact(st.pose), plan, cc, vp).first.steer;
    const VehicleState next = step_kinematics(st, push, steer, dt, vp);
    travelled += distance(next.pose.position(), st.pose.position());
    st = next;
    const double e = std::abs(st.pose.y);
    if (!below && e < 0.05) below = travelled;
    if (below) worst_after = std::max(worst_after, e);
  }
  const bool ok = below && *below <= 10.0 && worst_after < 0.05;
  return {ok, below ? fmt("cross-track error under 0.05 m after %.2f m, peak %.4f m afterwards", *below, worst_after)
                    : std::string("never converged")};
}

// ---------------------------------------------------------------------------
// 8. MCL

// Poses where the walls in view pin down both axes: facing a dead end, at a
// corner, and leaving a corner.
Verdict localization() {
  const auto map = bundled_map("corridor_loop");
  const std::vector<Pose2> starts{{5.0, 2.0, kPi}, {11.0, 2.0, 0.0}, {14.0, 4.0, kPi / 2}};
  double worst = 0.0, worst_norm = 0.0;
  int failures = 0;
  for (const Pose2& start : starts)
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      Rng rng(derive_seed(seed, "acceptance"));
      LocalizerConfig cfg;
      cfg.particle_count = 500;
      cfg.init_std_xy = 1.0;
      Localizer loc(map->grid, cfg);
      Pose2 truth = start;
      loc.reset(truth, rng);
      for (int i = 0; i < 20; ++i) {
        const OdomDelta d{0.1, 0.0};
        truth = apply_odometry(truth, d);
        loc.predict(d, rng);
        loc.update(simulate_scan(map->grid, truth, DepthSensorParams{}, {}, rng), rng);
        worst_norm = std::max(worst_norm, std::abs(loc.particles().weight_sum() - 1.0));
      }
      const double err = distance(loc.estimate().mean.position(), truth.position());
      worst = std::max(worst, err);
      failures += err >= 2.0 * map->grid.resolution();
    }
  const bool ok = failures == 0 && worst_norm <= 1e-9;
  return {ok, fmt("worst error %.3f m over 3 poses x 10 seeds (limit %.2f m), weight sum off by at most %.1e", worst,
                  2.0 * map->grid.resolution(), worst_norm)};
}

// ---------------------------------------------------------------------------
// 9. Determinism

struct Inbox {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<json> frames;

  void push(const std::string& s) {
    std::lock_guard lk(mu);
    frames.push_back(json::parse(s));
    cv.notify_all();
  }
  std::optional<json> next(double seconds) {
    std::unique_lock lk(mu);
    if (!cv.wait_for(lk, std::chrono::duration<double>(seconds), [&] { return !frames.empty(); })) return {};
    json f = std::move(frames.front());
    frames.pop_front();
    return f;
  }
};

// Drives a user-directed live session to the kitchen the way a keyboard
// client would: push, and twist right when J2 is announced.
std::optional<std::string> live_session(const std::filesystem::path& log_dir, std::string& status) {
  BridgeConfig bc;
  bc.sim = scenario("ud_kitchen");
  bc.map = bundled_map("three_destinations");
  bc.speed = 0.0;
  bc.log_dir = log_dir;
  Inbox inbox;
  std::uint64_t seq = 0;
  SessionRunner runner(bc, "live", [&](std::string s) { inbox.push(s); }, [](std::string) {}, [] { return 0.0; });
  runner.start();
  const auto send = [&](json m) {
    m["session"] = "live";
    m["seq"] = ++seq;
    runner.push_inbound(m.dump());
  };
  const auto input = [&](double push, double torque) {
    send({{"type", "input"}, {"push_speed", push}, {"torque", torque}});
  };
  input(0.6, 0.0);
  send({{"type", "control"}, {"action", "start"}});
  while (auto f = inbox.next(60.0)) {
    const std::string type = (*f)["type"];
    if (type == "tick" && f->contains("announcement") && (*f)["announcement"]["node"] == "J2") input(0.6, 0.8);
    if (type == "tick")
      for (const auto& h : (*f)["haptics"])
        if (h["meaning"] == "RightAck") input(0.6, 0.0);
    if (type == "trial_end") {
      status = (*f)["status"];
      break;
    }
    if (type == "error") break;
  }
  runner.disconnect();
  runner.join();
  const auto logs = runner.logs();
  if (logs.empty()) return {};
  return logs.back().string();
}

Verdict determinism() {
  int identical = 0, runs = 0;
  for (const char* name : {"loop_glide", "ud_kitchen", "ud_lounge"}) {
    SimConfig c = scenario(name);
    const auto map = bundled_map(name == std::string("loop_glide") ? "corridor_loop" : "three_destinations");
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      c.seed = seed;
      identical += join_log(run(c, map).log) == join_log(run(c, map).log);
      ++runs;
    }
  }
  std::string status;
  const auto path = live_session(scratch("live"), status);
  bool refeed = false;
  if (path) {
    const ParsedLog recorded = parse_log(read_log(*path));
    refeed = join_log(rerun(recorded, bundled_map("three_destinations")).log) == slurp(*path);
  }
  const bool ok = identical == runs && status == "arrived" && refeed;
  return {ok, std::to_string(identical) + "/" + std::to_string(runs) + " repeat runs byte-identical; live session " +
                  (status.empty() ? std::string("did not end") : status) + ", re-fed log " +
                  (refeed ? "identical" : "differs")};
}

// ---------------------------------------------------------------------------
// 10. Reporting

Verdict reporting() {
  BatchSpec spec = load_batch(assets() / "batch" / "study.json");
  spec.out_dir = scratch("batch");
  spec.write_logs = false;
  const BatchReport rep = run_batch(spec);
  const ojson j = ojson::parse(slurp(spec.out_dir / "summary.json"));
  std::string problem;
  const std::vector<std::string> keys{"mode", "trial", "avg", "sd", "min", "max", "n", "runs", "complete"};
  for (const char* table : {"time_min", "errors"}) {
    const auto& rows = j["tables"][table];
    if (rows.size() != 6) problem += std::string(table) + " has " + std::to_string(rows.size()) + " rows; ";
    for (std::size_t i = 0; i < rows.size() && i < 6; ++i) {
      std::vector<std::string> got;
      for (auto it = rows[i].begin(); it != rows[i].end(); ++it) got.push_back(it.key());
      if (got != keys) problem += std::string(table) + " row keys differ; ";
      const std::string mode = i < 3 ? "glide-directed" : "user-directed";
      if (rows[i]["mode"] != mode || rows[i]["trial"] != static_cast<int>(i % 3) + 1)
        problem += std::string(table) + " row order differs; ";
      if (rows[i]["runs"] != 9) problem += std::string(table) + " row without 9 users; ";
    }
  }
  const std::string csv = slurp(spec.out_dir / "summary.csv");
  if (csv.rfind("table,mode,trial,avg,sd,min,max,n,runs,complete\n", 0) != 0) problem += "csv header differs; ";
  if (std::count(csv.begin(), csv.end(), '\n') != 13) problem += "csv row count differs; ";
  const std::string complete = rep.complete() ? "all 54 runs complete" : std::to_string(rep.failures.size()) + " runs failed";
  return {problem.empty(), problem.empty() ? "2 tables x 6 mode/trial rows of Avg/SD/Min/Max over 9 users; " + complete
                                           : problem};
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&](int n, const char* name, const std::function<Verdict()>& check) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !v.pass;
    std::printf("%s %2d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", n, name, v.detail.c_str(), secs);
    std::fflush(stdout);
  };

  report(1, "junction protocol", junction_protocol);
  report(2, "goal behaviour", goal_behaviour);
  CourseStats slow, fast;
  report(3, "collision-free at study pace", [&] {
    slow = pillar_course(0.5);
    return Verdict{slow.arrived == 20 && slow.collisions == 0,
                   fmt("%.0f/20 arrived, %.0f potential collisions at 0.5 m/s", slow.arrived, slow.collisions)};
  });
  report(4, "speed limitation", [&] {
    fast = pillar_course(2.0);
    const double a = fast.collisions / 20.0, b = slow.collisions / 20.0;
    return Verdict{a > b, fmt("mean potential collisions %.2f at 2.0 m/s vs %.2f at 0.5 m/s", a, b)};
  });
  report(5, "zig-zag", [] { return zigzag(0.01); });
  report(6, "planner optimality", planner);
  report(7, "pure pursuit convergence", pursuit);
  report(8, "localization", localization);
  report(9, "determinism", determinism);
  report(10, "reporting", reporting);
  return failed == 0 ? 0 : 1;
}
