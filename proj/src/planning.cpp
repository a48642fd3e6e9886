#include "glide/planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace glide {

SearchGrid SearchGrid::from_grid(const OccupancyGrid& grid) {
  SearchGrid g;
  g.width = grid.width();
  g.height = grid.height();
  g.traversable.resize(grid.cells().size());
  for (std::size_t i = 0; i < g.traversable.size(); ++i)
    g.traversable[i] = grid.cells()[i] == Cell::Free ? 1 : 0;
  return g;
}

GridPath astar(const SearchGrid& grid, CellIndex start, CellIndex goal) {
  if (!grid.ok(start.x, start.y)) throw NoPath("start cell is not traversable");
  if (!grid.ok(goal.x, goal.y)) throw NoPath("goal cell is not traversable");
  const int w = grid.width;
  const auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  const std::size_t n = static_cast<std::size_t>(grid.width) * grid.height;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> g(n, kInf);
  std::vector<std::int64_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  const auto h = [&](int x, int y) {
    const double dx = std::abs(x - goal.x), dy = std::abs(y - goal.y);
    return dx + dy + (std::sqrt(2.0) - 2.0) * std::min(dx, dy);
  };
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  g[idx(start.x, start.y)] = 0.0;
  open.push({h(start.x, start.y), idx(start.x, start.y)});
  const std::size_t target = idx(goal.x, goal.y);
  while (!open.empty()) {
    const auto [f, cur] = open.top();
    open.pop();
    if (closed[cur]) continue;
    closed[cur] = 1;
    if (cur == target) break;
    const int cx = static_cast<int>(cur % w), cy = static_cast<int>(cur / w);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int nx = cx + dx, ny = cy + dy;
        if (!grid.ok(nx, ny)) continue;
        if (dx != 0 && dy != 0 && (!grid.ok(cx + dx, cy) || !grid.ok(cx, cy + dy))) continue;
        const std::size_t ni = idx(nx, ny);
        if (closed[ni]) continue;
        const double step = (dx != 0 && dy != 0) ? std::sqrt(2.0) : 1.0;
        const double cand = g[cur] + step * grid.step_factor(nx, ny);
        if (cand < g[ni]) {
          g[ni] = cand;
          parent[ni] = static_cast<std::int64_t>(cur);
          open.push({cand + h(nx, ny), ni});
        }
      }
  }
  if (!closed[target]) throw NoPath("goal is unreachable");
  GridPath path;
  path.cost = g[target];
  for (std::int64_t i = static_cast<std::int64_t>(target); i >= 0; i = parent[i])
    path.cells.push_back({static_cast<int>(i % w), static_cast<int>(i / w)});
  std::reverse(path.cells.begin(), path.cells.end());
  return path;
}

// ---------------------------------------------------------------------------

void PlannerConfig::validate() const {
  if (!(min_radius > 0.0)) throw ConfigError("planner.min_radius must be positive");
  if (preferred_radius < min_radius)
    throw ConfigError("planner.preferred_radius must be >= min_radius");
  if (!(spacing > 0.0)) throw ConfigError("planner.spacing must be positive");
  if (robot_radius < 0.0) throw ConfigError("planner.robot_radius must be >= 0");
}

std::vector<Vec2> GlobalPlan::points() const {
  std::vector<Vec2> out;
  out.reserve(waypoints.size());
  for (const auto& w : waypoints) out.push_back(w.position());
  return out;
}

double GlobalPlan::length() const {
  const auto pts = points();
  return polyline_length(pts);
}

double menger_curvature(Vec2 a, Vec2 b, Vec2 c) {
  const double ab = distance(a, b), bc = distance(b, c), ca = distance(c, a);
  const double denom = ab * bc * ca;
  if (denom < 1e-12) return 0.0;
  return 2.0 * std::abs((b - a).cross(c - a)) / denom;
}

double max_curvature(const std::vector<Pose2>& waypoints) {
  double k = 0.0;
  for (std::size_t i = 1; i + 1 < waypoints.size(); ++i)
    k = std::max(k, menger_curvature(waypoints[i - 1].position(), waypoints[i].position(),
                                     waypoints[i + 1].position()));
  return k;
}

namespace {

struct Piece {
  bool arc = false;
  Vec2 a, b;           // line ends
  Vec2 center;         // arc
  double radius = 0.0;
  double start = 0.0;  // arc start angle about center
  double sweep = 0.0;  // signed
  double len = 0.0;

  Vec2 point(double s) const {
    if (!arc) return len > 0.0 ? a + (b - a) * (s / len) : a;
    const double ang = start + sweep * (s / len);
    return center + unit(ang) * radius;
  }
  double heading(double s) const {
    if (!arc) return std::atan2(b.y - a.y, b.x - a.x);
    const double ang = start + sweep * (s / len);
    return wrap_angle(ang + (sweep > 0.0 ? kPi / 2.0 : -kPi / 2.0));
  }
};

std::vector<Vec2> dedupe(const std::vector<Vec2>& pts) {
  std::vector<Vec2> out;
  for (const auto& p : pts)
    if (out.empty() || distance(out.back(), p) > 1e-9) out.push_back(p);
  return out;
}

}  // namespace

namespace {

bool line_clear(Vec2 a, Vec2 b, double spacing, const std::function<bool(Vec2)>& ok) {
  if (!ok) return true;
  const int steps = std::max(1, static_cast<int>(std::ceil(distance(a, b) / (spacing / 2.0))));
  for (int i = 0; i <= steps; ++i)
    if (!ok(a + (b - a) * (static_cast<double>(i) / steps))) return false;
  return true;
}

// Intersection of the line through a0->a1 with the line through b0->b1, if it
// lies ahead of a0 and behind b1.
std::optional<Vec2> meet(Vec2 a0, Vec2 a1, Vec2 b0, Vec2 b1) {
  const Vec2 d1 = a1 - a0, d2 = b1 - b0;
  const double den = d1.cross(d2);
  if (std::abs(den) < 1e-12) return std::nullopt;
  const double t = (b0 - a0).cross(d2) / den;
  const Vec2 x = a0 + d1 * t;
  if ((x - a0).dot(d1) <= 0.0 || (b1 - x).dot(d2) <= 0.0) return std::nullopt;
  return x;
}

// Simplifies the polyline around corner k so a rounding attempt can succeed:
// folds the shorter neighbouring segment into one vertex, or drops the vertex.
bool relax_corner(std::vector<Vec2>& pts, std::size_t k, double spacing,
                  const std::function<bool(Vec2)>& ok) {
  const std::size_t n = pts.size();
  struct Option {
    double key;
    std::size_t first, last;  // replaced range [first, last]
    std::optional<Vec2> with;
  };
  std::vector<Option> opts;
  if (k + 2 < n && k >= 1)
    if (auto x = meet(pts[k - 1], pts[k], pts[k + 1], pts[k + 2]))
      opts.push_back({distance(pts[k], pts[k + 1]), k, k + 1, x});
  if (k >= 2)
    if (auto x = meet(pts[k - 2], pts[k - 1], pts[k], pts[k + 1]))
      opts.push_back({distance(pts[k - 1], pts[k]), k - 1, k, x});
  if (k >= 1 && k + 1 < n) opts.push_back({1e9, k, k, std::nullopt});
  std::sort(opts.begin(), opts.end(), [](const Option& a, const Option& b) { return a.key < b.key; });
  for (const auto& o : opts) {
    const Vec2 before = pts[o.first - 1];
    const Vec2 after = pts[o.last + 1];
    if (o.with) {
      if (!line_clear(before, *o.with, spacing, ok) || !line_clear(*o.with, after, spacing, ok)) continue;
    } else if (!line_clear(before, after, spacing, ok)) {
      continue;
    }
    pts.erase(pts.begin() + static_cast<long>(o.first), pts.begin() + static_cast<long>(o.last) + 1);
    if (o.with) pts.insert(pts.begin() + static_cast<long>(o.first), *o.with);
    return true;
  }
  return false;
}

std::optional<std::vector<Pose2>> round_once(const std::vector<Vec2>& pts, double min_radius,
                                             double preferred_radius, double spacing,
                                             const std::function<bool(Vec2)>& ok, std::size_t& failed) {
  if (pts.empty()) return std::vector<Pose2>{};
  if (pts.size() == 1) return std::vector<Pose2>{Pose2{pts[0].x, pts[0].y, 0.0}};

  const std::size_t n = pts.size();
  std::vector<double> seg_len(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) seg_len[i] = distance(pts[i], pts[i + 1]);

  struct Corner {
    double t = 0.0;  // tangent length, 0 = no arc
    double radius = 0.0;
    double phi = 0.0;
    double sign = 0.0;
  };
  std::vector<Corner> corners(n);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const Vec2 u1 = (pts[k] - pts[k - 1]) * (1.0 / seg_len[k - 1]);
    const Vec2 u2 = (pts[k + 1] - pts[k]) * (1.0 / seg_len[k]);
    const double phi = std::atan2(std::abs(u1.cross(u2)), u1.dot(u2));
    if (phi < 1e-9) continue;
    failed = k;
    if (phi > kPi - 1e-6) return std::nullopt;
    const double sign = u1.cross(u2) > 0.0 ? 1.0 : -1.0;
    const double in_avail = seg_len[k - 1] - corners[k - 1].t;
    const double out_avail = (k + 2 < n) ? seg_len[k] / 2.0 : seg_len[k];
    bool placed = false;
    for (double r = preferred_radius; r >= min_radius - 1e-9; r -= 0.1) {
      const double radius = std::max(r, min_radius);
      const double t = radius * std::tan(phi / 2.0);
      if (t > in_avail + 1e-9 || t > out_avail + 1e-9) continue;
      if (ok) {
        const Vec2 t1 = pts[k] - u1 * t;
        const Vec2 c = t1 + Vec2{-u1.y, u1.x} * (sign * radius);
        const double a0 = std::atan2(t1.y - c.y, t1.x - c.x);
        const int steps = std::max(2, static_cast<int>(std::ceil(radius * phi / (spacing / 2.0))));
        bool clear = true;
        for (int i = 0; i <= steps && clear; ++i)
          clear = ok(c + unit(a0 + sign * phi * i / steps) * radius);
        if (!clear) continue;
      }
      corners[k] = {t, radius, phi, sign};
      placed = true;
      break;
    }
    if (!placed) return std::nullopt;
  }

  std::vector<Piece> pieces;
  Vec2 cursor = pts[0];
  for (std::size_t k = 1; k < n; ++k) {
    const Vec2 u1 = (pts[k] - pts[k - 1]) * (1.0 / seg_len[k - 1]);
    const Corner& c = corners[k];
    const Vec2 t1 = pts[k] - u1 * c.t;
    if (distance(cursor, t1) > 1e-12) {
      Piece line;
      line.a = cursor;
      line.b = t1;
      line.len = distance(cursor, t1);
      pieces.push_back(line);
    }
    cursor = t1;
    if (c.t > 0.0) {
      const Vec2 u2 = (pts[k + 1] - pts[k]) * (1.0 / seg_len[k]);
      Piece arc;
      arc.arc = true;
      arc.radius = c.radius;
      arc.center = t1 + Vec2{-u1.y, u1.x} * (c.sign * c.radius);
      arc.start = std::atan2(t1.y - arc.center.y, t1.x - arc.center.x);
      arc.sweep = c.sign * c.phi;
      arc.len = c.radius * c.phi;
      pieces.push_back(arc);
      cursor = pts[k] + u2 * c.t;
    }
  }

  double total = 0.0;
  for (const auto& p : pieces) total += p.len;
  const int count = std::max(1, static_cast<int>(std::ceil(total / spacing - 1e-9)));
  const double step = total / count;
  std::vector<Pose2> out;
  out.reserve(static_cast<std::size_t>(count) + 1);
  std::size_t pi = 0;
  double base = 0.0;
  for (int i = 0; i <= count; ++i) {
    const double s = i == count ? total : i * step;
    while (pi + 1 < pieces.size() && s > base + pieces[pi].len) {
      base += pieces[pi].len;
      ++pi;
    }
    const double local = std::clamp(s - base, 0.0, pieces[pi].len);
    const Vec2 p = i == count ? pts.back() : pieces[pi].point(local);
    out.push_back({p.x, p.y, pieces[pi].heading(local)});
  }
  return out;
}

}  // namespace

std::optional<std::vector<Pose2>> round_corners(const std::vector<Vec2>& raw, double min_radius,
                                                double preferred_radius, double spacing,
                                                const std::function<bool(Vec2)>& ok) {
  std::vector<Vec2> pts = dedupe(raw);
  for (std::size_t attempt = 0; attempt <= raw.size(); ++attempt) {
    std::size_t failed = 0;
    if (auto out = round_once(pts, min_radius, preferred_radius, spacing, ok, failed)) return out;
    if (!relax_corner(pts, failed, spacing, ok)) return std::nullopt;
  }
  return std::nullopt;
}

namespace {

double clearance_at(const DistanceField& df, const OccupancyGrid& grid, Vec2 p) {
  // Distance from the cell centre to the nearest occupied cell boundary.
  if (!grid.is_free(p)) return 0.0;
  return std::max(0.0, df.at_world(p) - grid.resolution() / 2.0);
}

bool segment_clear(const DistanceField& df, const OccupancyGrid& grid, Vec2 a, Vec2 b,
                   double threshold) {
  const double len = distance(a, b);
  const int steps = std::max(1, static_cast<int>(std::ceil(len / (grid.resolution() / 2.0))));
  for (int i = 0; i <= steps; ++i) {
    const Vec2 p = a + (b - a) * (static_cast<double>(i) / steps);
    if (clearance_at(df, grid, p) < threshold) return false;
  }
  return true;
}

}  // namespace

GlobalPlan plan_global(const OccupancyGrid& grid, const Pose2& start, const Pose2& goal,
                       const PlannerConfig& cfg) {
  cfg.validate();
  const DistanceField df(grid);
  const double res = grid.resolution();
  SearchGrid sg = SearchGrid::from_grid(grid);
  sg.penalty.assign(sg.traversable.size(), 0.0);
  std::vector<double> clr(sg.traversable.size(), 0.0);
  for (int y = 0; y < grid.height(); ++y)
    for (int x = 0; x < grid.width(); ++x) {
      const std::size_t i = grid.index(x, y);
      if (!sg.traversable[i]) continue;
      const double c = std::max(0.0, df.at(x, y) - res / 2.0);
      clr[i] = c;
      if (c < cfg.robot_radius) {
        sg.traversable[i] = 0;
        continue;
      }
      if (c < cfg.centering_range)
        sg.penalty[i] = cfg.centering_weight * (cfg.centering_range - c) / cfg.centering_range;
    }

  const auto sc = grid.cell_of(start.position());
  const auto gc = grid.cell_of(goal.position());
  if (!sc || !sg.ok(sc->x, sc->y)) throw NoPath("start is not in free space with clearance");
  if (!gc || !sg.ok(gc->x, gc->y)) throw NoPath("goal is not in free space with clearance");

  const GridPath raw = astar(sg, *sc, *gc);
  std::vector<Vec2> pts;
  std::vector<double> pclr;
  for (const auto& c : raw.cells) {
    pts.push_back(grid.center_of(c.x, c.y));
    pclr.push_back(clr[grid.index(c.x, c.y)]);
  }
  pts.front() = start.position();
  pts.back() = goal.position();

  // Greedy line-of-sight shortcutting that keeps at least the clearance the
  // raw path already had over the skipped stretch.
  std::vector<Vec2> simple{pts.front()};
  std::size_t i = 0;
  while (i + 1 < pts.size()) {
    std::size_t best = i + 1;
    double floor = std::min(pclr[i], pclr[i + 1]);
    for (std::size_t j = i + 2; j < pts.size(); ++j) {
      floor = std::min(floor, pclr[j]);
      const double thr = std::max(cfg.robot_radius, floor - res);
      if (!segment_clear(df, grid, pts[i], pts[j], thr)) break;
      best = j;
    }
    simple.push_back(pts[best]);
    i = best;
  }

  const double hard = cfg.robot_radius - res / 2.0;
  const auto ok = [&](Vec2 p) { return clearance_at(df, grid, p) >= hard; };
  auto wps = round_corners(simple, cfg.min_radius, cfg.preferred_radius, cfg.spacing, ok);
  if (!wps) throw NoPath("corners cannot be rounded at the minimum radius");
  for (const auto& w : *wps)
    if (!ok(w.position())) throw NoPath("smoothed plan leaves the clearance corridor");
  GlobalPlan plan;
  plan.waypoints = std::move(*wps);
  plan.goal = goal;
  plan.min_radius = cfg.min_radius;
  return plan;
}

GlobalPlan plan_along(std::vector<Vec2> polyline, const Pose2& goal, const PlannerConfig& cfg) {
  cfg.validate();
  auto wps = round_corners(polyline, cfg.min_radius, cfg.preferred_radius, cfg.spacing);
  if (!wps) throw NoPath("corners cannot be rounded at the minimum radius");
  GlobalPlan plan;
  plan.waypoints = std::move(*wps);
  plan.goal = goal;
  plan.min_radius = cfg.min_radius;
  return plan;
}

// ---------------------------------------------------------------------------

void ControllerConfig::validate() const {
  if (!(lookahead > 0.0)) throw ConfigError("controller.lookahead must be positive");
  if (!(arrival_tolerance > 0.0)) throw ConfigError("controller.arrival_tolerance must be positive");
  if (!(slowdown_distance > arrival_tolerance))
    throw ConfigError("controller.slowdown_distance must exceed arrival_tolerance");
  if (candidate_steer_count < 1) throw ConfigError("controller.candidate_steer_count must be >= 1");
  if (!(avoid_horizon > 0.0)) throw ConfigError("controller.avoid_horizon must be positive");
}

std::string_view to_string(Advisory a) { return a == Advisory::SlowDown ? "SlowDown" : "None"; }

std::string_view to_string(GoalStatus s) {
  switch (s) {
    case GoalStatus::Far: return "Far";
    case GoalStatus::Near: return "Near";
    case GoalStatus::Arrived: return "Arrived";
  }
  return "Far";
}

std::pair<SteeringCommand, PursuitGeometry> pure_pursuit_steer(const PoseEstimate& est,
                                                                const GlobalPlan& plan,
                                                                const ControllerConfig& cfg,
                                                                const VehicleParams& params) {
  if (plan.empty()) throw PlanExhausted("plan is empty");
  const std::vector<Vec2> pts = plan.points();
  const Vec2 p = est.mean.position();
  PursuitGeometry geo;
  Vec2 target = pts.back();
  if (pts.size() >= 2) {
    const auto proj = project_onto_polyline(pts, p);
    geo.projection_s = proj.s;
    if (proj.s >= polyline_length(pts) - 1e-6) throw PlanExhausted("passed the end of the plan");
    bool found = false;
    for (std::size_t i = proj.segment; i + 1 < pts.size() && !found; ++i) {
      const Vec2 a = i == proj.segment ? proj.point : pts[i];
      const Vec2 b = pts[i + 1];
      const Vec2 d = b - a;
      const Vec2 f = a - p;
      const double A = d.dot(d);
      if (A < 1e-18) continue;
      const double B = 2.0 * f.dot(d);
      const double C = f.dot(f) - cfg.lookahead * cfg.lookahead;
      const double disc = B * B - 4.0 * A * C;
      if (disc < 0.0) continue;
      const double t = (-B + std::sqrt(disc)) / (2.0 * A);
      if (t >= 0.0 && t <= 1.0) {
        target = a + d * t;
        found = true;
      }
    }
    // off the path by more than the lookahead: head for the nearest point
    if (!found && distance(proj.point, p) >= cfg.lookahead) target = proj.point;
  }
  geo.lookahead_point = target;
  const Vec2 local = to_local(est.mean, target);
  const double dist = local.norm();
  geo.alpha = std::atan2(local.y, local.x);
  geo.curvature = dist > 1e-9 ? 2.0 * std::sin(geo.alpha) / dist : 0.0;
  SteeringCommand cmd;
  cmd.steer = std::clamp(std::atan(params.wheelbase * geo.curvature), -params.max_steer,
                         params.max_steer);
  if (std::abs(geo.curvature) > cfg.curvature_slow) cmd.advisory = Advisory::SlowDown;
  return {cmd, geo};
}

std::vector<Vec2> steering_arc(const Pose2& pose, double steer, double length, double step,
                               const VehicleParams& params) {
  const double k = std::tan(steer) / params.wheelbase;
  const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) {
    const double s = length * i / n;
    if (std::abs(k) < 1e-9) {
      out.push_back(pose.position() + unit(pose.theta) * s);
    } else {
      const double th = pose.theta + k * s;
      out.push_back({pose.x + (std::sin(th) - std::sin(pose.theta)) / k,
                     pose.y - (std::cos(th) - std::cos(pose.theta)) / k});
    }
  }
  return out;
}

SteeringCommand avoid_adjust(const SteeringCommand& cmd, const PoseEstimate& est,
                             const LocalCostmap& costmap, const ControllerConfig& cfg,
                             const VehicleParams& params) {
  std::vector<double> candidates{cmd.steer};
  const int k = cfg.candidate_steer_count;
  for (int i = 0; i + 1 < k; ++i) {
    const double f = k > 2 ? static_cast<double>(i) / (k - 2) : 0.5;
    candidates.push_back(-params.max_steer + 2.0 * params.max_steer * f);
  }
  const double step = costmap.resolution() / 2.0;
  double best_score = std::numeric_limits<double>::infinity();
  std::optional<double> best;
  std::uint8_t best_peak = 0;
  for (double d : candidates) {
    double sum = 0.0;
    std::uint8_t peak = 0;
    bool feasible = true;
    for (const Vec2& q : steering_arc(est.mean, d, cfg.avoid_horizon, step, params)) {
      const std::uint8_t c = costmap.at_world(q);
      if (c >= kInscribedCost) {
        feasible = false;
        break;
      }
      peak = std::max(peak, c);
      sum += c / 255.0 * step;
    }
    if (!feasible) continue;
    const double score = sum + cfg.deviation_weight * std::abs(d - cmd.steer);
    if (score < best_score) {
      best_score = score;
      best = d;
      best_peak = peak;
    }
  }
  SteeringCommand out = cmd;
  if (!best) {
    out.brake_request = true;
    out.advisory = Advisory::SlowDown;
    return out;
  }
  out.steer = *best;
  if (best_peak >= cfg.cost_slow_threshold) out.advisory = Advisory::SlowDown;
  return out;
}

GoalStatus goal_check(const PoseEstimate& est, Vec2 goal, const ControllerConfig& cfg) {
  const double d = distance(est.mean.position(), goal);
  if (d <= cfg.arrival_tolerance) return GoalStatus::Arrived;
  if (d <= cfg.slowdown_distance) return GoalStatus::Near;
  return GoalStatus::Far;
}

// ---------------------------------------------------------------------------

bool plan_blocked(const GlobalPlan& plan, const LocalCostmap& costmap, const PoseEstimate& est,
                  const BlockageConfig& cfg) {
  if (plan.waypoints.size() < 2) return false;
  const auto pts = plan.points();
  const auto proj = project_onto_polyline(pts, est.mean.position());
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0) s += distance(pts[i - 1], pts[i]);
    if (s < proj.s) continue;
    if (s > proj.s + cfg.horizon) break;
    if (costmap.at_world(pts[i]) >= kInscribedCost) return true;
  }
  return false;
}

bool BlockageMonitor::replan_needed(const GlobalPlan& plan, const LocalCostmap& costmap,
                                    const PoseEstimate& est, double now) {
  if (!plan_blocked(plan, costmap, est, cfg_)) {
    blocked_since_.reset();
    return false;
  }
  if (!blocked_since_) blocked_since_ = now;
  return now - *blocked_since_ > cfg_.hold_time;
}

OccupancyGrid stamp_obstacles(const OccupancyGrid& grid, const LocalCostmap& costmap) {
  OccupancyGrid out = grid;
  for (const Vec2& p : costmap.lethal_cells())
    if (auto c = out.cell_of(p)) out.set(c->x, c->y, Cell::Occupied);
  return out;
}

}  // namespace glide
