#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "glide/core.hpp"
#include "glide/floorplan.hpp"
#include "glide/sensing.hpp"
#include "glide/vehicle.hpp"

namespace glide {

// ---------------------------------------------------------------------------
// Grid search

/// Traversability and optional per-cell penalty for 8-connected search.
/// A step into cell c costs its octile length (1 or sqrt 2, in cells) times
/// (1 + penalty[c]).
struct SearchGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> traversable;  // 1 = may enter
  std::vector<double> penalty;            // empty means all zero

  bool ok(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           traversable[static_cast<std::size_t>(y) * width + x] != 0;
  }
  double step_factor(int x, int y) const {
    return penalty.empty() ? 1.0 : 1.0 + penalty[static_cast<std::size_t>(y) * width + x];
  }
  /// Free cells of `grid` (Unknown and Occupied are not traversable).
  static SearchGrid from_grid(const OccupancyGrid& grid);
};

struct GridPath {
  std::vector<CellIndex> cells;
  double cost = 0.0;  // in cell units
};

/// A* with the octile heuristic. Diagonal steps may not cut corners: both
/// orthogonal neighbours must be traversable. Throws NoPath.
GridPath astar(const SearchGrid& grid, CellIndex start, CellIndex goal);

// ---------------------------------------------------------------------------
// Global plans

struct PlannerConfig {
  double min_radius = 1.0;        // R_min, m
  double preferred_radius = 1.5;  // tried first when corners allow
  double spacing = 0.1;           // waypoint spacing, m
  double robot_radius = 0.35;     // hard clearance for planned points, m
  double centering_range = 1.0;   // clearance below which the proximity penalty applies, m
  double centering_weight = 2.0;

  void validate() const;
};

struct GlobalPlan {
  std::vector<Pose2> waypoints;
  Pose2 goal;
  double min_radius = 1.0;

  bool empty() const { return waypoints.empty(); }
  std::vector<Vec2> points() const;
  double length() const;
};

/// Plans on `grid` from `start` to `goal`: A* over cells with clearance of at
/// least robot_radius, line-of-sight shortcutting that never moves closer to
/// walls than the raw path, arc corners of radius >= R_min, resampling.
/// Throws NoPath when either end is blocked, the goal is unreachable, or the
/// corners cannot be rounded at R_min within the corridors.
GlobalPlan plan_global(const OccupancyGrid& grid, const Pose2& start, const Pose2& goal,
                       const PlannerConfig& cfg);

/// Rounds the corners of a given polyline (e.g. a corridor edge) and resamples
/// it. Throws NoPath when a corner cannot take an arc of radius R_min.
GlobalPlan plan_along(std::vector<Vec2> polyline, const Pose2& goal, const PlannerConfig& cfg);

/// Replaces interior vertices with tangent arcs and resamples to `spacing`.
/// Each corner takes the largest radius in [min_radius, preferred_radius]
/// (0.1 m steps) whose arc fits the neighbouring segments and whose points all
/// satisfy `ok`. Returns nullopt if some corner admits no such radius.
std::optional<std::vector<Pose2>> round_corners(const std::vector<Vec2>& pts, double min_radius,
                                                double preferred_radius, double spacing,
                                                const std::function<bool(Vec2)>& ok = {});

/// Menger curvature of three points (0 for degenerate triples).
double menger_curvature(Vec2 a, Vec2 b, Vec2 c);

/// Largest Menger curvature over consecutive waypoint triples.
double max_curvature(const std::vector<Pose2>& waypoints);

// ---------------------------------------------------------------------------
// Steering

struct ControllerConfig {
  double lookahead = 0.8;           // L_d, m
  double slowdown_distance = 2.0;   // d_slow, m
  double arrival_tolerance = 0.3;   // m
  double curvature_slow = 0.8;      // 1/m, pursuit curvature that advises slowing
  int candidate_steer_count = 11;
  double safety_distance = 0.1;     // d_safe, m
  double avoid_horizon = 1.0;       // arc length scored by avoid_adjust, m
  double deviation_weight = 4.0;    // per rad of deviation from the pursuit command
  std::uint8_t cost_slow_threshold = 128;

  void validate() const;
};

enum class Advisory : std::uint8_t { None, SlowDown };

std::string_view to_string(Advisory a);

struct SteeringCommand {
  double steer = 0.0;  // delta_cmd, rad
  Advisory advisory = Advisory::None;
  bool brake_request = false;
};

struct PursuitGeometry {
  Vec2 lookahead_point;
  double alpha = 0.0;
  double curvature = 0.0;
  double projection_s = 0.0;  // arc length of the nearest plan point
};

/// Regulated pure pursuit with the regulation turned into advisories. The
/// lookahead point is where the circle of radius L_d around the device first
/// crosses the plan beyond the nearest point; near the plan end the final
/// waypoint is used. Throws PlanExhausted when the projection reaches the end
/// of the plan.
std::pair<SteeringCommand, PursuitGeometry> pure_pursuit_steer(const PoseEstimate& est,
                                                                const GlobalPlan& plan,
                                                                const ControllerConfig& cfg,
                                                                const VehicleParams& params);

/// Scores candidate steering angles by the costmap along their arcs and picks
/// the cheapest; requests the brake when every arc runs into an obstacle.
SteeringCommand avoid_adjust(const SteeringCommand& cmd, const PoseEstimate& est,
                             const LocalCostmap& costmap, const ControllerConfig& cfg,
                             const VehicleParams& params);

/// Points along the arc driven with constant steering `steer`.
std::vector<Vec2> steering_arc(const Pose2& pose, double steer, double length, double step,
                               const VehicleParams& params);

enum class GoalStatus : std::uint8_t { Far, Near, Arrived };

std::string_view to_string(GoalStatus s);

GoalStatus goal_check(const PoseEstimate& est, Vec2 goal, const ControllerConfig& cfg);

// ---------------------------------------------------------------------------
// Blockage monitoring

struct BlockageConfig {
  double horizon = 3.0;   // m of plan ahead of the device that is checked
  double hold_time = 0.5;  // T_block, s
};

/// True when the plan within the horizon crosses a cell at inscribed cost or
/// higher.
bool plan_blocked(const GlobalPlan& plan, const LocalCostmap& costmap, const PoseEstimate& est,
                  const BlockageConfig& cfg);

/// Time filter over plan_blocked; replan_needed reports true once the plan has
/// been blocked for longer than hold_time.
class BlockageMonitor {
 public:
  explicit BlockageMonitor(BlockageConfig cfg = {}) : cfg_(cfg) {}
  bool replan_needed(const GlobalPlan& plan, const LocalCostmap& costmap, const PoseEstimate& est,
                     double now);
  void reset() { blocked_since_.reset(); }

 private:
  BlockageConfig cfg_;
  std::optional<double> blocked_since_;
};

/// Copy of `grid` with every lethal costmap cell painted Occupied.
OccupancyGrid stamp_obstacles(const OccupancyGrid& grid, const LocalCostmap& costmap);

}  // namespace glide
