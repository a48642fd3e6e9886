#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "glide/core.hpp"
#include "glide/floorplan.hpp"
#include "glide/vehicle.hpp"

namespace glide {

// ---------------------------------------------------------------------------
// Obstacles not drawn in the floor plan (pillars, boxes, pedestrians)

struct DiscObstacle {
  Vec2 center;
  double radius = 0.2;
};

struct BoxObstacle {
  Vec2 lo;
  Vec2 hi;
};

using Obstacle = std::variant<DiscObstacle, BoxObstacle>;

/// Ray distance to the obstacle surface, or nullopt when missed.
std::optional<double> ray_intersect(const Obstacle& obstacle, Vec2 origin, double angle);
/// Distance from `p` to the obstacle surface (0 inside).
double surface_distance(const Obstacle& obstacle, Vec2 p);

// ---------------------------------------------------------------------------
// Depth sensing

struct DepthSensorParams {
  double fov = 87.0 * kPi / 180.0;
  double max_range = 4.0;
  int ray_count = 64;
  double noise_std = 0.02;
};

struct ScanRay {
  double bearing = 0.0;             // relative to device heading
  std::optional<double> range;      // nullopt: nothing within max_range
};

struct DepthScan {
  std::vector<ScanRay> rays;
  double fov = 0.0;
  double max_range = 0.0;
  double noise_std = 0.0;

  std::optional<double> nearest() const;
};

/// Raycasts the floor plan and the extra obstacles from `true_pose`, adds
/// Gaussian range noise and clamps to [0, max_range].
DepthScan simulate_scan(const OccupancyGrid& grid, const Pose2& true_pose,
                        const DepthSensorParams& params, std::span<const Obstacle> obstacles,
                        Rng& rng);

// ---------------------------------------------------------------------------
// Pose estimate

struct PoseEstimate {
  Pose2 mean;
  std::array<double, 9> covariance{};  // row-major x, y, theta
  bool converged = false;

  static PoseEstimate exact(const Pose2& pose) { return {pose, {}, true}; }
};

// ---------------------------------------------------------------------------
// Local costmap

inline constexpr std::uint8_t kLethalCost = 255;
inline constexpr std::uint8_t kInscribedCost = 254;

struct CostmapConfig {
  double side = 6.0;
  double resolution = 0.1;
  double inflation_radius = 0.6;
  double inscribed_radius = 0.2;
  double cost_scaling = 3.0;  // 1/m, exponential decay rate
  double decay_time = 2.0;    // s, stale marks expire after this long

  void validate() const;
};

/// Device-centred window over the world, axis-aligned with the world frame
/// and snapped to the resolution lattice.
class LocalCostmap {
 public:
  LocalCostmap() = default;
  LocalCostmap(Vec2 origin, int size, double resolution);

  int size() const { return size_; }
  double resolution() const { return resolution_; }
  Vec2 origin() const { return origin_; }
  std::span<const std::uint8_t> costs() const { return cost_; }

  std::uint8_t at(int x, int y) const { return cost_[static_cast<std::size_t>(y) * size_ + x]; }
  void set(int x, int y, std::uint8_t c) { cost_[static_cast<std::size_t>(y) * size_ + x] = c; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < size_ && y < size_; }
  std::optional<CellIndex> cell_of(Vec2 p) const;
  Vec2 center_of(int x, int y) const {
    return {origin_.x + (x + 0.5) * resolution_, origin_.y + (y + 0.5) * resolution_};
  }
  /// Cost at a world point; 0 outside the window.
  std::uint8_t at_world(Vec2 p) const;
  /// World centres of all lethal cells.
  std::vector<Vec2> lethal_cells() const;
  /// Max-pooled copy with `factor`-times fewer cells per side.
  LocalCostmap downsample(int factor) const;

 private:
  Vec2 origin_{};
  int size_ = 0;
  double resolution_ = 0.1;
  std::vector<std::uint8_t> cost_;
};

/// Inflated cost at distance `d` from the nearest lethal cell.
std::uint8_t inflation_cost(double d, const CostmapConfig& cfg);

/// Keeps obstacle marks between scans and expires them after decay_time.
class CostmapBuilder {
 public:
  explicit CostmapBuilder(CostmapConfig cfg = {});

  const LocalCostmap& update(const DepthScan& scan, const PoseEstimate& est, double now);
  const LocalCostmap& costmap() const { return map_; }
  const CostmapConfig& config() const { return cfg_; }
  void clear() { marks_.clear(); }

 private:
  struct Mark {
    Vec2 point;
    double stamp;
  };
  void rasterize(Vec2 center);

  CostmapConfig cfg_;
  std::deque<Mark> marks_;
  LocalCostmap map_;
  std::vector<std::pair<CellIndex, std::uint8_t>> kernel_;
};

/// Single-scan costmap around the estimated pose.
LocalCostmap build_costmap(const DepthScan& scan, const PoseEstimate& est, const CostmapConfig& cfg);

// ---------------------------------------------------------------------------
// Monte Carlo localization

struct Particle {
  Pose2 pose;
  double weight = 0.0;
};

struct ParticleSet {
  std::vector<Particle> particles;
  bool likelihood_failed = false;  // last update found no support anywhere

  std::size_t size() const { return particles.size(); }
  double weight_sum() const;
};

struct MotionNoise {
  double distance_std_per_m = 0.05;
  double heading_std_per_m = 0.02;
  double heading_std_per_rad = 0.05;
};

struct LikelihoodConfig {
  double sigma_hit = 0.15;
  double z_hit = 0.9;
  double z_rand = 0.1;
  int beam_stride = 2;      // use every n-th ray
  double exponent = 0.25;   // tempering applied to the joint log likelihood
};

struct EstimateConfig {
  double converged_position_trace = 0.05;     // m^2
  double converged_heading_concentration = 0.9;  // mean resultant length
};

/// Distance-to-wall-surface lookup over a floor plan. Points inside a wall
/// measure to the nearest open cell, so an endpoint buried deep in solid
/// scores no better than one short of the wall. Holds a pointer to `grid`,
/// which must outlive it.
class LikelihoodField {
 public:
  explicit LikelihoodField(const OccupancyGrid& grid);
  double distance(Vec2 p) const;
  const OccupancyGrid& grid() const { return *grid_; }

 private:
  const OccupancyGrid* grid_;
  DistanceField field_;
  DistanceField inside_;
};

ParticleSet init_particles(const Pose2& center, double std_xy, double std_theta, std::size_t n,
                           Rng& rng);

ParticleSet mcl_predict(ParticleSet ps, const OdomDelta& delta, const MotionNoise& noise, Rng& rng);

ParticleSet mcl_update(ParticleSet ps, const DepthScan& scan, const LikelihoodField& field,
                       const LikelihoodConfig& cfg);
ParticleSet mcl_update(ParticleSet ps, const DepthScan& scan, const OccupancyGrid& grid,
                       const LikelihoodConfig& cfg);

double effective_sample_size(const ParticleSet& ps);

/// Low-variance resampling with the first pointer at `offset` in [0, 1/N).
/// Draws `count` particles (0 keeps the input size).
ParticleSet systematic_resample(const ParticleSet& ps, double offset, std::size_t count = 0);

/// Resamples only when the effective sample size drops below N/2.
ParticleSet mcl_resample(const ParticleSet& ps, Rng& rng);

PoseEstimate estimate(const ParticleSet& ps, const EstimateConfig& cfg = {});

struct LocalizerConfig {
  std::size_t particle_count = 500;
  double init_std_xy = 0.05;
  double init_std_theta = 0.02;
  MotionNoise motion;
  LikelihoodConfig likelihood;
  EstimateConfig estimate;
};

/// Owns a particle set and steps it through predict/update/resample.
class Localizer {
 public:
  Localizer(const OccupancyGrid& grid, LocalizerConfig cfg);

  void reset(const Pose2& pose, Rng& rng);
  void predict(const OdomDelta& delta, Rng& rng);
  void update(const DepthScan& scan, Rng& rng);
  PoseEstimate estimate() const;
  const ParticleSet& particles() const { return set_; }

 private:
  LocalizerConfig cfg_;
  LikelihoodField field_;
  ParticleSet set_;
};

}  // namespace glide
