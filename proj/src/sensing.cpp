#include "glide/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace glide {

namespace {

std::optional<double> ray_disc(const DiscObstacle& d, Vec2 o, Vec2 u) {
  const Vec2 oc = o - d.center;
  const double c = oc.dot(oc) - d.radius * d.radius;
  if (c <= 0.0) return 0.0;
  const double b = oc.dot(u);
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double t = -b - std::sqrt(disc);
  if (t < 0.0) return std::nullopt;
  return t;
}

std::optional<double> ray_box(const BoxObstacle& box, Vec2 o, Vec2 u) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  const double oo[2] = {o.x, o.y}, uu[2] = {u.x, u.y};
  const double lo[2] = {box.lo.x, box.lo.y}, hi[2] = {box.hi.x, box.hi.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(uu[k]) < 1e-15) {
      if (oo[k] < lo[k] || oo[k] > hi[k]) return std::nullopt;
      continue;
    }
    double t1 = (lo[k] - oo[k]) / uu[k];
    double t2 = (hi[k] - oo[k]) / uu[k];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  return tmin;
}

}  // namespace

std::optional<double> ray_intersect(const Obstacle& obstacle, Vec2 origin, double angle) {
  const Vec2 u = unit(angle);
  return std::visit(
      [&](const auto& ob) -> std::optional<double> {
        using T = std::decay_t<decltype(ob)>;
        if constexpr (std::is_same_v<T, DiscObstacle>) return ray_disc(ob, origin, u);
        else return ray_box(ob, origin, u);
      },
      obstacle);
}

double surface_distance(const Obstacle& obstacle, Vec2 p) {
  return std::visit(
      [&](const auto& ob) -> double {
        using T = std::decay_t<decltype(ob)>;
        if constexpr (std::is_same_v<T, DiscObstacle>) {
          return std::max(0.0, distance(p, ob.center) - ob.radius);
        } else {
          const double dx = std::max({ob.lo.x - p.x, 0.0, p.x - ob.hi.x});
          const double dy = std::max({ob.lo.y - p.y, 0.0, p.y - ob.hi.y});
          return std::hypot(dx, dy);
        }
      },
      obstacle);
}

std::optional<double> DepthScan::nearest() const {
  std::optional<double> best;
  for (const auto& r : rays)
    if (r.range && (!best || *r.range < *best)) best = r.range;
  return best;
}

DepthScan simulate_scan(const OccupancyGrid& grid, const Pose2& true_pose,
                        const DepthSensorParams& params, std::span<const Obstacle> obstacles,
                        Rng& rng) {
  DepthScan scan;
  scan.fov = params.fov;
  scan.max_range = params.max_range;
  scan.noise_std = params.noise_std;
  const int n = std::max(1, params.ray_count);
  scan.rays.reserve(static_cast<std::size_t>(n));
  const Vec2 o = true_pose.position();
  const bool origin_free = grid.is_free(o);
  for (int i = 0; i < n; ++i) {
    const double bearing =
        n == 1 ? 0.0 : -params.fov / 2.0 + params.fov * static_cast<double>(i) / (n - 1);
    const double angle = true_pose.theta + bearing;
    std::optional<double> hit;
    if (!origin_free) {
      hit = 0.0;  // sensor pressed against a wall
    } else {
      hit = raycast(grid, o, angle, params.max_range);
    }
    for (const auto& ob : obstacles) {
      auto t = ray_intersect(ob, o, angle);
      if (t && *t <= params.max_range && (!hit || *t < *hit)) hit = t;
    }
    ScanRay ray{bearing, std::nullopt};
    if (hit) {
      double r = *hit;
      if (params.noise_std > 0.0) r += rng.normal(0.0, params.noise_std);
      ray.range = std::clamp(r, 0.0, params.max_range);
    }
    scan.rays.push_back(ray);
  }
  return scan;
}

// ---------------------------------------------------------------------------

void CostmapConfig::validate() const {
  if (!(side > 0.0)) throw ConfigError("costmap.side must be positive");
  if (!(resolution > 0.0)) throw ConfigError("costmap.resolution must be positive");
  if (inflation_radius < 0.0) throw ConfigError("costmap.inflation_radius must be >= 0");
  if (inscribed_radius < 0.0) throw ConfigError("costmap.inscribed_radius must be >= 0");
  if (!(cost_scaling > 0.0)) throw ConfigError("costmap.cost_scaling must be positive");
  if (!(decay_time >= 0.0)) throw ConfigError("costmap.decay_time must be >= 0");
}

LocalCostmap::LocalCostmap(Vec2 origin, int size, double resolution)
    : origin_(origin),
      size_(size),
      resolution_(resolution),
      cost_(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0) {}

std::optional<CellIndex> LocalCostmap::cell_of(Vec2 p) const {
  const int x = static_cast<int>(std::floor((p.x - origin_.x) / resolution_));
  const int y = static_cast<int>(std::floor((p.y - origin_.y) / resolution_));
  if (!contains(x, y)) return std::nullopt;
  return CellIndex{x, y};
}

std::uint8_t LocalCostmap::at_world(Vec2 p) const {
  auto c = cell_of(p);
  return c ? at(c->x, c->y) : 0;
}

std::vector<Vec2> LocalCostmap::lethal_cells() const {
  std::vector<Vec2> out;
  for (int y = 0; y < size_; ++y)
    for (int x = 0; x < size_; ++x)
      if (at(x, y) == kLethalCost) out.push_back(center_of(x, y));
  return out;
}

LocalCostmap LocalCostmap::downsample(int factor) const {
  if (factor <= 1) return *this;
  const int n = (size_ + factor - 1) / factor;
  LocalCostmap out(origin_, n, resolution_ * factor);
  for (int y = 0; y < size_; ++y)
    for (int x = 0; x < size_; ++x) {
      const int X = x / factor, Y = y / factor;
      out.set(X, Y, std::max(out.at(X, Y), at(x, y)));
    }
  return out;
}

std::uint8_t inflation_cost(double d, const CostmapConfig& cfg) {
  if (d <= 0.0) return kLethalCost;
  if (d >= cfg.inflation_radius) return 0;
  if (d <= cfg.inscribed_radius) return kInscribedCost;
  // Exponential decay rescaled so the cost reaches exactly zero at the
  // inflation radius.
  const double k = cfg.cost_scaling;
  const double span = cfg.inflation_radius - cfg.inscribed_radius;
  const double tail = std::exp(-k * span);
  const double f = (std::exp(-k * (d - cfg.inscribed_radius)) - tail) / (1.0 - tail);
  const double c = std::round((kInscribedCost - 1) * f);
  return static_cast<std::uint8_t>(std::clamp(c, 0.0, kInscribedCost - 1.0));
}

CostmapBuilder::CostmapBuilder(CostmapConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int r = static_cast<int>(std::ceil(cfg_.inflation_radius / cfg_.resolution));
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double d = std::hypot(dx, dy) * cfg_.resolution;
      const std::uint8_t c = inflation_cost(d, cfg_);
      if (c > 0) kernel_.push_back({CellIndex{dx, dy}, c});
    }
}

void CostmapBuilder::rasterize(Vec2 center) {
  const double res = cfg_.resolution;
  const int size = std::max(1, static_cast<int>(std::lround(cfg_.side / res)));
  const Vec2 origin{std::floor((center.x - cfg_.side / 2.0) / res) * res,
                    std::floor((center.y - cfg_.side / 2.0) / res) * res};
  map_ = LocalCostmap(origin, size, res);
  std::vector<CellIndex> lethal;
  for (const auto& m : marks_) {
    auto c = map_.cell_of(m.point);
    if (!c || map_.at(c->x, c->y) == kLethalCost) continue;
    map_.set(c->x, c->y, kLethalCost);
    lethal.push_back(*c);
  }
  for (const auto& c : lethal)
    for (const auto& [off, cost] : kernel_) {
      const int x = c.x + off.x, y = c.y + off.y;
      if (map_.contains(x, y) && map_.at(x, y) < cost) map_.set(x, y, cost);
    }
}

const LocalCostmap& CostmapBuilder::update(const DepthScan& scan, const PoseEstimate& est,
                                           double now) {
  while (!marks_.empty() && marks_.front().stamp < now - cfg_.decay_time) marks_.pop_front();
  const Pose2& p = est.mean;
  for (const auto& ray : scan.rays) {
    if (!ray.range) continue;
    const double a = p.theta + ray.bearing;
    marks_.push_back({p.position() + unit(a) * *ray.range, now});
  }
  rasterize(p.position());
  return map_;
}

LocalCostmap build_costmap(const DepthScan& scan, const PoseEstimate& est, const CostmapConfig& cfg) {
  CostmapBuilder b(cfg);
  return b.update(scan, est, 0.0);
}

// ---------------------------------------------------------------------------

double ParticleSet::weight_sum() const {
  double s = 0.0;
  for (const auto& p : particles) s += p.weight;
  return s;
}

LikelihoodField::LikelihoodField(const OccupancyGrid& grid)
    : grid_(&grid), field_(grid), inside_(DistanceField::to_open(grid)) {}

double LikelihoodField::distance(Vec2 p) const {
  const auto c = grid_->cell_of(p);
  if (c && grid_->at(*c) == Cell::Occupied) return inside_.at(c->x, c->y);
  return field_.at_world(p);
}

ParticleSet init_particles(const Pose2& center, double std_xy, double std_theta, std::size_t n,
                           Rng& rng) {
  ParticleSet ps;
  ps.particles.reserve(n);
  const double w = n ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Pose2 p = center;
    if (std_xy > 0.0) {
      p.x += rng.normal(0.0, std_xy);
      p.y += rng.normal(0.0, std_xy);
    }
    if (std_theta > 0.0) p.theta = wrap_angle(p.theta + rng.normal(0.0, std_theta));
    ps.particles.push_back({p, w});
  }
  return ps;
}

ParticleSet mcl_predict(ParticleSet ps, const OdomDelta& delta, const MotionNoise& noise, Rng& rng) {
  const double sd = noise.distance_std_per_m * std::abs(delta.distance);
  const double sh = noise.heading_std_per_m * std::abs(delta.distance) +
                    noise.heading_std_per_rad * std::abs(delta.heading);
  for (auto& p : ps.particles) {
    OdomDelta d = delta;
    if (sd > 0.0) d.distance += rng.normal(0.0, sd);
    if (sh > 0.0) d.heading += rng.normal(0.0, sh);
    p.pose = apply_odometry(p.pose, d);
  }
  return ps;
}

ParticleSet mcl_update(ParticleSet ps, const DepthScan& scan, const LikelihoodField& field,
                       const LikelihoodConfig& cfg) {
  if (ps.particles.empty()) return ps;
  const double max_range = scan.max_range > 0.0 ? scan.max_range : 1.0;
  const double p_rand = cfg.z_rand / max_range;
  const double inv2s2 = 1.0 / (2.0 * cfg.sigma_hit * cfg.sigma_hit);
  const int stride = std::max(1, cfg.beam_stride);

  std::vector<double> logw(ps.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const Particle& part = ps.particles[i];
    double ll = 0.0;
    const bool inside = field.grid().is_free(part.pose.position());
    for (std::size_t r = 0; r < scan.rays.size(); r += static_cast<std::size_t>(stride)) {
      const auto& ray = scan.rays[r];
      if (!ray.range) continue;
      double p = p_rand;
      if (inside) {
        const Vec2 end = part.pose.position() + unit(part.pose.theta + ray.bearing) * *ray.range;
        const double d = field.distance(end);
        p += cfg.z_hit * std::exp(-d * d * inv2s2);
      }
      ll += std::log(p);
    }
    logw[i] = (part.weight > 0.0 ? std::log(part.weight) : -std::numeric_limits<double>::infinity()) +
              cfg.exponent * ll;
    best = std::max(best, logw[i]);
  }

  double sum = 0.0;
  if (std::isfinite(best)) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      ps.particles[i].weight = std::exp(logw[i] - best);
      sum += ps.particles[i].weight;
    }
  }
  if (!(sum > 0.0) || !std::isfinite(sum)) {
    const double w = 1.0 / static_cast<double>(ps.size());
    for (auto& p : ps.particles) p.weight = w;
    ps.likelihood_failed = true;
    return ps;
  }
  for (auto& p : ps.particles) p.weight /= sum;
  ps.likelihood_failed = false;
  return ps;
}

ParticleSet mcl_update(ParticleSet ps, const DepthScan& scan, const OccupancyGrid& grid,
                       const LikelihoodConfig& cfg) {
  LikelihoodField field(grid);
  return mcl_update(std::move(ps), scan, field, cfg);
}

double effective_sample_size(const ParticleSet& ps) {
  const double s = ps.weight_sum();
  if (!(s > 0.0)) return 0.0;
  double sq = 0.0;
  for (const auto& p : ps.particles) {
    const double w = p.weight / s;
    sq += w * w;
  }
  return 1.0 / sq;
}

ParticleSet systematic_resample(const ParticleSet& ps, double offset, std::size_t count) {
  const std::size_t n = count ? count : ps.size();
  ParticleSet out;
  out.likelihood_failed = ps.likelihood_failed;
  if (ps.particles.empty() || n == 0) return out;
  const double total = ps.weight_sum();
  out.particles.reserve(n);
  const double step = 1.0 / static_cast<double>(n);
  std::size_t j = 0;
  double cum = ps.particles[0].weight / total;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = offset + static_cast<double>(i) * step;
    while (u > cum && j + 1 < ps.size()) {
      ++j;
      cum += ps.particles[j].weight / total;
    }
    out.particles.push_back({ps.particles[j].pose, step});
  }
  return out;
}

ParticleSet mcl_resample(const ParticleSet& ps, Rng& rng) {
  if (ps.particles.empty()) return ps;
  if (effective_sample_size(ps) >= static_cast<double>(ps.size()) / 2.0) return ps;
  const double offset = rng.uniform() / static_cast<double>(ps.size());
  return systematic_resample(ps, offset);
}

PoseEstimate estimate(const ParticleSet& ps, const EstimateConfig& cfg) {
  PoseEstimate e;
  const double total = ps.weight_sum();
  if (ps.particles.empty() || !(total > 0.0)) return e;
  double mx = 0.0, my = 0.0, sc = 0.0, ss = 0.0;
  for (const auto& p : ps.particles) {
    const double w = p.weight / total;
    mx += w * p.pose.x;
    my += w * p.pose.y;
    sc += w * std::cos(p.pose.theta);
    ss += w * std::sin(p.pose.theta);
  }
  e.mean = {mx, my, std::atan2(ss, sc)};
  double cxx = 0, cxy = 0, cyy = 0, cxt = 0, cyt = 0, ctt = 0;
  for (const auto& p : ps.particles) {
    const double w = p.weight / total;
    const double dx = p.pose.x - mx, dy = p.pose.y - my;
    const double dt = wrap_angle(p.pose.theta - e.mean.theta);
    cxx += w * dx * dx;
    cxy += w * dx * dy;
    cyy += w * dy * dy;
    cxt += w * dx * dt;
    cyt += w * dy * dt;
    ctt += w * dt * dt;
  }
  e.covariance = {cxx, cxy, cxt, cxy, cyy, cyt, cxt, cyt, ctt};
  const double resultant = std::hypot(sc, ss);
  e.converged = (cxx + cyy) < cfg.converged_position_trace &&
                resultant >= cfg.converged_heading_concentration;
  return e;
}

Localizer::Localizer(const OccupancyGrid& grid, LocalizerConfig cfg)
    : cfg_(cfg), field_(grid) {}

void Localizer::reset(const Pose2& pose, Rng& rng) {
  set_ = init_particles(pose, cfg_.init_std_xy, cfg_.init_std_theta, cfg_.particle_count, rng);
}

void Localizer::predict(const OdomDelta& delta, Rng& rng) {
  set_ = mcl_predict(std::move(set_), delta, cfg_.motion, rng);
}

void Localizer::update(const DepthScan& scan, Rng& rng) {
  set_ = mcl_update(std::move(set_), scan, field_, cfg_.likelihood);
  set_ = mcl_resample(set_, rng);
}

PoseEstimate Localizer::estimate() const { return glide::estimate(set_, cfg_.estimate); }

}  // namespace glide
