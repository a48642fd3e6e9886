#include "glide/core.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace glide {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  // Box-Muller; u1 is kept away from zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  has_spare_ = true;
  return mean + stddev * r * std::cos(2.0 * kPi * u2);
}

PolylineProjection project_onto_polyline(std::span<const Vec2> pts, Vec2 p) {
  PolylineProjection best;
  if (pts.empty()) return best;
  if (pts.size() == 1) {
    best.point = pts[0];
    best.distance = distance(p, pts[0]);
    return best;
  }
  best.distance = std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 a = pts[i], b = pts[i + 1];
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    const double len = std::sqrt(len2);
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double d = distance(p, q);
    if (d < best.distance) {
      best = {s0 + t * len, d, i, q};
    }
    s0 += len;
  }
  return best;
}

double polyline_length(std::span<const Vec2> pts) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += distance(pts[i], pts[i + 1]);
  return total;
}

Vec2 point_at_arc(std::span<const Vec2> pts, double s) {
  if (pts.empty()) return {};
  if (s <= 0.0) return pts.front();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double len = distance(pts[i], pts[i + 1]);
    if (s <= len && len > 0.0) return pts[i] + (pts[i + 1] - pts[i]) * (s / len);
    s -= len;
  }
  return pts.back();
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  // splitmix64 finalizer over master ^ label hash
  std::uint64_t z = master ^ fnv1a(label);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace glide
