#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace glide {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
  constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
  constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
};

inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }
inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  constexpr Vec2 position() const { return {x, y}; }
  constexpr bool operator==(const Pose2&) const = default;
};

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

/// World point expressed in the frame of `pose`.
inline Vec2 to_local(const Pose2& pose, Vec2 p) {
  const Vec2 d = p - pose.position();
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

inline Vec2 to_world(const Pose2& pose, Vec2 local) {
  const double c = std::cos(pose.theta), s = std::sin(pose.theta);
  return {pose.x + c * local.x - s * local.y, pose.y + s * local.x + c * local.y};
}

struct PolylineProjection {
  double s = 0.0;          // arc length from the first vertex
  double distance = 0.0;   // distance from the query point
  std::size_t segment = 0;
  Vec2 point{};
};

/// Closest point on a polyline (ties go to the earliest segment).
PolylineProjection project_onto_polyline(std::span<const Vec2> pts, Vec2 p);
double polyline_length(std::span<const Vec2> pts);
/// Point at arc length `s`, clamped to the polyline ends.
Vec2 point_at_arc(std::span<const Vec2> pts, double s);

// Error hierarchy. Every failure named by an operation contract has its own
// type so callers can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define GLIDE_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

GLIDE_DEFINE_ERROR(MalformedMap)
GLIDE_DEFINE_ERROR(InvariantViolation)
GLIDE_DEFINE_ERROR(NotAJunction)
GLIDE_DEFINE_ERROR(InvalidApproach)
GLIDE_DEFINE_ERROR(OriginOccupied)
GLIDE_DEFINE_ERROR(NoPath)
GLIDE_DEFINE_ERROR(PlanExhausted)
GLIDE_DEFINE_ERROR(ScriptExhausted)
GLIDE_DEFINE_ERROR(DanglingEdge)
GLIDE_DEFINE_ERROR(CorruptLog)
GLIDE_DEFINE_ERROR(ConfigError)
GLIDE_DEFINE_ERROR(ProtocolError)

#undef GLIDE_DEFINE_ERROR

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view data,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v);

/// Seeded random stream. The distribution transforms are written out here
/// rather than taken from <random> so sequences are identical across
/// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n).
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n));
  }

  double normal(double mean = 0.0, double stddev = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a master seed and a fixed label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

}  // namespace glide
