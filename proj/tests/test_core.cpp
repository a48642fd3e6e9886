#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "glide/core.hpp"

using namespace glide;

TEST(Core, WrapAngleStaysInHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3.0 * kPi / 2.0), -kPi / 2.0, 1e-12);
  for (double a = -20.0; a < 20.0; a += 0.37) {
    const double w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::cos(w), std::cos(a), 1e-9);
    EXPECT_NEAR(std::sin(w), std::sin(a), 1e-9);
  }
}

TEST(Core, LocalWorldRoundTrip) {
  const Pose2 pose{1.5, -2.0, 0.7};
  const Vec2 p{3.0, 4.0};
  const Vec2 back = to_world(pose, to_local(pose, p));
  EXPECT_NEAR(back.x, p.x, 1e-12);
  EXPECT_NEAR(back.y, p.y, 1e-12);
  // A point straight ahead of the pose lies on the local +x axis.
  const Vec2 ahead = to_local(pose, pose.position() + unit(pose.theta) * 2.0);
  EXPECT_NEAR(ahead.x, 2.0, 1e-12);
  EXPECT_NEAR(ahead.y, 0.0, 1e-12);
}

TEST(Core, PolylineProjectionAndArc) {
  const std::vector<Vec2> pts{{0, 0}, {2, 0}, {2, 3}};
  EXPECT_DOUBLE_EQ(polyline_length(pts), 5.0);
  const auto pr = project_onto_polyline(pts, {2.5, 1.0});
  EXPECT_NEAR(pr.s, 3.0, 1e-12);
  EXPECT_NEAR(pr.distance, 0.5, 1e-12);
  EXPECT_EQ(pr.segment, 1u);
  const Vec2 q = point_at_arc(pts, 4.0);
  EXPECT_NEAR(q.x, 2.0, 1e-12);
  EXPECT_NEAR(q.y, 2.0, 1e-12);
  const Vec2 end = point_at_arc(pts, 99.0);
  EXPECT_EQ(end, (Vec2{2, 3}));
}

TEST(Core, Fnv1aReferenceVectors) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Core, RngIsDeterministicAndStreamsAreDistinct) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  std::set<std::uint64_t> seeds;
  for (const char* label : {"sensor", "user", "obstacles"}) seeds.insert(derive_seed(7, label));
  EXPECT_EQ(seeds.size(), 3u);
  EXPECT_NE(derive_seed(7, "sensor"), derive_seed(8, "sensor"));
}

TEST(Core, NormalSampleMoments) {
  Rng rng(3);
  const int n = 20000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal(1.0, 2.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  // 4 standard errors
  EXPECT_NEAR(mean, 1.0, 4.0 * 2.0 / std::sqrt(n));
  EXPECT_NEAR(var, 4.0, 4.0 * 4.0 * std::sqrt(2.0 / n));
}

TEST(Core, UniformIndexCoversRange) {
  Rng rng(5);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) ++hits[rng.index(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}
