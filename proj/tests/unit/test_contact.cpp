#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "finray/contact.hpp"
#include "finray/error.hpp"
#include "finray/local_recon.hpp"
#include "finray/markers.hpp"
#include "finray/simulator.hpp"

using namespace finray;

namespace {

MarkerLayout grid_layout() {
  MarkerLayout l;
  for (int g = 0; g < 2; ++g) {
    for (int k = 0; k < 6; ++k) l.nominal.push_back({100.0 + 60.0 * k, g == 0 ? 150.0 : 390.0});
  }
  return l;
}

MarkerSet at_layout(const MarkerLayout& l) {
  MarkerSet ms;
  for (int i = 0; i < l.total(); ++i) {
    Marker m;
    m.k = i % l.upper_count;
    m.group = i < l.upper_count ? Group::upper : Group::lower;
    m.centroid = l.nominal[i];
    m.visible = true;
    ms.markers.push_back(m);
  }
  return ms;
}

std::vector<Point3> line_points(double angle_deg, int n, double jitter, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> t(-10, 10), w(-jitter, jitter);
  const double a = angle_deg * M_PI / 180.0;
  std::vector<Point3> pts;
  for (int i = 0; i < n; ++i) {
    const double s = t(rng), q = w(rng);
    pts.push_back({2.0 + s * std::cos(a) - q * std::sin(a), -1.0 + s * std::sin(a) + q * std::cos(a), 50.0});
  }
  return pts;
}

double wrap180(double a) {
  a = std::fmod(a, 180.0);
  if (a <= -90.0) a += 180.0;
  if (a > 90.0) a -= 180.0;
  return a;
}

}  // namespace

TEST(GlobalOffset, NoMotion) {
  const auto l = grid_layout();
  const Offset2 o = global_offset(at_layout(l), l);
  EXPECT_EQ(o.u, 0.0);
  EXPECT_EQ(o.v, 0.0);
}

TEST(GlobalOffset, UniformShiftSums) {
  const auto l = grid_layout();
  MarkerSet ms = at_layout(l);
  for (auto& m : ms.markers) m.centroid.u += 2.0;
  const Offset2 o = global_offset(ms, l);
  EXPECT_DOUBLE_EQ(o.u, 24.0);
  EXPECT_DOUBLE_EQ(o.v, 0.0);
}

TEST(GlobalOffset, OppositeMotionCancels) {
  const auto l = grid_layout();
  MarkerSet ms = at_layout(l);
  ms.markers[1].centroid.u += 3.0;
  ms.markers[8].centroid.u -= 3.0;
  EXPECT_DOUBLE_EQ(global_offset(ms, l).norm(), 0.0);
}

TEST(GlobalOffset, LayoutMismatch) {
  const auto l = grid_layout();
  MarkerSet ms = at_layout(l);
  ms.markers.pop_back();
  EXPECT_THROW(global_offset(ms, l), Error);
}

TEST(DetectContact, StrictThreshold) {
  EXPECT_FALSE(detect_contact({0, 0}, 1.0));
  EXPECT_FALSE(detect_contact({3, 4}, 5.0));
  EXPECT_TRUE(detect_contact({3, 4.001}, 5.0));
}

TEST(DetectContact, SimulatedSidePush) {
  const SceneConfig scene;
  const auto layout = rest_layout(scene);
  const double eps = 0.6;
  const FingerState st = push_state(scene, M_PI / 2, 30.0, 4.0);
  const Offset2 o = global_offset(project_markers(st, scene), layout);
  EXPECT_GT(o.norm(), 2 * eps);
  EXPECT_TRUE(detect_contact(o, eps));
}

TEST(Classify, Normalisation) {
  const DirectionClass c = classify_direction({3, 4}, FingerConfig{});
  EXPECT_DOUBLE_EQ(c.o.dx, 0.6);
  EXPECT_DOUBLE_EQ(c.o.dy, 0.8);
  EXPECT_EQ(c.o.dz, 0.0);
  EXPECT_NEAR(c.o.norm(), 1.0, 1e-12);
}

TEST(Classify, AlignedFaces) {
  const FingerConfig cfg;
  for (int f = 0; f < 4; ++f) {
    const auto& n = cfg.face_normals[f];
    EXPECT_EQ(classify_direction({5 * n.dx, 5 * n.dy}, cfg).face, static_cast<Face>(f));
  }
}

TEST(Classify, ZeroOffset) {
  try {
    classify_direction({0, 0}, FingerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ZeroOffset);
  }
}

TEST(Classify, PositiveScalingInvariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-30, 30), s(1e-3, 1e3);
  const FingerConfig cfg;
  for (int i = 0; i < 500; ++i) {
    const Offset2 o{u(rng), u(rng)};
    const double k = s(rng);
    const auto a = classify_direction(o, cfg), b = classify_direction({k * o.u, k * o.v}, cfg);
    EXPECT_EQ(a.face, b.face);
    EXPECT_NEAR(a.o.dx, b.o.dx, 1e-12);
    EXPECT_NEAR(a.o.dy, b.o.dy, 1e-12);
    EXPECT_EQ(classify_region(a.o), classify_region(b.o));
  }
}

TEST(Region, SectorsCentredOnAxes) {
  for (int k = 0; k < 8; ++k) {
    for (double d : {-22.0, 0.0, 22.0}) {
      const double a = (45.0 * k + d) * M_PI / 180.0;
      EXPECT_EQ(classify_region({std::cos(a), std::sin(a), 0}), k) << k << " " << d;
    }
  }
}

TEST(Epsilon, PercentileRule) {
  std::vector<double> v;
  for (int i = 1; i <= 1000; ++i) v.push_back(i * 0.001);
  // 99th percentile of 0.001..1.0 is about 0.99.
  EXPECT_NEAR(contact_epsilon(v), 1.5 * 0.99, 0.01);
}

TEST(ContactPoint, DepthWeightedCentroid) {
  SurfaceCloud cf(GridRect{0, 0, 4, 1});
  cf.points = {{0, 0, 50}, {1, 0, 50}, {2, 0, 50}, {3, 0, 50}};
  cf.valid = {1, 1, 1, 1};
  DepthMap d(cf.grid);
  d.mask = {1, 1, 1, 0};
  d.depth = {1.0, 1.0, 2.0, 0.0};
  const auto c = contact_point(cf, d);
  ASSERT_TRUE(c);
  EXPECT_DOUBLE_EQ(c->x, (0 + 1 + 4) / 4.0);
}

TEST(ContactPoint, DominantRegionWins) {
  SurfaceCloud cf(GridRect{0, 0, 7, 1});
  for (int i = 0; i < 7; ++i) cf.points[i] = {double(i), 0, 50};
  cf.valid.assign(7, 1);
  DepthMap d(cf.grid);
  d.mask = {1, 1, 0, 0, 0, 1, 0};
  d.depth = {1.0, 1.0, 0, 0, 0, 0.5, 0};
  const auto c = contact_point(cf, d);
  ASSERT_TRUE(c);
  EXPECT_DOUBLE_EQ(c->x, 0.5);
}

TEST(ContactPoint, EmptyMask) {
  SurfaceCloud cf(GridRect{0, 0, 3, 3});
  EXPECT_FALSE(contact_point(cf, DepthMap(cf.grid)));
}

TEST(Pose, CollinearLine) {
  EXPECT_NEAR(estimate_pose(line_points(30.0, 50, 0.0, 1)), 30.0, 1e-6);
  EXPECT_NEAR(estimate_pose(line_points(-60.0, 50, 0.0, 2)), -60.0, 1e-6);
  EXPECT_NEAR(std::abs(estimate_pose(line_points(90.0, 50, 0.0, 3))), 90.0, 1e-6);
}

TEST(Pose, RotationEquivariance) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ang(-180, 180);
  for (int i = 0; i < 100; ++i) {
    const auto pts = line_points(ang(rng), 80, 1.0, i);
    const double delta = ang(rng);
    const double c = std::cos(delta * M_PI / 180), s = std::sin(delta * M_PI / 180);
    std::vector<Point3> rot;
    for (const auto& p : pts) rot.push_back({c * p.x - s * p.y, s * p.x + c * p.y, p.z});
    EXPECT_NEAR(wrap180(estimate_pose(rot) - estimate_pose(pts) - delta), 0.0, 1e-6);
  }
}

TEST(Pose, OrderAndTranslationInvariance) {
  auto pts = line_points(17.0, 60, 1.5, 5);
  const double base = estimate_pose(pts);
  std::reverse(pts.begin(), pts.end());
  EXPECT_NEAR(estimate_pose(pts), base, 1e-9);
  for (auto& p : pts) p = p + Point3{40, -25, 3};
  EXPECT_NEAR(estimate_pose(pts), base, 1e-9);
}

TEST(Pose, Degenerate) {
  try {
    estimate_pose(line_points(10.0, 5, 0.0, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewPoints);
  }
  std::vector<Point3> ring;
  for (int i = 0; i < 36; ++i) ring.push_back({std::cos(i * M_PI / 18), std::sin(i * M_PI / 18), 50});
  try {
    estimate_pose(ring);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IsotropicCloud);
  }
}

TEST(ForceFeatures, Layout) {
  const auto l = grid_layout();
  MarkerSet ms = at_layout(l);
  ms.markers[0].centroid.u += 1.5;
  ms.markers[11].centroid.v -= 2.0;
  const auto x = force_features(ms, l, {1, 2, 3});
  EXPECT_EQ(x[0], 1.5);
  EXPECT_EQ(x[23], -2.0);
  EXPECT_EQ(x[24], 1.0);
  EXPECT_EQ(x[26], 3.0);
}

TEST(ContactEventJson, Fields) {
  ContactEvent e;
  e.frame_id = 3;
  e.detected = true;
  e.o = {1, 0, 0};
  e.region = 0;
  e.contact_point = Point3{1, 2, 3};
  const nlohmann::json j = e;
  EXPECT_EQ(j["frame_id"], 3);
  EXPECT_EQ(j["face"], "contact");
  EXPECT_EQ(j["contact_point"].size(), 3u);
}
