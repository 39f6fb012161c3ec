#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "finray/error.hpp"
#include "finray/geometry.hpp"

using namespace finray;

namespace {

CameraIntrinsics k1000() { return {1000.0, 1000.0, 960.0, 540.0, 1920, 1080}; }

}  // namespace

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Pixel q = project({0, 0, 100}, k1000());
  EXPECT_DOUBLE_EQ(q.u, 960.0);
  EXPECT_DOUBLE_EQ(q.v, 540.0);
}

TEST(Project, LateralPoint) {
  const Pixel q = project({10, 0, 100}, k1000());
  EXPECT_DOUBLE_EQ(q.u, 1060.0);
  EXPECT_DOUBLE_EQ(q.v, 540.0);
}

TEST(Project, RejectsNonPositiveDepth) {
  try {
    project({1, 1, 0}, k1000());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonPositiveDepth);
  }
  EXPECT_THROW(project({1, 1, -3}, k1000()), Error);
}

TEST(Project, RoundTripThroughBackprojection) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uu(0, 1920), vv(0, 1080), zz(1, 500);
  const auto k = k1000();
  for (int i = 0; i < 100; ++i) {
    const Pixel q{uu(rng), vv(rng)};
    const double z = zz(rng);
    const Pixel back = project(z * backproject_ray(q, k), k);
    EXPECT_NEAR(back.u, q.u, 1e-9);
    EXPECT_NEAR(back.v, q.v, 1e-9);
  }
}

TEST(Project, PointRoundTripAndScaleCovariance) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> xy(-80, 80), zz(0.5, 300), ss(0.01, 100);
  const auto k = k1000();
  for (int i = 0; i < 1000; ++i) {
    const Point3 p{xy(rng), xy(rng), zz(rng)};
    const Point3 r = p.z * backproject_ray(project(p, k), k);
    EXPECT_LT(distance(p, r), 1e-9);
    const double s = ss(rng);
    const Pixel a = project(p, k), b = project(s * p, k);
    EXPECT_NEAR(a.u, b.u, 1e-9);
    EXPECT_NEAR(a.v, b.v, 1e-9);
  }
}

TEST(Backproject, PrincipalPoint) {
  const auto d = backproject_ray({960, 540}, k1000());
  EXPECT_EQ(d.dx, 0.0);
  EXPECT_EQ(d.dy, 0.0);
  EXPECT_EQ(d.dz, 1.0);
}

TEST(Backproject, OffsetPixel) {
  const auto d = backproject_ray({1060, 540}, k1000());
  EXPECT_DOUBLE_EQ(d.dx, 0.1);
  EXPECT_DOUBLE_EQ(d.dy, 0.0);
  EXPECT_EQ(d.dz, 1.0);
}

TEST(RaySphere, AxialHitReturnsNearSurface) {
  const auto hit = ray_sphere_intersect({0, 0, 1}, {0, 0, 50}, 10);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->x, 0.0, 1e-12);
  EXPECT_NEAR(hit->y, 0.0, 1e-12);
  EXPECT_NEAR(hit->z, 40.0, 1e-12);
}

TEST(RaySphere, LateralMiss) { EXPECT_FALSE(ray_sphere_intersect({0, 0, 1}, {0, 20, 50}, 10)); }

TEST(RaySphere, TangentRayTouchesSurface) {
  const Point3 c{3, -4, 60};
  const double r = 7.0;
  // Rotate the centre direction by asin(r/|c|) about an axis orthogonal to it.
  const double a = std::asin(r / norm(c));
  const Point3 cn = (1.0 / norm(c)) * c;
  Point3 e{-cn.z, 0, cn.x};
  e = (1.0 / norm(e)) * e;
  const Point3 d = std::cos(a) * cn + std::sin(a) * e;
  const auto hit = ray_sphere_intersect({d.x, d.y, d.z}, c, r);
  ASSERT_TRUE(hit);
  EXPECT_NEAR(distance(*hit, c), r, 1e-9);
}

TEST(RaySphere, HitsLieOnSphereAndRay) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  int hits = 0;
  for (int i = 0; i < 2000; ++i) {
    const Point3 c{10 * u(rng), 10 * u(rng), 50 + 20 * u(rng)};
    const double r = 3 + 2 * u(rng);
    const Direction3 dir{c.x / c.z + 0.15 * u(rng), c.y / c.z + 0.15 * u(rng), 1.0};
    const auto hit = ray_sphere_intersect(dir, c, r);
    if (!hit) continue;
    ++hits;
    EXPECT_NEAR(distance(*hit, c), r, 1e-9);
    // Collinear with the ray and in front of the camera.
    const Point3 along = hit->z * Point3{dir.dx, dir.dy, dir.dz};
    EXPECT_LT(distance(along, *hit), 1e-9);
    EXPECT_GT(hit->z, 0.0);
    // Near root: no other hit closer to the camera.
    EXPECT_LE(hit->z, c.z + 1e-9);
  }
  EXPECT_GT(hits, 100);
}

TEST(Intrinsics, SensorDefaultMatchesFieldOfView) {
  const auto k = CameraIntrinsics::sensor_default(1920);
  EXPECT_NEAR(2.0 * std::atan(960.0 / k.fx) * 180.0 / M_PI, 85.0, 1e-9);
  EXPECT_EQ(k.height, 1080);
  const auto h = CameraIntrinsics::sensor_default(960);
  EXPECT_NEAR(h.fx, k.fx / 2.0, 1e-9);
  EXPECT_EQ(h.height, 540);
}

TEST(Intrinsics, ValidateRejectsBadValues) {
  CameraIntrinsics k = k1000();
  EXPECT_NO_THROW(k.validate());
  k.fx = 0;
  EXPECT_THROW(k.validate(), Error);
  k = k1000();
  k.cx = 1920;
  EXPECT_THROW(k.validate(), Error);
}

TEST(Intrinsics, JsonRoundTrip) {
  const auto k = CameraIntrinsics::sensor_default(960);
  const nlohmann::json j = k;
  for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) EXPECT_TRUE(j.contains(key)) << key;
  const auto back = j.get<CameraIntrinsics>();
  EXPECT_EQ(back.fx, k.fx);
  EXPECT_EQ(back.width, k.width);
}
