#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "finray/error.hpp"
#include "finray/global_recon.hpp"
#include "finray/simulator.hpp"

using namespace finray;

namespace {

CameraIntrinsics k1000() { return {1000.0, 1000.0, 480.0, 270.0, 960, 540}; }

// Straight finger parallel to the image plane at depth z0.
EdgePair flat_edges(const CameraIntrinsics& k, double z0, double W, int u0, int u1) {
  EdgePair e;
  const double half = 0.5 * W * k.fy / z0;
  for (int u = u0; u <= u1; ++u) {
    e.upper.push_back({double(u), k.cy - half});
    e.lower.push_back({double(u), k.cy + half});
  }
  return e;
}

EdgePair simulator_edges(const FingerState& st, const SceneConfig& scene, std::uint64_t seed) {
  return repair_edge_dropouts(to_silhouette_boundary(extract_silhouette_edges(binarize(render(st, scene, seed)))));
}

double rmse(const SurfaceCloud& a, const SurfaceCloud& gt) {
  double se = 0;
  int n = 0;
  for (int v = gt.grid.v0; v < gt.grid.v0 + gt.grid.rows; ++v) {
    for (int u = gt.grid.u0; u < gt.grid.u0 + gt.grid.cols; ++u) {
      if (!gt.valid_at(u, v) || !a.valid_at(u, v)) continue;
      const double d = distance(a.at(u, v), gt.at(u, v));
      se += d * d;
      ++n;
    }
  }
  return n ? std::sqrt(se / n) : 1e9;
}

}  // namespace

TEST(EdgeDepth, ClosedForm) {
  EXPECT_NEAR(solve_edge_depth({100, 20}, {100, 520}, k1000(), 20.0), 40.0, 1e-12);
}

TEST(EdgeDepth, CoincidentEdgesAreDegenerate) {
  try {
    solve_edge_depth({100, 200}, {100, 200.5}, k1000(), 20.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DegenerateWidth);
  }
}

TEST(EdgeDepth, ScalesWithWidth) {
  const Pixel a{300, 100}, b{300, 260};
  const double z = solve_edge_depth(a, b, k1000(), 25.0);
  for (double s : {0.5, 2.0, 3.7}) EXPECT_NEAR(solve_edge_depth(a, b, k1000(), 25.0 * s), s * z, 1e-9);
}

TEST(ViewFace, FlatFingerIsPlanar) {
  const auto k = k1000();
  const auto e = flat_edges(k, 50.0, 25.0, 200, 700);
  FingerConfig cfg;
  const SurfaceCloud vf = reconstruct_view_face(e, k, cfg);
  EXPECT_GT(vf.valid_count(), 100000u);
  for (std::size_t i = 0; i < vf.points.size(); ++i) {
    if (vf.valid[i]) EXPECT_NEAR(vf.points[i].z, 50.0, 1e-9);
  }
}

TEST(ViewFace, WidthConservedAndRowsCollinear) {
  const SceneConfig scene;
  const auto& k = scene.camera;
  const FingerState st = bent_state(scene, -9.0, 2.0, 6.0, -3.0);
  const EdgePair e = simulator_edges(st, scene, 3);
  const SurfaceCloud vf = reconstruct_view_face(e, k, scene.finger);
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double z = solve_edge_depth(e.upper[i], e.lower[i], k, scene.finger.W);
    const Point3 a = z * backproject_ray(e.upper[i], k), b = z * backproject_ray(e.lower[i], k);
    EXPECT_NEAR(distance(a, b), scene.finger.W, 1e-6);
    const int u = static_cast<int>(std::lround(e.upper[i].u));
    for (int v = vf.grid.v0; v < vf.grid.v0 + vf.grid.rows; ++v) {
      if (!vf.valid_at(u, v)) continue;
      // On the segment a-b.
      const Point3& p = vf.at(u, v);
      EXPECT_NEAR(distance(a, p) + distance(p, b), distance(a, b), 1e-9);
    }
  }
}

TEST(ViewFace, SimulatorRestPoseMatchesTruth) {
  const SceneConfig scene;
  const FingerState st = rest_state(scene);
  const auto gt = ground_truth(st, scene);
  const SurfaceCloud vf = reconstruct_view_face(simulator_edges(st, scene, 4), scene.camera, scene.finger);
  EXPECT_LE(rmse(vf, gt.view_face), 0.5);
}

TEST(ViewFace, SimulatorBendsMatchTruth) {
  const SceneConfig scene;
  for (double tip : {-12.0, -6.0, 0.0, 5.0}) {
    const FingerState st = bent_state(scene, tip, 1.5, 4.0, 2.0);
    const auto gt = ground_truth(st, scene);
    const EdgePair e = simulator_edges(st, scene, 5);
    const SurfaceCloud vf = reconstruct_view_face(e, scene.camera, scene.finger);
    EXPECT_LE(rmse(vf, gt.view_face), 0.5) << "tip " << tip;
    // Per-column edge depth.
    for (std::size_t i = 0; i < e.size(); i += 5) {
      const double xn = (e.upper[i].u - scene.camera.cx) / scene.camera.fx;
      const auto s = solve_column(st, scene, xn, ColumnSolver::newton);
      if (!s) continue;
      EXPECT_NEAR(solve_edge_depth(e.upper[i], e.lower[i], scene.camera, scene.finger.W),
                  face_point(st, scene, *s).z, 0.5);
    }
  }
}

TEST(Incline, StraightFingerHasZeroAngle) {
  const auto k = k1000();
  const auto e = flat_edges(k, 45.0, 25.0, 100, 800);
  const InclineProfile p = fit_incline_profile(e, k, FingerConfig{});
  for (double x = -15; x <= 15; x += 1) EXPECT_NEAR(p.theta(x), 0.0, 1e-3);
  EXPECT_NEAR(p.z(0.0), 45.0, 1e-6);
}

TEST(Incline, MatchesAnalyticBend) {
  const SceneConfig scene;
  const FingerState st = bent_state(scene, -10.0);
  const EdgePair e = simulator_edges(st, scene, 6);
  const InclineProfile p = fit_incline_profile(e, scene.camera, scene.finger);
  EXPECT_LE(p.rms_residual, 0.2);
  for (double s = 5; s <= 55; s += 5) {
    const Point3 q = face_point(st, scene, s);
    EXPECT_NEAR(p.theta(q.x), face_incline(st, scene, s), 0.02) << "s " << s;
  }
}

TEST(Incline, TooFewRows) {
  const auto k = k1000();
  const auto e = flat_edges(k, 45.0, 25.0, 100, 102);
  try {
    fit_incline_profile(e, k, FingerConfig{});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::InsufficientRows);
  }
}

TEST(Luf, FlatOffsetIsLayerThickness) {
  const auto k = k1000();
  const auto e = flat_edges(k, 50.0, 25.0, 300, 400);
  FingerConfig cfg;
  const SurfaceCloud vf = reconstruct_view_face(e, k, cfg);
  const SurfaceCloud luf = to_locally_undeformed_face(vf, fit_incline_profile(e, k, cfg), cfg);
  for (std::size_t i = 0; i < vf.points.size(); ++i) {
    if (!vf.valid[i]) continue;
    EXPECT_NEAR(luf.points[i].z - vf.points[i].z, 1.5, 1e-6);
    EXPECT_EQ(luf.points[i].x, vf.points[i].x);
    EXPECT_EQ(luf.points[i].y, vf.points[i].y);
  }
}

TEST(Luf, SixtyDegreeInclineDoublesOffset) {
  SurfaceCloud vf(GridRect{0, 0, 3, 1});
  vf.points = {{-1, 0, 40}, {0, 0, 40}, {1, 0, 40}};
  vf.valid = {1, 1, 1};
  InclineProfile p;
  p.z_of_x.coeffs = {40.0, std::tan(std::numbers::pi / 3)};
  const SurfaceCloud luf = to_locally_undeformed_face(vf, p, FingerConfig{});
  for (const auto& q : luf.points) EXPECT_NEAR(q.z - 40.0, 3.0, 1e-9);
}

TEST(Luf, ExtremeInclineRejected) {
  SurfaceCloud vf(GridRect{0, 0, 1, 1});
  vf.points = {{0, 0, 40}};
  vf.valid = {1};
  InclineProfile p;
  p.z_of_x.coeffs = {40.0, 6.0};  // cos(atan 6) < 0.2
  try {
    to_locally_undeformed_face(vf, p, FingerConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ExtremeIncline);
  }
}

TEST(Repair, FillsDroppedColumns) {
  const auto k = k1000();
  EdgePair e = flat_edges(k, 50.0, 25.0, 100, 200);
  EdgePair holed;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i >= 40 && i < 50) continue;
    holed.upper.push_back(e.upper[i]);
    holed.lower.push_back(e.lower[i]);
  }
  const EdgePair r = repair_edge_dropouts(holed);
  ASSERT_EQ(r.size(), e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_NEAR(r.upper[i].v, e.upper[i].v, 1e-9);
    EXPECT_NEAR(r.lower[i].v, e.lower[i].v, 1e-9);
  }
}

TEST(FingerConfigJson, RoundTripAndValidation) {
  FingerConfig c;
  c.W = 22.0;
  const FingerConfig back = nlohmann::json(c).get<FingerConfig>();
  EXPECT_EQ(back.W, 22.0);
  EXPECT_EQ(back.markers_per_side, c.markers_per_side);
  c.tv = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = FingerConfig{};
  c.face_normals[0] = {0.5, 0, 0};
  EXPECT_THROW(c.validate(), Error);
}
