#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "finray/error.hpp"
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

std::vector<Blob> blobs_at(const std::vector<Pixel>& pts) {
  std::vector<Blob> out;
  for (const auto& p : pts) {
    Blob b;
    b.centroid = p;
    b.area = 20;
    b.bbox = {int(p.u) - 2, int(p.v) - 2, int(p.u) + 3, int(p.v) + 3};
    out.push_back(b);
  }
  return out;
}

}  // namespace

TEST(IndexMarkers, TwoCleanRows) {
  const auto layout = grid_layout();
  const MarkerSet ms = index_markers(blobs_at(layout.nominal), layout);
  ASSERT_EQ(ms.size(), 12u);
  for (int i = 0; i < 12; ++i) {
    const auto& m = ms.markers[i];
    EXPECT_TRUE(m.visible);
    EXPECT_EQ(m.group, i < 6 ? Group::upper : Group::lower);
    EXPECT_EQ(m.k, i % 6);
    EXPECT_EQ(m.centroid.u, layout.nominal[i].u);
  }
}

TEST(IndexMarkers, InputOrderIrrelevant) {
  const auto layout = grid_layout();
  auto pts = layout.nominal;
  std::mt19937 rng(3);
  std::shuffle(pts.begin(), pts.end(), rng);
  EXPECT_EQ(nlohmann::json(index_markers(blobs_at(pts), layout)).dump(),
            nlohmann::json(index_markers(blobs_at(layout.nominal), layout)).dump());
}

TEST(IndexMarkers, MissingMarkerGetsInvisibleSlot) {
  const auto layout = grid_layout();
  auto pts = layout.nominal;
  pts.erase(pts.begin() + 8);  // lower k = 2
  const MarkerSet ms = index_markers(blobs_at(pts), layout);
  ASSERT_EQ(ms.size(), 12u);
  EXPECT_EQ(ms.visible_count(), 11);
  EXPECT_FALSE(ms.markers[8].visible);
  EXPECT_EQ(ms.markers[9].centroid.u, layout.nominal[9].u);
}

TEST(IndexMarkers, TooManyBlobs) {
  const auto layout = grid_layout();
  auto pts = layout.nominal;
  pts.push_back({50, 50});
  try {
    index_markers(blobs_at(pts), layout);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooManyBlobs);
  }
}

TEST(Track, UniformShift) {
  const auto layout = grid_layout();
  const MarkerSet prev = index_markers(blobs_at(layout.nominal), layout);
  std::vector<Pixel> moved;
  for (const auto& p : layout.nominal) moved.push_back({p.u + 2, p.v + 1});
  const MarkerSet next = track(prev, blobs_at(moved));
  for (std::size_t i = 0; i < next.size(); ++i) {
    EXPECT_TRUE(next.markers[i].visible);
    EXPECT_EQ(next.markers[i].k, prev.markers[i].k);
    EXPECT_DOUBLE_EQ(next.markers[i].centroid.u - prev.markers[i].centroid.u, 2.0);
    EXPECT_DOUBLE_EQ(next.markers[i].centroid.v - prev.markers[i].centroid.v, 1.0);
  }
  EXPECT_NEAR(marker_distance(prev, next), 12 * std::sqrt(5.0), 1e-9);
}

TEST(Track, ZeroMotion) {
  const auto layout = grid_layout();
  const MarkerSet prev = index_markers(blobs_at(layout.nominal), layout);
  EXPECT_EQ(marker_distance(track(prev, blobs_at(layout.nominal)), prev), 0.0);
}

TEST(Track, RemovedBlobBecomesInvisible) {
  const auto layout = grid_layout();
  const MarkerSet prev = index_markers(blobs_at(layout.nominal), layout);
  auto pts = layout.nominal;
  pts.erase(pts.begin() + 3);
  const MarkerSet next = track(prev, blobs_at(pts));
  EXPECT_FALSE(next.markers[3].visible);
  for (int i = 0; i < 12; ++i) {
    if (i == 3) continue;
    EXPECT_TRUE(next.markers[i].visible);
    EXPECT_EQ(next.markers[i].centroid.u, prev.markers[i].centroid.u);
  }
}

TEST(Track, LostWhenMostMarkersJump) {
  const auto layout = grid_layout();
  const MarkerSet prev = index_markers(blobs_at(layout.nominal), layout);
  std::vector<Pixel> far;
  for (const auto& p : layout.nominal) far.push_back({p.u + 30, p.v + 25});
  try {
    track(prev, blobs_at(far), 20.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TrackingLost);
  }
}

TEST(Occlusion, AllVisibleUnchanged) {
  const auto layout = grid_layout();
  const MarkerSet ms = index_markers(blobs_at(layout.nominal), layout);
  EXPECT_EQ(nlohmann::json(estimate_occluded(ms, layout)).dump(), nlohmann::json(ms).dump());
}

TEST(Occlusion, UniformGroupMotionFilledExactly) {
  const auto layout = grid_layout();
  std::vector<Pixel> pts;
  for (int i = 0; i < 12; ++i) {
    if (i == 2) continue;
    pts.push_back({layout.nominal[i].u + (i < 6 ? 5.0 : 0.0), layout.nominal[i].v});
  }
  const MarkerSet ms = estimate_occluded(index_markers(blobs_at(pts), layout), layout);
  EXPECT_TRUE(ms.markers[2].estimated);
  EXPECT_FALSE(ms.markers[2].visible);
  EXPECT_DOUBLE_EQ(ms.markers[2].centroid.u, layout.nominal[2].u + 5.0);
  EXPECT_DOUBLE_EQ(ms.markers[2].centroid.v, layout.nominal[2].v);
}

TEST(Occlusion, LinearGradientAveragesFlanks) {
  const auto layout = grid_layout();
  std::vector<Pixel> pts;
  for (int i = 0; i < 12; ++i) {
    if (i == 9) continue;
    const double off = i >= 6 ? 1.5 * (i - 6) : 0.0;
    pts.push_back({layout.nominal[i].u + off, layout.nominal[i].v + 0.5 * off});
  }
  const MarkerSet ms = estimate_occluded(index_markers(blobs_at(pts), layout), layout);
  // Flanks k = 2 and k = 4 have offsets 3 and 6; the mean is 4.5.
  EXPECT_NEAR(ms.markers[9].centroid.u - layout.nominal[9].u, 4.5, 1e-12);
  EXPECT_NEAR(ms.markers[9].centroid.v - layout.nominal[9].v, 2.25, 1e-12);
}

TEST(Occlusion, BlindGroup) {
  const auto layout = grid_layout();
  std::vector<Pixel> pts(layout.nominal.begin(), layout.nominal.begin() + 7);
  try {
    estimate_occluded(index_markers(blobs_at(pts), layout), layout);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::GroupBlind);
  }
}

TEST(MarkerDistance, Basics) {
  const auto layout = grid_layout();
  const MarkerSet a = index_markers(blobs_at(layout.nominal), layout);
  EXPECT_EQ(marker_distance(a, a), 0.0);
  MarkerSet b = a;
  b.markers[4].centroid.u += 3;
  b.markers[4].centroid.v += 4;
  EXPECT_DOUBLE_EQ(marker_distance(a, b), 5.0);
  EXPECT_DOUBLE_EQ(marker_distance(b, a), 5.0);
  MarkerSet c = a;
  c.markers.pop_back();
  try {
    marker_distance(a, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LayoutMismatch);
  }
}

TEST(Track, TranslationEquivariance) {
  const auto layout = grid_layout();
  const MarkerSet prev = index_markers(blobs_at(layout.nominal), layout);
  std::vector<Pixel> pts;
  for (const auto& p : layout.nominal) pts.push_back({p.u + 4.2, p.v - 3.1});
  const MarkerSet next = track(prev, blobs_at(pts));
  EXPECT_NEAR(marker_distance(prev, next), 12 * std::hypot(4.2, 3.1), 1e-9);
}

TEST(Track, IndicesStableOverSmoothWalk) {
  const SceneConfig scene;
  const auto states = reference_walk(scene, 300, 17);
  const BlobMarkerDetector det;
  const MarkerLayout layout = rest_layout(scene);
  MarkerSet prev = estimate_occluded(index_markers(det.detect(render(states[0], scene, 0)), layout), layout);
  for (std::size_t i = 1; i < states.size(); ++i) {
    const MarkerSet truth = project_markers(states[i], scene);
    prev = estimate_occluded(track(prev, det.detect(render(states[i], scene, i))), layout);
    for (std::size_t m = 0; m < truth.size(); ++m) {
      // The tracked marker k stays the projection of anchor k.
      ASSERT_LT(std::hypot(prev.markers[m].centroid.u - truth.markers[m].centroid.u,
                           prev.markers[m].centroid.v - truth.markers[m].centroid.v),
                3.0)
          << "frame " << i << " marker " << m;
    }
  }
}

TEST(MarkerJson, Fields) {
  const auto layout = grid_layout();
  MarkerSet ms = index_markers(blobs_at(layout.nominal), layout);
  ms.frame_id = 42;
  const nlohmann::json j = ms;
  EXPECT_EQ(j["frame_id"], 42);
  ASSERT_EQ(j["markers"].size(), 12u);
  for (const char* key : {"k", "group", "u", "v", "visible"}) EXPECT_TRUE(j["markers"][0].contains(key)) << key;
  EXPECT_EQ(j.get<MarkerSet>().markers[7].centroid.u, ms.markers[7].centroid.u);
}
