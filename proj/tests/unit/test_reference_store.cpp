#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "finray/error.hpp"
#include "finray/image_io.hpp"
#include "finray/reference_store.hpp"
#include "finray/simulator.hpp"

using namespace finray;
namespace fs = std::filesystem;

namespace {

MarkerSet shifted(const MarkerSet& ms, double du, double dv) {
  MarkerSet out = ms;
  for (auto& m : out.markers) {
    m.centroid.u += du;
    m.centroid.v += dv;
  }
  return out;
}

ReferenceStore synthetic_store() {
  const SceneConfig scene;
  ReferenceStore s;
  s.layout = rest_layout(scene);
  const MarkerSet base = project_markers(rest_state(scene), scene);
  for (int i = 0; i < 10; ++i) s.entries.push_back({i, shifted(base, 3.0 * i, -1.0 * i)});
  return s;
}

}  // namespace

TEST(Retrieve, ExactEntryHasZeroDistance) {
  const auto store = synthetic_store();
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Retrieval r = retrieve(store, store.entries[i].markers);
    EXPECT_EQ(r.index, i);
    EXPECT_EQ(r.distance, 0.0);
  }
}

TEST(Retrieve, InterpolatedQueryPicksNearer) {
  const auto store = synthetic_store();
  // 25% of the way from entry 2 toward entry 6 is nearer entry 2 in the
  // metric; 75% is nearer entry 6.
  MarkerSet q = store.entries[2].markers;
  for (std::size_t m = 0; m < q.size(); ++m) {
    const auto& a = store.entries[2].markers.markers[m].centroid;
    const auto& b = store.entries[6].markers.markers[m].centroid;
    q.markers[m].centroid = {a.u + 0.75 * (b.u - a.u), a.v + 0.75 * (b.v - a.v)};
  }
  const Retrieval r = retrieve(store, q);
  EXPECT_EQ(r.frame_id, 5);  // entries are evenly spaced, 75% of 2→6 lands on 5
}

TEST(Retrieve, IsExhaustiveMinimum) {
  const auto store = synthetic_store();
  const MarkerSet q = shifted(store.entries[4].markers, 1.3, 2.9);
  const Retrieval r = retrieve(store, q);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : store.entries) best = std::min(best, marker_distance(q, e.markers));
  EXPECT_DOUBLE_EQ(r.distance, best);
}

TEST(Retrieve, TiesGoToSmallestFrameId) {
  auto store = synthetic_store();
  store.entries.push_back({99, store.entries[3].markers});
  std::swap(store.entries.front(), store.entries.back());
  const Retrieval r = retrieve(store, store.entries[3].markers);
  EXPECT_EQ(r.frame_id, 3);
}

TEST(Retrieve, EmptyStore) {
  ReferenceStore s;
  try {
    retrieve(s, MarkerSet{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyStore);
  }
}

TEST(Retrieve, CoarseScanIsNearOptimal) {
  auto store = synthetic_store();
  const MarkerSet q = shifted(store.entries[7].markers, 0.4, 0.1);
  const Retrieval exact = retrieve(store, q), coarse = retrieve(store, q, true);
  EXPECT_EQ(exact.index, 7u);
  EXPECT_LE(coarse.distance, exact.distance + 1e-9 + 60.0);
}

TEST(BuildStore, SimulatorSequenceRoundTrip) {
  const SceneConfig scene;
  const fs::path dir = fs::temp_directory_path() / "finray_store_seq";
  const fs::path out = fs::temp_directory_path() / "finray_store";
  fs::remove_all(dir);
  fs::remove_all(out);
  gen_reference_sequence(dir, scene, 200, 3);
  const BlobMarkerDetector det;
  const ReferenceStore store = build_store(dir, rest_layout(scene), det);
  ASSERT_EQ(store.size(), 200u);
  for (const auto& e : store.entries) EXPECT_EQ(static_cast<int>(e.markers.size()), store.layout.total());
  save_store(store, out);
  EXPECT_TRUE(fs::exists(out / "meta.json"));
  EXPECT_TRUE(fs::exists(out / "markers.jsonl"));
  const ReferenceStore back = load_store(out);
  ASSERT_EQ(back.size(), 200u);
  for (std::size_t i = 0; i < back.size(); i += 37) {
    EXPECT_EQ(marker_distance(back.entries[i].markers, store.entries[i].markers), 0.0);
    EXPECT_EQ(back.frame(i), store.frame(i));
    // Self retrieval.
    EXPECT_EQ(retrieve(back, back.entries[i].markers).distance, 0.0);
  }
  fs::remove_all(dir);
  fs::remove_all(out);
}

TEST(BuildStore, SingleFrame) {
  const SceneConfig scene;
  const BlobMarkerDetector det;
  const ReferenceStore store = build_store({render(rest_state(scene), scene, 1)}, rest_layout(scene), det);
  EXPECT_EQ(store.size(), 1u);
}

TEST(BuildStore, FrameWithoutMarkersIsSparse) {
  const SceneConfig scene;
  const BlobMarkerDetector det;
  const Frame blank(scene.camera.width, scene.camera.height, 0);
  try {
    build_store({blank}, rest_layout(scene), det);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SparseMarkers);
  }
}
