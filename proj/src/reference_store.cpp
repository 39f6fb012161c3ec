#include "finray/reference_store.hpp"

#include <sstream>

#include <json.hpp>

#include "finray/error.hpp"
#include "finray/image_io.hpp"

namespace finray {

namespace fs = std::filesystem;

Frame ReferenceStore::frame(std::size_t index) const {
  if (!frames.empty()) return frames.at(index);
  Frame f = read_frame(frames_dir / frame_filename(entries.at(index).frame_id, frame_extension));
  f.frame_id = entries[index].frame_id;
  return f;
}

namespace {

// Shared tracking loop; `load(i)` yields frame i of n.
template <typename Load>
std::vector<StoreEntry> track_sequence(int n, Load load, const MarkerLayout& layout, const MarkerDetector& detector,
                                       double max_jump) {
  if (n < 1) fail(Errc::SparseMarkers, "empty reference sequence");
  std::vector<StoreEntry> entries;
  MarkerSet prev;
  bool have_prev = false;
  for (int i = 0; i < n; ++i) {
    const Frame f = load(i);
    const auto blobs = detector.detect(f);
    try {
      MarkerSet ms;
      bool tracked = false;
      if (have_prev) {
        try {
          ms = track(prev, blobs, max_jump);
          tracked = true;
        } catch (const Error&) {
        }
      }
      if (!tracked) ms = index_markers(blobs, layout);
      if (2 * ms.visible_count() < layout.total()) fail(Errc::SparseMarkers, "too few markers visible");
      ms = estimate_occluded(ms, layout);
      ms.frame_id = f.frame_id;
      prev = ms;
      have_prev = true;
      entries.push_back({f.frame_id, ms});
    } catch (const Error&) {
      have_prev = false;
    }
  }
  if (static_cast<double>(entries.size()) < 0.95 * n) {
    fail(Errc::SparseMarkers, "markers detectable in " + std::to_string(entries.size()) + " of " +
                                  std::to_string(n) + " frames");
  }
  return entries;
}

}  // namespace

ReferenceStore build_store(const fs::path& sequence_dir, const MarkerLayout& layout, const MarkerDetector& detector,
                           double max_jump) {
  layout.validate();
  const FrameSequence seq(sequence_dir);
  ReferenceStore store;
  store.entries = track_sequence(
      seq.size(), [&](int i) { return seq.load(i); }, layout, detector, max_jump);
  store.layout = layout;
  store.fps = seq.manifest().fps;
  store.source = sequence_dir;
  store.frames_dir = sequence_dir;
  store.frame_extension = seq.manifest().extension;
  return store;
}

ReferenceStore build_store(const std::vector<Frame>& frames, const MarkerLayout& layout,
                           const MarkerDetector& detector, double fps, double max_jump) {
  layout.validate();
  ReferenceStore store;
  store.entries = track_sequence(
      static_cast<int>(frames.size()),
      [&](int i) {
        Frame f = frames[i];
        f.frame_id = i;
        return f;
      },
      layout, detector, max_jump);
  store.layout = layout;
  store.fps = fps;
  for (const auto& e : store.entries) {
    store.frames.push_back(frames[e.frame_id]);
    store.frames.back().frame_id = e.frame_id;
  }
  return store;
}

Retrieval retrieve(const ReferenceStore& store, const MarkerSet& query, bool coarse) {
  if (store.entries.empty()) fail(Errc::EmptyStore, "reference store is empty");
  Retrieval best{0, store.entries[0].frame_id, marker_distance(store.entries[0].markers, query)};
  auto consider = [&](std::size_t i) {
    const double d = marker_distance(store.entries[i].markers, query);
    const auto id = store.entries[i].frame_id;
    if (d < best.distance || (d == best.distance && id < best.frame_id)) best = {i, id, d};
  };
  const std::size_t n = store.entries.size();
  if (!coarse) {
    for (std::size_t i = 1; i < n; ++i) consider(i);
    return best;
  }
  constexpr std::size_t stride = 8;
  for (std::size_t i = stride; i < n; i += stride) consider(i);
  const std::size_t centre = best.index;
  const std::size_t lo = centre >= stride ? centre - stride : 0;
  const std::size_t hi = std::min(n - 1, centre + stride);
  for (std::size_t i = lo; i <= hi; ++i) consider(i);
  return best;
}

void save_store(const ReferenceStore& store, const fs::path& dir) {
  const fs::path frames = dir / "frames";
  fs::create_directories(frames);
  std::ostringstream lines;
  for (std::size_t i = 0; i < store.entries.size(); ++i) {
    const auto& e = store.entries[i];
    const fs::path dst = frames / frame_filename(e.frame_id, ".pgm");
    if (fs::exists(dst)) fs::remove(dst);
    bool linked = false;
    if (store.frames.empty() && store.frame_extension == ".pgm") {
      const fs::path src = store.frames_dir / frame_filename(e.frame_id, ".pgm");
      std::error_code ec;
      fs::create_hard_link(src, dst, ec);
      if (ec) fs::copy_file(src, dst, ec);
      linked = !ec;
    }
    if (!linked) write_pgm(dst, store.frame(i));
    lines << nlohmann::json(e.markers).dump() << '\n';
  }
  write_text(dir / "markers.jsonl", lines.str());
  const nlohmann::json meta{{"fps", store.fps},
                            {"count", store.entries.size()},
                            {"layout", store.layout},
                            {"source", store.source.string()}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

ReferenceStore load_store(const fs::path& dir) {
  ReferenceStore store;
  try {
    const auto meta = nlohmann::json::parse(read_text(dir / "meta.json"));
    meta.at("fps").get_to(store.fps);
    meta.at("layout").get_to(store.layout);
    store.source = meta.value("source", std::string{});
    std::istringstream in(read_text(dir / "markers.jsonl"));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      MarkerSet ms = nlohmann::json::parse(line).get<MarkerSet>();
      store.entries.push_back({ms.frame_id, std::move(ms)});
    }
    if (store.entries.size() != meta.at("count").get<std::size_t>()) {
      fail(Errc::ParseError, "store entry count does not match meta.json");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, dir.string() + ": " + e.what());
  }
  store.frames_dir = dir / "frames";
  store.frame_extension = ".pgm";
  return store;
}

}  // namespace finray
