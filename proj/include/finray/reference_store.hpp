#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "finray/image.hpp"
#include "finray/markers.hpp"

namespace finray {

struct StoreEntry {
  std::int64_t frame_id = 0;
  MarkerSet markers;  // occlusion-filled
};

/// Contact-free reference frames with precomputed marker sets. Frames are
/// either held in memory or read on demand from `frames_dir`.
struct ReferenceStore {
  std::vector<StoreEntry> entries;
  MarkerLayout layout;
  double fps = 30.0;
  std::filesystem::path source;
  std::filesystem::path frames_dir;
  std::string frame_extension = ".pgm";
  std::vector<Frame> frames;  // empty when disk-backed

  std::size_t size() const { return entries.size(); }
  Frame frame(std::size_t index) const;
};

struct Retrieval {
  std::size_t index = 0;
  std::int64_t frame_id = 0;
  double distance = 0.0;  // px, summed over markers
};

/// Runs detection, indexing, tracking and occlusion fill over every frame
/// of a sequence directory. Frames stay on disk.
ReferenceStore build_store(const std::filesystem::path& sequence_dir, const MarkerLayout& layout,
                           const MarkerDetector& detector, double max_jump = 20.0);

/// In-memory variant over already loaded frames.
ReferenceStore build_store(const std::vector<Frame>& frames, const MarkerLayout& layout,
                           const MarkerDetector& detector, double fps = 30.0, double max_jump = 20.0);

/// Entry with the smallest marker distance to `query`; ties go to the
/// smallest frame_id. `coarse` scans every 8th entry and refines locally,
/// which may return a near-optimal entry.
Retrieval retrieve(const ReferenceStore& store, const MarkerSet& query, bool coarse = false);

/// Writes frames/ + markers.jsonl + meta.json. Frames of a disk-backed store
/// are hard-linked where possible.
void save_store(const ReferenceStore& store, const std::filesystem::path& dir);
ReferenceStore load_store(const std::filesystem::path& dir);

}  // namespace finray
