#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "finray/image.hpp"

namespace finray {

enum class Group { upper, lower };

struct Marker {
  int k = 0;
  Group group = Group::upper;
  Pixel centroid;
  bool visible = false;
  bool estimated = false;  // centroid filled in from neighbours
};

/// Markers ordered as upper 0..n-1 followed by lower 0..m-1.
struct MarkerSet {
  std::int64_t frame_id = 0;
  std::vector<Marker> markers;

  std::size_t size() const { return markers.size(); }
  int visible_count() const;
};

/// Expected marker counts and their nominal (rest) image positions, in
/// MarkerSet order.
struct MarkerLayout {
  int upper_count = 6;
  int lower_count = 6;
  std::vector<Pixel> nominal;

  int total() const { return upper_count + lower_count; }
  int slot(Group g, int k) const { return g == Group::upper ? k : upper_count + k; }
  void validate() const;
};

/// Layout whose nominal positions are the centroids of `ms`.
MarkerLayout layout_from(const MarkerSet& ms);

/// Splits blobs into upper and lower groups by v, sorts each by u and
/// assigns them to layout slots. Groups with missing blobs are matched to
/// nominal slots by an order-preserving alignment.
MarkerSet index_markers(const std::vector<Blob>& blobs, const MarkerLayout& layout);

/// Greedy nearest-pair association of blobs to the previous markers within
/// `max_jump` pixels. Unmatched markers become invisible.
MarkerSet track(const MarkerSet& prev, const std::vector<Blob>& blobs, double max_jump = 20.0);

/// Fills invisible markers with the mean displacement of their two nearest
/// visible neighbours (by index) in the same group.
MarkerSet estimate_occluded(const MarkerSet& ms, const MarkerLayout& layout);

/// Sum of per-marker Euclidean distances.
double marker_distance(const MarkerSet& a, const MarkerSet& b);

/// Source of marker blobs, so that other detectors can be substituted.
class MarkerDetector {
 public:
  virtual ~MarkerDetector() = default;
  virtual std::vector<Blob> detect(const Frame& f) const = 0;
};

class BlobMarkerDetector : public MarkerDetector {
 public:
  int lo = 235;
  int hi = 255;
  int area_min = 12;
  int area_max = 2500;

  std::vector<Blob> detect(const Frame& f) const override;
};

void to_json(nlohmann::json& j, const MarkerSet& ms);
void from_json(const nlohmann::json& j, MarkerSet& ms);
void to_json(nlohmann::json& j, const MarkerLayout& l);
void from_json(const nlohmann::json& j, MarkerLayout& l);

}  // namespace finray
