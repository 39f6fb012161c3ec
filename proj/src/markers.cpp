#include "finray/markers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "finray/error.hpp"

namespace finray {

int MarkerSet::visible_count() const {
  return static_cast<int>(std::count_if(markers.begin(), markers.end(), [](const Marker& m) { return m.visible; }));
}

void MarkerLayout::validate() const {
  if (upper_count < 2 || lower_count < 2) fail(Errc::ConfigError, "layout needs at least two markers per group");
  if (static_cast<int>(nominal.size()) != total()) fail(Errc::ConfigError, "layout nominal count mismatch");
}

MarkerLayout layout_from(const MarkerSet& ms) {
  MarkerLayout l;
  l.upper_count = 0;
  l.lower_count = 0;
  for (const auto& m : ms.markers) {
    (m.group == Group::upper ? l.upper_count : l.lower_count)++;
    l.nominal.push_back(m.centroid);
  }
  return l;
}

namespace {

// Order-preserving assignment of sorted positions `u` to sorted slots `slot_u`
// (u.size() <= slot_u.size()) minimising the squared distance after removing a
// common shift. Returns the slot of every position.
std::vector<int> align_to_slots(const std::vector<double>& u, const std::vector<double>& slot_u) {
  const int n = static_cast<int>(u.size());
  const int m = static_cast<int>(slot_u.size());
  std::vector<int> assign(n);
  std::iota(assign.begin(), assign.end(), 0);
  if (n == m || n == 0) return assign;

  double shift = 0.0;
  for (int iter = 0; iter < 4; ++iter) {
    // cost[i][j]: best cost placing first i positions into first j slots.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, inf));
    std::vector<std::vector<char>> take(n + 1, std::vector<char>(m + 1, 0));
    for (int j = 0; j <= m; ++j) cost[0][j] = 0.0;
    for (int i = 1; i <= n; ++i) {
      for (int j = i; j <= m; ++j) {
        const double skip = cost[i][j - 1];
        const double d = u[i - 1] - shift - slot_u[j - 1];
        const double use = cost[i - 1][j - 1] + d * d;
        if (use <= skip) {
          cost[i][j] = use;
          take[i][j] = 1;
        } else {
          cost[i][j] = skip;
        }
      }
    }
    for (int i = n, j = m; i > 0; --j) {
      if (take[i][j]) assign[--i] = j - 1;
    }
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += u[i] - slot_u[assign[i]];
    shift = sum / n;
  }
  return assign;
}

}  // namespace

MarkerSet index_markers(const std::vector<Blob>& blobs, const MarkerLayout& layout) {
  if (static_cast<int>(blobs.size()) > layout.total()) {
    fail(Errc::TooManyBlobs, std::to_string(blobs.size()) + " blobs for " + std::to_string(layout.total()) +
                                 " markers");
  }
  MarkerSet ms;
  for (int g = 0; g < 2; ++g) {
    const Group grp = g == 0 ? Group::upper : Group::lower;
    const int n = g == 0 ? layout.upper_count : layout.lower_count;
    for (int k = 0; k < n; ++k) {
      ms.markers.push_back({k, grp, layout.nominal[layout.slot(grp, k)], false, false});
    }
  }
  if (blobs.empty()) return ms;

  // Two-means split on v, seeded by the nominal group means.
  auto mean_v = [&](int first, int count) {
    double s = 0.0;
    for (int i = 0; i < count; ++i) s += layout.nominal[first + i].v;
    return s / count;
  };
  double threshold = 0.5 * (mean_v(0, layout.upper_count) + mean_v(layout.upper_count, layout.lower_count));
  for (int iter = 0; iter < 10; ++iter) {
    double su = 0.0, sl = 0.0;
    int nu = 0, nl = 0;
    for (const auto& b : blobs) {
      if (b.centroid.v < threshold) {
        su += b.centroid.v;
        ++nu;
      } else {
        sl += b.centroid.v;
        ++nl;
      }
    }
    if (nu == 0 || nl == 0) break;
    const double next = 0.5 * (su / nu + sl / nl);
    if (next == threshold) break;
    threshold = next;
  }

  for (int g = 0; g < 2; ++g) {
    const Group grp = g == 0 ? Group::upper : Group::lower;
    const int n = g == 0 ? layout.upper_count : layout.lower_count;
    std::vector<Pixel> members;
    for (const auto& b : blobs) {
      if ((b.centroid.v < threshold) == (g == 0)) members.push_back(b.centroid);
    }
    if (static_cast<int>(members.size()) > n) {
      fail(Errc::TooManyBlobs, "group holds more blobs than markers");
    }
    std::sort(members.begin(), members.end(), [](const Pixel& a, const Pixel& b) { return a.u < b.u; });
    std::vector<double> u, slot_u;
    for (const auto& p : members) u.push_back(p.u);
    for (int k = 0; k < n; ++k) slot_u.push_back(layout.nominal[layout.slot(grp, k)].u);
    const auto assign = align_to_slots(u, slot_u);
    for (std::size_t i = 0; i < members.size(); ++i) {
      auto& m = ms.markers[layout.slot(grp, assign[i])];
      m.centroid = members[i];
      m.visible = true;
    }
  }
  return ms;
}

MarkerSet track(const MarkerSet& prev, const std::vector<Blob>& blobs, double max_jump) {
  struct Pair {
    double d2;
    int marker;
    int blob;
  };
  std::vector<Pair> pairs;
  const double limit = max_jump * max_jump;
  for (int i = 0; i < static_cast<int>(prev.markers.size()); ++i) {
    const auto& m = prev.markers[i];
    if (!m.visible && !m.estimated) continue;
    for (int j = 0; j < static_cast<int>(blobs.size()); ++j) {
      const double du = blobs[j].centroid.u - m.centroid.u;
      const double dv = blobs[j].centroid.v - m.centroid.v;
      const double d2 = du * du + dv * dv;
      if (d2 <= limit) pairs.push_back({d2, i, j});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d2 != b.d2) return a.d2 < b.d2;
    if (a.marker != b.marker) return a.marker < b.marker;
    return a.blob < b.blob;
  });

  MarkerSet out = prev;
  for (auto& m : out.markers) {
    m.visible = false;
    m.estimated = false;
  }
  std::vector<char> used_marker(prev.markers.size(), 0), used_blob(blobs.size(), 0);
  int matched = 0;
  for (const auto& p : pairs) {
    if (used_marker[p.marker] || used_blob[p.blob]) continue;
    used_marker[p.marker] = used_blob[p.blob] = 1;
    out.markers[p.marker].centroid = blobs[p.blob].centroid;
    out.markers[p.marker].visible = true;
    ++matched;
  }
  if (2 * matched < static_cast<int>(prev.markers.size())) {
    fail(Errc::TrackingLost, std::to_string(matched) + " of " + std::to_string(prev.markers.size()) +
                                 " markers matched");
  }
  return out;
}

MarkerSet estimate_occluded(const MarkerSet& ms, const MarkerLayout& layout) {
  if (static_cast<int>(ms.markers.size()) != layout.total()) fail(Errc::LayoutMismatch, "marker count differs");
  MarkerSet out = ms;
  for (int g = 0; g < 2; ++g) {
    const Group grp = g == 0 ? Group::upper : Group::lower;
    const int n = g == 0 ? layout.upper_count : layout.lower_count;
    std::vector<int> visible;
    for (int k = 0; k < n; ++k) {
      if (ms.markers[layout.slot(grp, k)].visible) visible.push_back(k);
    }
    if (static_cast<int>(visible.size()) == n) continue;
    if (visible.size() < 2) fail(Errc::GroupBlind, "fewer than two visible markers in a group");
    for (int k = 0; k < n; ++k) {
      auto& m = out.markers[layout.slot(grp, k)];
      if (m.visible) continue;
      std::vector<int> near = visible;
      std::stable_sort(near.begin(), near.end(), [k](int a, int b) { return std::abs(a - k) < std::abs(b - k); });
      double du = 0.0, dv = 0.0;
      for (int i = 0; i < 2; ++i) {
        const int s = layout.slot(grp, near[i]);
        du += ms.markers[s].centroid.u - layout.nominal[s].u;
        dv += ms.markers[s].centroid.v - layout.nominal[s].v;
      }
      const auto& nom = layout.nominal[layout.slot(grp, k)];
      m.centroid = {nom.u + 0.5 * du, nom.v + 0.5 * dv};
      m.estimated = true;
    }
  }
  return out;
}

double marker_distance(const MarkerSet& a, const MarkerSet& b) {
  if (a.markers.size() != b.markers.size()) fail(Errc::LayoutMismatch, "marker counts differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.markers.size(); ++i) {
    const auto& ma = a.markers[i];
    const auto& mb = b.markers[i];
    if (ma.k != mb.k || ma.group != mb.group) fail(Errc::LayoutMismatch, "marker order differs");
    sum += std::hypot(ma.centroid.u - mb.centroid.u, ma.centroid.v - mb.centroid.v);
  }
  return sum;
}

std::vector<Blob> BlobMarkerDetector::detect(const Frame& f) const { return detect_blobs(f, lo, hi, area_min, area_max); }

void to_json(nlohmann::json& j, const MarkerSet& ms) {
  auto arr = nlohmann::json::array();
  for (const auto& m : ms.markers) {
    arr.push_back({{"k", m.k},
                   {"group", m.group == Group::upper ? "upper" : "lower"},
                   {"u", m.centroid.u},
                   {"v", m.centroid.v},
                   {"visible", m.visible},
                   {"estimated", m.estimated}});
  }
  j = nlohmann::json{{"frame_id", ms.frame_id}, {"markers", arr}};
}

void from_json(const nlohmann::json& j, MarkerSet& ms) {
  ms = MarkerSet{};
  j.at("frame_id").get_to(ms.frame_id);
  for (const auto& e : j.at("markers")) {
    Marker m;
    e.at("k").get_to(m.k);
    m.group = e.at("group").get<std::string>() == "upper" ? Group::upper : Group::lower;
    e.at("u").get_to(m.centroid.u);
    e.at("v").get_to(m.centroid.v);
    e.at("visible").get_to(m.visible);
    m.estimated = e.value("estimated", false);
    ms.markers.push_back(m);
  }
}

void to_json(nlohmann::json& j, const MarkerLayout& l) {
  auto nominal = nlohmann::json::array();
  for (const auto& p : l.nominal) nominal.push_back({p.u, p.v});
  j = nlohmann::json{{"upper_count", l.upper_count}, {"lower_count", l.lower_count}, {"nominal", nominal}};
}

void from_json(const nlohmann::json& j, MarkerLayout& l) {
  l = MarkerLayout{};
  j.at("upper_count").get_to(l.upper_count);
  j.at("lower_count").get_to(l.lower_count);
  for (const auto& p : j.at("nominal")) l.nominal.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
}

}  // namespace finray
