#include "finray/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "finray/error.hpp"

namespace finray {

namespace {

struct Tap {
  int src = 0;
  double weight = 0.0;
};

// Source taps of every output sample of a box filter mapping `in` cells onto
// `out` cells; weights are the overlap lengths normalised to sum to one.
std::vector<std::vector<Tap>> box_taps(int in, int out) {
  std::vector<std::vector<Tap>> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int j = 0; j < out; ++j) {
    const double lo = j * scale;
    const double hi = (j + 1) * scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(in - 1, static_cast<int>(std::ceil(hi)) - 1);
    double total = 0.0;
    for (int i = first; i <= last; ++i) {
      const double w = std::min(hi, i + 1.0) - std::max(lo, static_cast<double>(i));
      if (w > 1e-12) {
        taps[j].push_back({i, w});
        total += w;
      }
    }
    for (auto& t : taps[j]) t.weight /= total;
  }
  return taps;
}

}  // namespace

Frame preprocess(const Frame& raw, int target_width, bool flip_h, bool flip_v) {
  if (target_width < 16) fail(Errc::BadTarget, "target width below 16 px");
  if (target_width > raw.width) fail(Errc::BadTarget, "target width exceeds the raw width");

  Frame out;
  if (target_width == raw.width) {
    out = raw;
  } else {
    const int target_height =
        std::max(1, static_cast<int>(std::lround(static_cast<double>(raw.height) * target_width / raw.width)));
    const auto htaps = box_taps(raw.width, target_width);
    const auto vtaps = box_taps(raw.height, target_height);

    std::vector<double> horiz(static_cast<std::size_t>(raw.height) * target_width);
    for (int v = 0; v < raw.height; ++v) {
      const std::uint8_t* row = &raw.pixels[static_cast<std::size_t>(v) * raw.width];
      double* dst = &horiz[static_cast<std::size_t>(v) * target_width];
      for (int j = 0; j < target_width; ++j) {
        double acc = 0.0;
        for (const auto& t : htaps[j]) acc += t.weight * row[t.src];
        dst[j] = acc;
      }
    }
    out = Frame(target_width, target_height, 0, raw.frame_id);
    for (int i = 0; i < target_height; ++i) {
      for (int j = 0; j < target_width; ++j) {
        double acc = 0.0;
        for (const auto& t : vtaps[i]) acc += t.weight * horiz[static_cast<std::size_t>(t.src) * target_width + j];
        out.at(j, i) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
    }
  }

  if (flip_h) {
    for (int v = 0; v < out.height; ++v) {
      auto row = out.pixels.begin() + static_cast<std::ptrdiff_t>(v) * out.width;
      std::reverse(row, row + out.width);
    }
  }
  if (flip_v) {
    for (int v = 0; v < out.height / 2; ++v) {
      auto a = out.pixels.begin() + static_cast<std::ptrdiff_t>(v) * out.width;
      auto b = out.pixels.begin() + static_cast<std::ptrdiff_t>(out.height - 1 - v) * out.width;
      std::swap_ranges(a, a + out.width, b);
    }
  }
  return out;
}

int otsu_threshold(const Frame& f) {
  std::array<double, 256> hist{};
  for (auto p : f.pixels) hist[p] += 1.0;
  const double total = static_cast<double>(f.pixels.size());
  int distinct = 0;
  for (double h : hist) distinct += h > 0.0;
  if (distinct < 2) fail(Errc::DegenerateHistogram, "frame has a single intensity");

  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  std::array<double, 256> between{};
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[t];
    sum0 += t * hist[t];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) {
      between[t] = -1.0;
      continue;
    }
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    between[t] = w0 * w1 * (m0 - m1) * (m0 - m1);
    best = std::max(best, between[t]);
  }
  const double tol = best * 1e-12;
  int first = -1;
  int last = -1;
  for (int t = 0; t < 255; ++t) {
    if (between[t] >= best - tol) {
      if (first < 0) first = t;
      last = t;
    } else if (first >= 0) {
      break;
    }
  }
  return (first + last) / 2;
}

Frame binarize(const Frame& f) {
  const int t = otsu_threshold(f);
  Frame out(f.width, f.height, 0, f.frame_id);
  for (std::size_t i = 0; i < f.pixels.size(); ++i) out.pixels[i] = f.pixels[i] > t ? 255 : 0;
  return out;
}

std::vector<Component> label_components(std::span<const std::uint8_t> mask, int width, int height,
                                        std::vector<int>& labels) {
  labels.assign(static_cast<std::size_t>(width) * height, 0);
  std::vector<Component> comps;
  std::vector<int> stack;
  for (int start = 0; start < width * height; ++start) {
    if (!mask[start] || labels[start]) continue;
    Component c;
    c.label = static_cast<int>(comps.size()) + 1;
    c.bbox = {width, height, -1, -1};
    labels[start] = c.label;
    stack.push_back(start);
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int u = idx % width;
      const int v = idx / width;
      ++c.area;
      c.sum_u += u;
      c.sum_v += v;
      c.bbox.u_min = std::min(c.bbox.u_min, u);
      c.bbox.v_min = std::min(c.bbox.v_min, v);
      c.bbox.u_max = std::max(c.bbox.u_max, u);
      c.bbox.v_max = std::max(c.bbox.v_max, v);
      const auto visit = [&](int n) {
        if (mask[n] && !labels[n]) {
          labels[n] = c.label;
          stack.push_back(n);
        }
      };
      if (u > 0) visit(idx - 1);
      if (u + 1 < width) visit(idx + 1);
      if (v > 0) visit(idx - width);
      if (v + 1 < height) visit(idx + width);
    }
    comps.push_back(c);
  }
  return comps;
}

EdgePair extract_silhouette_edges(const Frame& bin) {
  std::vector<int> labels;
  const auto comps = label_components(bin.pixels, bin.width, bin.height, labels);
  const int large_area = std::max(16, static_cast<int>(0.01 * bin.width * bin.height));
  const Component* region = nullptr;
  int large = 0;
  for (const auto& c : comps) {
    if (c.area >= large_area) {
      ++large;
      if (!region || c.area > region->area) region = &c;
    }
  }
  if (!region) fail(Errc::NoRegion, "no foreground region");
  if (large > 1) fail(Errc::MultipleRegions, std::to_string(large) + " large foreground regions");
  const int span = region->bbox.u_max - region->bbox.u_min + 1;
  if (2 * span < bin.width) fail(Errc::NoRegion, "foreground spans less than half of the image width");

  EdgePair edges;
  edges.upper.reserve(span);
  edges.lower.reserve(span);
  for (int u = region->bbox.u_min; u <= region->bbox.u_max; ++u) {
    int first = -1;
    int last = -1;
    for (int v = region->bbox.v_min; v <= region->bbox.v_max; ++v) {
      if (labels[static_cast<std::size_t>(v) * bin.width + u] == region->label) {
        if (first < 0) first = v;
        last = v;
      }
    }
    if (first < 0) continue;
    edges.upper.push_back({static_cast<double>(u), static_cast<double>(first)});
    edges.lower.push_back({static_cast<double>(u), static_cast<double>(last)});
  }
  return edges;
}

EdgePair to_silhouette_boundary(const EdgePair& edges) {
  EdgePair out = edges;
  for (auto& p : out.upper) p.v -= 0.5;
  for (auto& p : out.lower) p.v += 0.5;
  return out;
}

std::vector<Blob> detect_blobs(const Frame& f, int lo, int hi, int area_min, int area_max) {
  std::vector<std::uint8_t> mask(f.pixels.size());
  bool any = false;
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    mask[i] = f.pixels[i] >= lo && f.pixels[i] <= hi;
    any = any || mask[i];
  }
  std::vector<Blob> blobs;
  if (!any) return blobs;
  std::vector<int> labels;
  for (const auto& c : label_components(mask, f.width, f.height, labels)) {
    if (c.area < area_min || c.area > area_max) continue;
    blobs.push_back({{c.sum_u / c.area, c.sum_v / c.area}, c.area, c.bbox});
  }
  std::sort(blobs.begin(), blobs.end(), [](const Blob& a, const Blob& b) {
    if (a.centroid.v != b.centroid.v) return a.centroid.v < b.centroid.v;
    return a.centroid.u < b.centroid.u;
  });
  return blobs;
}

}  // namespace finray
