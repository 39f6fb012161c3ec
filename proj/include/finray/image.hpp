#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "finray/geometry.hpp"

namespace finray {

/// Row-major 8-bit grayscale image.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
  std::int64_t frame_id = 0;

  Frame() = default;
  Frame(int w, int h, std::uint8_t fill = 0, std::int64_t id = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill), frame_id(id) {}

  std::uint8_t at(int u, int v) const { return pixels[static_cast<std::size_t>(v) * width + u]; }
  std::uint8_t& at(int u, int v) { return pixels[static_cast<std::size_t>(v) * width + u]; }
  bool contains(int u, int v) const { return u >= 0 && v >= 0 && u < width && v < height; }
  bool empty() const { return pixels.empty(); }

  friend bool operator==(const Frame&, const Frame&) = default;
};

/// Axis-aligned integer rectangle of the pixel lattice (inclusive origin).
struct GridRect {
  int u0 = 0;
  int v0 = 0;
  int cols = 0;
  int rows = 0;

  std::size_t size() const { return static_cast<std::size_t>(cols) * rows; }
  bool contains(int u, int v) const { return u >= u0 && v >= v0 && u < u0 + cols && v < v0 + rows; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v - v0) * cols + (u - u0);
  }

  friend bool operator==(const GridRect&, const GridRect&) = default;
};

struct IntRect {
  int u_min = 0;
  int v_min = 0;
  int u_max = 0;
  int v_max = 0;
};

struct Blob {
  Pixel centroid;
  int area = 0;
  IntRect bbox;
};

/// Silhouette boundary of the finger face, one sample per image column.
/// The finger's length runs along image u and its width along image v, so
/// matching samples share a column. `upper[i].v <= lower[i].v`.
struct EdgePair {
  std::vector<Pixel> upper;
  std::vector<Pixel> lower;

  std::size_t size() const { return upper.size(); }
};

/// Aspect-preserving area-average downscale followed by optional flips.
Frame preprocess(const Frame& raw, int target_width, bool flip_h, bool flip_v);

/// Otsu threshold (pixels strictly above become foreground). Ties on the
/// between-class variance resolve to the middle of the maximal plateau.
int otsu_threshold(const Frame& f);

/// Otsu binarisation to {0, 255}. Throws DegenerateHistogram on constant frames.
Frame binarize(const Frame& f);

/// Upper and lower boundary chains of the single large foreground region,
/// reported as the outermost foreground pixel centres of every column.
EdgePair extract_silhouette_edges(const Frame& bin);

/// Widens each chain by half a pixel so the samples lie on the pixel borders
/// between background and foreground.
EdgePair to_silhouette_boundary(const EdgePair& edges);

struct Component {
  int label = 0;
  int area = 0;
  double sum_u = 0.0;
  double sum_v = 0.0;
  IntRect bbox;
};

/// 4-connected components of the non-zero cells of `mask`. `labels` receives
/// a label per cell (0 = background, components numbered from 1).
std::vector<Component> label_components(std::span<const std::uint8_t> mask, int width, int height,
                                        std::vector<int>& labels);

/// Connected components of pixels with intensity in [lo, hi] whose area is in
/// [area_min, area_max], ordered by (v, u) of the centroid.
std::vector<Blob> detect_blobs(const Frame& f, int lo, int hi, int area_min, int area_max);

}  // namespace finray
