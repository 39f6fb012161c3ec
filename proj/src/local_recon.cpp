#include "finray/local_recon.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "finray/error.hpp"
#include "finray/image_io.hpp"

namespace finray {

double MappingPolynomial::operator()(double x) const {
  double acc = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
  return acc;
}

bool MappingPolynomial::is_increasing(int samples) const {
  double prev = (*this)(domain_lo);
  for (int i = 1; i < samples; ++i) {
    const double x = domain_lo + (domain_hi - domain_lo) * i / (samples - 1);
    const double y = (*this)(x);
    if (!(y > prev)) return false;
    prev = y;
  }
  return true;
}

std::size_t DepthMap::contact_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

DiffField normalized_diff(const Frame& live, const Frame& ref, const GridRect& region) {
  if (live.width != ref.width || live.height != ref.height) fail(Errc::SizeMismatch, "live and reference sizes differ");
  if (region.u0 < 0 || region.v0 < 0 || region.u0 + region.cols > live.width ||
      region.v0 + region.rows > live.height) {
    fail(Errc::SizeMismatch, "region exceeds the frame");
  }
  DiffField out{region, std::vector<double>(region.size(), 0.0), std::vector<std::uint8_t>(region.size(), 0)};
  for (int v = region.v0; v < region.v0 + region.rows; ++v) {
    for (int u = region.u0; u < region.u0 + region.cols; ++u) {
      const double r = ref.at(u, v);
      if (r < 8.0) continue;
      const auto idx = region.index(u, v);
      out.value[idx] = std::clamp((r - live.at(u, v)) / r, 0.0, 1.0);
      out.valid[idx] = 1;
    }
  }
  return out;
}

DepthMap apply_mapping(const DiffField& field, const MappingPolynomial& m, double contact_threshold) {
  DepthMap out(field.grid);
  for (std::size_t i = 0; i < field.value.size(); ++i) {
    if (!field.valid[i] || field.value[i] < contact_threshold) continue;
    double x = field.value[i];
    if (x > m.domain_hi) {
      x = m.domain_hi;
      out.clamped[i] = 1;
    }
    out.depth[i] = std::max(0.0, m(x));
    out.mask[i] = 1;
  }
  return out;
}

SurfaceCloud compose_contact_cloud(const SurfaceCloud& luf, const DepthMap& depth) {
  if (!(luf.grid == depth.grid)) fail(Errc::GridMismatch, "depth map and LUF grids differ");
  SurfaceCloud out = luf;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (out.valid[i] && depth.mask[i]) out.points[i].z -= depth.depth[i];
  }
  return out;
}

void remove_small_regions(DepthMap& depth, int min_area) {
  std::vector<int> labels;
  const auto comps = label_components(depth.mask, depth.grid.cols, depth.grid.rows, labels);
  std::vector<char> drop(comps.size() + 1, 0);
  for (const auto& c : comps) drop[c.label] = c.area < min_area;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] && drop[labels[i]]) {
      depth.mask[i] = 0;
      depth.depth[i] = 0.0;
      depth.clamped[i] = 0;
    }
  }
}

namespace {

// Separable square min (erode) or max (dilate) filter of half width r.
std::vector<std::uint8_t> square_filter(const std::vector<std::uint8_t>& m, int cols, int rows, int r, bool erode) {
  std::vector<std::uint8_t> tmp(m.size()), out(m.size());
  const std::uint8_t outside = erode ? 1 : 0;
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      std::uint8_t acc = erode ? 1 : 0;
      for (int d = -r; d <= r; ++d) {
        const int x = u + d;
        const std::uint8_t val = (x < 0 || x >= cols) ? outside : m[static_cast<std::size_t>(v) * cols + x];
        acc = erode ? std::min(acc, val) : std::max(acc, val);
      }
      tmp[static_cast<std::size_t>(v) * cols + u] = acc;
    }
  }
  for (int v = 0; v < rows; ++v) {
    for (int u = 0; u < cols; ++u) {
      std::uint8_t acc = erode ? 1 : 0;
      for (int d = -r; d <= r; ++d) {
        const int y = v + d;
        const std::uint8_t val = (y < 0 || y >= rows) ? outside : tmp[static_cast<std::size_t>(y) * cols + u];
        acc = erode ? std::min(acc, val) : std::max(acc, val);
      }
      out[static_cast<std::size_t>(v) * cols + u] = acc;
    }
  }
  return out;
}

}  // namespace

void open_contact_mask(DepthMap& depth, int radius) {
  if (radius <= 0 || depth.grid.size() == 0) return;
  std::vector<std::uint8_t> m(depth.mask.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = depth.mask[i] ? 1 : 0;
  const int cols = depth.grid.cols, rows = depth.grid.rows;
  const auto opened = square_filter(square_filter(m, cols, rows, radius, true), cols, rows, radius, false);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i] && !opened[i]) {
      depth.mask[i] = 0;
      depth.depth[i] = 0.0;
      depth.clamped[i] = 0;
    }
  }
}

void write_depth_pgm(const std::filesystem::path& path, const DepthMap& depth, int width, int height) {
  std::vector<std::uint16_t> data(static_cast<std::size_t>(width) * height, 0);
  const auto& g = depth.grid;
  for (int v = g.v0; v < g.v0 + g.rows; ++v) {
    for (int u = g.u0; u < g.u0 + g.cols; ++u) {
      if (u < 0 || v < 0 || u >= width || v >= height) continue;
      const auto idx = g.index(u, v);
      if (!depth.mask[idx]) continue;
      const long units = std::lround(depth.depth[idx] * 10.0);
      data[static_cast<std::size_t>(v) * width + u] = static_cast<std::uint16_t>(std::clamp(units, 0L, 65535L));
    }
  }
  write_pgm16(path, width, height, data);
  auto sidecar = path;
  sidecar.replace_extension(".json");
  write_text(sidecar, nlohmann::json{{"scale_um", 100}}.dump() + "\n");
}

DepthMap read_depth_pgm(const std::filesystem::path& path) {
  int w = 0, h = 0;
  const auto data = read_pgm16(path, w, h);
  double scale_mm = 0.1;
  auto sidecar = path;
  sidecar.replace_extension(".json");
  if (std::filesystem::exists(sidecar)) {
    try {
      scale_mm = nlohmann::json::parse(read_text(sidecar)).at("scale_um").get<double>() / 1000.0;
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ParseError, sidecar.string() + ": " + e.what());
    }
  }
  DepthMap out(GridRect{0, 0, w, h});
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.depth[i] = data[i] * scale_mm;
    out.mask[i] = data[i] > 0;
  }
  return out;
}

}  // namespace finray
