#pragma once

#include <filesystem>
#include <vector>

#include "finray/global_recon.hpp"
#include "finray/image.hpp"

namespace finray {

/// Normalised brightness difference (I_ref - I) / I_ref over a pixel rectangle.
struct DiffField {
  GridRect grid;
  std::vector<double> value;
  std::vector<std::uint8_t> valid;
};

/// d = sum a_i x^i over the domain [lo, hi] of x.
struct MappingPolynomial {
  std::vector<double> coeffs;
  double domain_lo = 0.0;
  double domain_hi = 1.0;

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  double operator()(double x) const;
  /// Strictly increasing on an evenly spaced grid of `samples` points.
  bool is_increasing(int samples = 100) const;
};

struct DepthMap {
  GridRect grid;
  std::vector<double> depth;         // mm, 0 outside the mask
  std::vector<std::uint8_t> mask;    // contact pixels
  std::vector<std::uint8_t> clamped; // input exceeded the mapping domain

  DepthMap() = default;
  explicit DepthMap(GridRect g) : grid(g), depth(g.size(), 0.0), mask(g.size(), 0), clamped(g.size(), 0) {}
  std::size_t contact_count() const;
};

/// Pixels with I_ref < 8 are invalid; values are clamped to [0, 1].
DiffField normalized_diff(const Frame& live, const Frame& ref, const GridRect& region);

DepthMap apply_mapping(const DiffField& field, const MappingPolynomial& m, double contact_threshold = 0.04);

/// p_CF = p_LUF - (0, 0, d) on contact pixels.
SurfaceCloud compose_contact_cloud(const SurfaceCloud& luf, const DepthMap& depth);

/// Clears 4-connected contact regions smaller than `min_area` pixels.
void remove_small_regions(DepthMap& depth, int min_area);

/// Morphological opening of the contact mask with a (2r+1)² square. Clears
/// isolated and speckled threshold crossings; solid contact regions keep
/// their shape.
void open_contact_mask(DepthMap& depth, int radius);

/// 16-bit PGM over the full image at 100 µm per unit plus a JSON sidecar
/// next to it (same stem, .json).
void write_depth_pgm(const std::filesystem::path& path, const DepthMap& depth, int width, int height);

/// Reads a depth PGM back into a full-image DepthMap (mask = depth > 0).
DepthMap read_depth_pgm(const std::filesystem::path& path);

}  // namespace finray
