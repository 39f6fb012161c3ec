#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "finray/geometry.hpp"
#include "finray/image.hpp"
#include "finray/polyfit.hpp"

namespace finray {

enum class Face { contact, back, side_left, side_right };

const char* to_string(Face f) noexcept;
Face face_from_string(const std::string& s);

struct FingerConfig {
  double W = 25.0;       // mm
  double tv = 1.5;       // mm, semi-transparent layer
  double length = 60.0;  // mm
  // Image-plane drift direction of the summed marker offset when each face
  // is pushed, indexed by Face.
  std::array<Direction3, 4> face_normals{{{1, 0, 0}, {-1, 0, 0}, {0, -1, 0}, {0, 1, 0}}};
  int markers_per_side = 6;

  void validate() const;
};

void to_json(nlohmann::json& j, const FingerConfig& c);
void from_json(const nlohmann::json& j, FingerConfig& c);

/// Grid of camera-frame points aligned to a pixel rectangle.
struct SurfaceCloud {
  GridRect grid;
  std::vector<Point3> points;
  std::vector<std::uint8_t> valid;

  SurfaceCloud() = default;
  explicit SurfaceCloud(GridRect g) : grid(g), points(g.size()), valid(g.size(), 0) {}

  bool valid_at(int u, int v) const { return grid.contains(u, v) && valid[grid.index(u, v)]; }
  const Point3& at(int u, int v) const { return points[grid.index(u, v)]; }
  std::size_t valid_count() const;
};

/// Edge depth z as a polynomial of the camera-frame x coordinate of the edge.
struct InclineProfile {
  Polynomial z_of_x;
  double rms_residual = 0.0;

  double z(double x) const { return z_of_x(x); }
  /// Incline angle (radians) of the face at position x.
  double theta(double x) const;
};

/// z = W·fy/|Δv| for two edge samples sharing a column.
double solve_edge_depth(const Pixel& p1, const Pixel& p2, const CameraIntrinsics& k, double W);

/// Fills columns that are missing or narrower than one pixel by linear
/// interpolation between the nearest good columns. Output has one sample
/// per integer column from the first to the last input column.
EdgePair repair_edge_dropouts(const EdgePair& edges);

/// View-face cloud over the pixel lattice between the edges. Interior
/// points are interpolated linearly in 3D between the two edge points.
SurfaceCloud reconstruct_view_face(const EdgePair& edges, const CameraIntrinsics& k, const FingerConfig& cfg);

InclineProfile fit_incline_profile(const EdgePair& edges, const CameraIntrinsics& k, const FingerConfig& cfg,
                                   int degree = 4);

/// Moves every point along its camera ray onto the fitted incline profile.
/// Per-column edge depths are quantised by the integer silhouette; the
/// profile is their smooth least-squares summary.
SurfaceCloud smooth_view_face(const SurfaceCloud& vf, const InclineProfile& incline);

/// Offsets every point by tv / cos θ along +z.
SurfaceCloud to_locally_undeformed_face(const SurfaceCloud& vf, const InclineProfile& incline,
                                        const FingerConfig& cfg);

/// ASCII PLY of the valid points in row-major grid order.
void write_ply(const std::filesystem::path& path, const SurfaceCloud& cloud);

}  // namespace finray
