#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "finray/global_recon.hpp"
#include "finray/local_recon.hpp"
#include "finray/markers.hpp"

namespace finray {

/// Summed marker offset in the image plane, px.
struct Offset2 {
  double u = 0.0;
  double v = 0.0;

  double norm() const { return std::hypot(u, v); }
};

struct ContactEvent {
  std::int64_t frame_id = 0;
  bool detected = false;
  Direction3 o;  // unit, dz = 0 when detected
  Face face = Face::contact;
  int region = -1;  // 8-sector index of o, -1 when not detected
  double offset_norm = 0.0;
  std::optional<Point3> contact_point;
  std::optional<std::array<double, 2>> force;  // N, (Fx, Fy)
  std::optional<double> pose_deg;
};

void to_json(nlohmann::json& j, const ContactEvent& e);

/// o' = Σ (m'_k - m'*_k).
Offset2 global_offset(const MarkerSet& ms, const MarkerLayout& initial);

/// ‖o'‖ > eps.
bool detect_contact(const Offset2& o, double eps);

struct DirectionClass {
  Direction3 o;
  Face face = Face::contact;
};

/// Unit direction of o' and the face whose normal has the largest inner
/// product with it.
DirectionClass classify_direction(const Offset2& o, const FingerConfig& cfg);

/// Index of the 45° sector containing o, sector 0 centred on +u and indices
/// increasing from +u toward +v.
int classify_region(const Direction3& o, int regions = 8);

/// Contact threshold from offsets measured while the finger is unloaded:
/// 1.5 × the 99th percentile of ‖o'‖.
double contact_epsilon(std::vector<double> offset_norms);

/// Depth-weighted centroid of the 4-connected contact region with the
/// largest integrated depth.
std::optional<Point3> contact_point(const SurfaceCloud& contact_face, const DepthMap& depth);

/// In-plane angle (degrees, (-90, 90]) of the principal axis of the masked
/// points, measured from +x toward +y, which appears clockwise in the image.
double estimate_pose(const SurfaceCloud& contact_face, const DepthMap& depth);

/// Same estimate over raw x–y points.
double estimate_pose(const std::vector<Point3>& pts);

/// 24 marker displacements (upper then lower, u then v) and the contact
/// point: the 27 inputs of the force network.
std::array<double, 27> force_features(const MarkerSet& ms, const MarkerLayout& initial, const Point3& contact);

}  // namespace finray
