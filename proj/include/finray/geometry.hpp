#pragma once

#include <cmath>
#include <optional>

#include <json.hpp>

namespace finray {

/// Pinhole intrinsics in pixels. No distortion model.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  /// Same field of view at a different processing width (aspect preserved).
  CameraIntrinsics scaled_to_width(int new_width) const;

  /// Intrinsics of the 1920x1080, 85 degree horizontal FOV sensor camera,
  /// scaled to `width`.
  static CameraIntrinsics sensor_default(int width = 960);
};

/// Sub-pixel image coordinate.
struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Millimetres in the camera frame, z along the optical axis.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Unitless ray direction; not normalised unless stated.
struct Direction3 {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;

  double norm() const { return std::sqrt(dx * dx + dy * dy + dz * dz); }
  Direction3 normalized() const;
};

inline Point3 operator+(const Point3& a, const Point3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Point3 operator-(const Point3& a, const Point3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Point3 operator*(double s, const Point3& p) { return {s * p.x, s * p.y, s * p.z}; }
inline Point3 operator*(double s, const Direction3& d) { return {s * d.dx, s * d.dy, s * d.dz}; }

inline double dot(const Point3& a, const Point3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double dot(const Direction3& a, const Direction3& b) { return a.dx * b.dx + a.dy * b.dy + a.dz * b.dz; }
inline double norm(const Point3& p) { return std::sqrt(dot(p, p)); }
inline double distance(const Point3& a, const Point3& b) { return norm(a - b); }
inline Direction3 as_direction(const Point3& p) { return {p.x, p.y, p.z}; }

/// u = fx·x/z + cx, v = fy·y/z + cy. Throws NonPositiveDepth when z <= 0.
Pixel project(const Point3& p, const CameraIntrinsics& k);

/// K^-1 (u, v, 1): the returned direction has dz == 1 exactly.
Direction3 backproject_ray(const Pixel& q, const CameraIntrinsics& k);

/// Near intersection of the ray from the camera centre along `dir` with a
/// sphere. Tangent rays return the touch point; misses return nullopt.
std::optional<Point3> ray_sphere_intersect(const Direction3& dir, const Point3& center, double radius);

void to_json(nlohmann::json& j, const CameraIntrinsics& k);
void from_json(const nlohmann::json& j, CameraIntrinsics& k);

}  // namespace finray
