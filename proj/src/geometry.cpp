#include "finray/geometry.hpp"

#include <numbers>

#include "finray/error.hpp"

namespace finray {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) fail(Errc::ConfigError, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(Errc::ConfigError, "image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    fail(Errc::ConfigError, "principal point outside the image");
  }
}

CameraIntrinsics CameraIntrinsics::scaled_to_width(int new_width) const {
  const double s = static_cast<double>(new_width) / width;
  CameraIntrinsics out;
  out.fx = fx * s;
  out.fy = fy * s;
  out.cx = cx * s;
  out.cy = cy * s;
  out.width = new_width;
  out.height = static_cast<int>(std::lround(height * s));
  return out;
}

CameraIntrinsics CameraIntrinsics::sensor_default(int width) {
  CameraIntrinsics full;
  full.width = 1920;
  full.height = 1080;
  full.fx = 960.0 / std::tan(42.5 * std::numbers::pi / 180.0);
  full.fy = full.fx;
  full.cx = 960.0;
  full.cy = 540.0;
  return width == full.width ? full : full.scaled_to_width(width);
}

Direction3 Direction3::normalized() const {
  const double n = norm();
  return {dx / n, dy / n, dz / n};
}

Pixel project(const Point3& p, const CameraIntrinsics& k) {
  if (!(p.z > 0.0)) fail(Errc::NonPositiveDepth, "cannot project a point with z <= 0");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

Direction3 backproject_ray(const Pixel& q, const CameraIntrinsics& k) {
  return {(q.u - k.cx) / k.fx, (q.v - k.cy) / k.fy, 1.0};
}

std::optional<Point3> ray_sphere_intersect(const Direction3& dir, const Point3& center, double radius) {
  // |t·d - c|^2 = r^2  =>  (d·d) t^2 - 2 (d·c) t + (c·c - r^2) = 0
  const double a = dot(dir, dir);
  const double b = dir.dx * center.x + dir.dy * center.y + dir.dz * center.z;
  const double c = dot(center, center) - radius * radius;
  double disc = b * b - a * c;
  // Grazing rays round to a slightly negative discriminant.
  if (disc < 0.0 && disc > -1e-12 * b * b) disc = 0.0;
  if (disc < 0.0 || a == 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  // Numerically stable near root: t = c / (b + root) equals (b - root) / a.
  double t = (b > 0.0) ? c / (b + root) : (b - root) / a;
  if (!(t > 0.0)) {
    t = (b + root) / a;
    if (!(t > 0.0)) return std::nullopt;
  }
  return t * dir;
}

void to_json(nlohmann::json& j, const CameraIntrinsics& k) {
  j = nlohmann::json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
                     {"width", k.width}, {"height", k.height}};
}

void from_json(const nlohmann::json& j, CameraIntrinsics& k) {
  j.at("fx").get_to(k.fx);
  j.at("fy").get_to(k.fy);
  j.at("cx").get_to(k.cx);
  j.at("cy").get_to(k.cy);
  j.at("width").get_to(k.width);
  j.at("height").get_to(k.height);
}

}  // namespace finray
