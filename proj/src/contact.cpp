#include "finray/contact.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "finray/error.hpp"

namespace finray {

void to_json(nlohmann::json& j, const ContactEvent& e) {
  j = nlohmann::json{{"frame_id", e.frame_id}, {"detected", e.detected}, {"offset_norm", e.offset_norm}};
  if (e.detected) {
    j["o"] = {e.o.dx, e.o.dy, e.o.dz};
    j["face"] = to_string(e.face);
    j["region"] = e.region;
  }
  if (e.contact_point) j["contact_point"] = {e.contact_point->x, e.contact_point->y, e.contact_point->z};
  if (e.force) j["force"] = *e.force;
  if (e.pose_deg) j["pose_deg"] = *e.pose_deg;
}

Offset2 global_offset(const MarkerSet& ms, const MarkerLayout& initial) {
  if (static_cast<int>(ms.markers.size()) != initial.total()) fail(Errc::LayoutMismatch, "marker count differs");
  Offset2 o;
  for (std::size_t i = 0; i < ms.markers.size(); ++i) {
    o.u += ms.markers[i].centroid.u - initial.nominal[i].u;
    o.v += ms.markers[i].centroid.v - initial.nominal[i].v;
  }
  return o;
}

bool detect_contact(const Offset2& o, double eps) { return o.norm() > eps; }

DirectionClass classify_direction(const Offset2& o, const FingerConfig& cfg) {
  const double n = o.norm();
  if (!(n > 0.0)) fail(Errc::ZeroOffset, "offset is zero");
  DirectionClass out;
  out.o = {o.u / n, o.v / n, 0.0};
  double best = -2.0;
  for (int f = 0; f < 4; ++f) {
    const double s = dot(cfg.face_normals[f], out.o);
    if (s > best) {
      best = s;
      out.face = static_cast<Face>(f);
    }
  }
  return out;
}

int classify_region(const Direction3& o, int regions) {
  const double width = 2.0 * std::numbers::pi / regions;
  double a = std::atan2(o.dy, o.dx) + 0.5 * width;
  a = std::fmod(a, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return std::min(regions - 1, static_cast<int>(a / width));
}

double contact_epsilon(std::vector<double> offset_norms) {
  if (offset_norms.empty()) fail(Errc::TooFewSamples, "no offsets to derive a contact threshold from");
  std::sort(offset_norms.begin(), offset_norms.end());
  const double pos = 0.99 * (offset_norms.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(offset_norms.size() - 1, lo + 1);
  const double p99 = offset_norms[lo] + (pos - lo) * (offset_norms[hi] - offset_norms[lo]);
  return std::max(1.5 * p99, 1e-6);
}

std::optional<Point3> contact_point(const SurfaceCloud& contact_face, const DepthMap& depth) {
  if (!(contact_face.grid == depth.grid)) fail(Errc::GridMismatch, "depth map and cloud grids differ");
  std::vector<std::uint8_t> m(depth.mask.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = depth.mask[i] && contact_face.valid[i];
  std::vector<int> labels;
  const auto comps = label_components(m, depth.grid.cols, depth.grid.rows, labels);
  // Per region: integrated depth and depth-weighted sum of points.
  std::vector<double> w(comps.size() + 1, 0.0);
  std::vector<Point3> acc(comps.size() + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!labels[i]) continue;
    const double wi = depth.depth[i];
    acc[labels[i]] = acc[labels[i]] + wi * contact_face.points[i];
    w[labels[i]] += wi;
  }
  const auto best = std::max_element(w.begin(), w.end()) - w.begin();
  if (!(w[best] > 0.0)) return std::nullopt;
  return (1.0 / w[best]) * acc[best];
}

double estimate_pose(const std::vector<Point3>& pts) {
  if (pts.size() < 10) fail(Errc::TooFewPoints, "pose needs at least 10 contact points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d(p.x - mx, p.y - my);
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  const double l_small = std::max(eig.eigenvalues()(0), 0.0);
  const double l_big = eig.eigenvalues()(1);
  if (!(l_big >= 1.2 * l_small) || l_big <= 0.0) fail(Errc::IsotropicCloud, "no dominant principal axis");
  Eigen::Vector2d axis = eig.eigenvectors().col(1);
  if (axis(0) < 0.0 || (axis(0) == 0.0 && axis(1) < 0.0)) axis = -axis;
  double deg = std::atan2(axis(1), axis(0)) * 180.0 / std::numbers::pi;
  if (deg <= -90.0) deg += 180.0;
  return deg;
}

double estimate_pose(const SurfaceCloud& contact_face, const DepthMap& depth) {
  if (!(contact_face.grid == depth.grid)) fail(Errc::GridMismatch, "depth map and cloud grids differ");
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < depth.mask.size(); ++i) {
    if (depth.mask[i] && contact_face.valid[i]) pts.push_back(contact_face.points[i]);
  }
  return estimate_pose(pts);
}

std::array<double, 27> force_features(const MarkerSet& ms, const MarkerLayout& initial, const Point3& contact) {
  if (ms.markers.size() != 12 || initial.total() != 12) {
    fail(Errc::LayoutMismatch, "force features need 6 markers per side");
  }
  std::array<double, 27> x{};
  for (std::size_t i = 0; i < 12; ++i) {
    x[2 * i] = ms.markers[i].centroid.u - initial.nominal[i].u;
    x[2 * i + 1] = ms.markers[i].centroid.v - initial.nominal[i].v;
  }
  x[24] = contact.x;
  x[25] = contact.y;
  x[26] = contact.z;
  return x;
}

}  // namespace finray
