#include "finray/global_recon.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "finray/error.hpp"

namespace finray {

const char* to_string(Face f) noexcept {
  switch (f) {
    case Face::contact: return "contact";
    case Face::back: return "back";
    case Face::side_left: return "side_left";
    case Face::side_right: return "side_right";
  }
  return "?";
}

Face face_from_string(const std::string& s) {
  for (Face f : {Face::contact, Face::back, Face::side_left, Face::side_right}) {
    if (s == to_string(f)) return f;
  }
  fail(Errc::ParseError, "unknown face '" + s + "'");
}

void FingerConfig::validate() const {
  if (!(W > 0.0)) fail(Errc::ConfigError, "finger width must be positive");
  if (!(tv > 0.0)) fail(Errc::ConfigError, "layer thickness must be positive");
  if (!(length > 0.0)) fail(Errc::ConfigError, "finger length must be positive");
  if (markers_per_side < 2) fail(Errc::ConfigError, "need at least two markers per side");
  for (const auto& n : face_normals) {
    if (std::abs(n.norm() - 1.0) > 1e-9) fail(Errc::ConfigError, "face normals must be unit length");
  }
}

void to_json(nlohmann::json& j, const FingerConfig& c) {
  nlohmann::json normals;
  for (int i = 0; i < 4; ++i) {
    const auto& n = c.face_normals[i];
    normals[to_string(static_cast<Face>(i))] = {n.dx, n.dy, n.dz};
  }
  j = nlohmann::json{{"W", c.W},
                     {"tv", c.tv},
                     {"length", c.length},
                     {"markers_per_side", c.markers_per_side},
                     {"face_normals", normals}};
}

void from_json(const nlohmann::json& j, FingerConfig& c) {
  c = FingerConfig{};
  if (j.contains("W")) j.at("W").get_to(c.W);
  if (j.contains("tv")) j.at("tv").get_to(c.tv);
  if (j.contains("length")) j.at("length").get_to(c.length);
  if (j.contains("markers_per_side")) j.at("markers_per_side").get_to(c.markers_per_side);
  if (j.contains("face_normals")) {
    for (const auto& [name, v] : j.at("face_normals").items()) {
      const auto idx = static_cast<int>(face_from_string(name));
      c.face_normals[idx] = {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()};
    }
  }
}

std::size_t SurfaceCloud::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

double InclineProfile::theta(double x) const { return std::atan(z_of_x.derivative(x)); }

double solve_edge_depth(const Pixel& p1, const Pixel& p2, const CameraIntrinsics& k, double W) {
  const double dv = std::abs(p1.v - p2.v);
  if (dv < 1.0) fail(Errc::DegenerateWidth, "edge separation below one pixel");
  return W * k.fy / dv;
}

EdgePair repair_edge_dropouts(const EdgePair& edges) {
  if (edges.size() == 0) return edges;
  const int first = static_cast<int>(std::lround(edges.upper.front().u));
  const int last = static_cast<int>(std::lround(edges.upper.back().u));
  const int n = last - first + 1;
  std::vector<double> up(n), lo(n);
  std::vector<bool> good(n, false);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const int c = static_cast<int>(std::lround(edges.upper[i].u)) - first;
    if (c < 0 || c >= n) continue;
    if (edges.lower[i].v - edges.upper[i].v < 1.0) continue;
    up[c] = edges.upper[i].v;
    lo[c] = edges.lower[i].v;
    good[c] = true;
  }
  int prev = -1;
  for (int c = 0; c < n; ++c) {
    if (!good[c]) continue;
    if (prev < 0) {
      for (int g = 0; g < c; ++g) {
        up[g] = up[c];
        lo[g] = lo[c];
      }
    } else {
      for (int g = prev + 1; g < c; ++g) {
        const double t = static_cast<double>(g - prev) / (c - prev);
        up[g] = up[prev] + t * (up[c] - up[prev]);
        lo[g] = lo[prev] + t * (lo[c] - lo[prev]);
      }
    }
    prev = c;
  }
  if (prev < 0) fail(Errc::DegenerateWidth, "no column with a usable edge separation");
  for (int g = prev + 1; g < n; ++g) {
    up[g] = up[prev];
    lo[g] = lo[prev];
  }
  EdgePair out;
  out.upper.reserve(n);
  out.lower.reserve(n);
  for (int c = 0; c < n; ++c) {
    out.upper.push_back({static_cast<double>(first + c), up[c]});
    out.lower.push_back({static_cast<double>(first + c), lo[c]});
  }
  return out;
}

SurfaceCloud reconstruct_view_face(const EdgePair& edges, const CameraIntrinsics& k, const FingerConfig& cfg) {
  if (edges.size() < 2 || edges.lower.size() != edges.upper.size()) {
    fail(Errc::InsufficientRows, "edge chains need at least two matching samples");
  }
  const int u_first = static_cast<int>(std::lround(edges.upper.front().u));
  const int u_last = static_cast<int>(std::lround(edges.upper.back().u));
  int v_min = k.height;
  int v_max = -1;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    v_min = std::min(v_min, static_cast<int>(std::ceil(edges.upper[i].v)));
    v_max = std::max(v_max, static_cast<int>(std::floor(edges.lower[i].v)));
  }
  v_min = std::max(v_min, 0);
  v_max = std::min(v_max, k.height - 1);
  SurfaceCloud cloud(GridRect{u_first, v_min, u_last - u_first + 1, std::max(0, v_max - v_min + 1)});

  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Pixel& p1 = edges.upper[i];
    const Pixel& p2 = edges.lower[i];
    const double z = solve_edge_depth(p1, p2, k, cfg.W);
    const Point3 a = z * backproject_ray(p1, k);
    const Point3 b = z * backproject_ray(p2, k);
    const int u = static_cast<int>(std::lround(p1.u));
    const int v_lo = std::max(v_min, static_cast<int>(std::ceil(p1.v)));
    const int v_hi = std::min(v_max, static_cast<int>(std::floor(p2.v)));
    for (int v = v_lo; v <= v_hi; ++v) {
      if (!cloud.grid.contains(u, v)) continue;
      const double t = (v - p1.v) / (p2.v - p1.v);
      const auto idx = cloud.grid.index(u, v);
      cloud.points[idx] = a + t * (b - a);
      cloud.valid[idx] = 1;
    }
  }
  return cloud;
}

InclineProfile fit_incline_profile(const EdgePair& edges, const CameraIntrinsics& k, const FingerConfig& cfg,
                                   int degree) {
  if (static_cast<int>(edges.size()) < degree + 1) {
    fail(Errc::InsufficientRows, "too few edge samples for the incline fit");
  }
  std::vector<double> xs, zs;
  xs.reserve(edges.size());
  zs.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double z = solve_edge_depth(edges.upper[i], edges.lower[i], k, cfg.W);
    xs.push_back(z * (edges.upper[i].u - k.cx) / k.fx);
    zs.push_back(z);
  }
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const double shift = 0.5 * (*lo + *hi);
  const double scale = std::max(1e-9, 0.5 * (*hi - *lo));
  const auto fit = fit_polynomial(xs, zs, degree, shift, scale);
  return {fit.poly, fit.rms_residual};
}

SurfaceCloud smooth_view_face(const SurfaceCloud& vf, const InclineProfile& incline) {
  SurfaceCloud out = vf;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!out.valid[i]) continue;
    auto& p = out.points[i];
    const double rx = p.x / p.z;
    const double ry = p.y / p.z;
    // Newton on z = P(rx·z), starting from the measured depth.
    double z = p.z;
    for (int it = 0; it < 8; ++it) {
      const double g = incline.z(rx * z) - z;
      const double dg = incline.z_of_x.derivative(rx * z) * rx - 1.0;
      const double step = g / dg;
      z -= step;
      if (std::abs(step) < 1e-9) break;
    }
    if (!(z > 0.0) || !std::isfinite(z)) continue;
    p = {rx * z, ry * z, z};
  }
  return out;
}

SurfaceCloud to_locally_undeformed_face(const SurfaceCloud& vf, const InclineProfile& incline,
                                        const FingerConfig& cfg) {
  SurfaceCloud out = vf;
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!out.valid[i]) continue;
    const double c = std::cos(incline.theta(out.points[i].x));
    if (c < 0.2) fail(Errc::ExtremeIncline, "incline too steep for the layer offset");
    out.points[i].z += cfg.tv / c;
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const SurfaceCloud& cloud) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.valid_count()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i]) continue;
    const auto& p = cloud.points[i];
    std::snprintf(buf, sizeof buf, "%.4f %.4f %.4f\n", p.x, p.y, p.z);
    out << buf;
  }
}

}  // namespace finray
