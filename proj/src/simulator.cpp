#include "finray/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "finray/error.hpp"
#include "finray/image_io.hpp"

namespace finray {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double poly_eval(const std::vector<double>& c, double s) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
  return acc;
}

double poly_deriv(const std::vector<double>& c, double s) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) acc = acc * s + i * c[i];
  return acc;
}

// Cantilever shape g(s) = (3x² - x³)/2, x = s/L, and its derivative.
double shape(double s, double L) {
  const double x = s / L;
  return 0.5 * x * x * (3.0 - x);
}

double shape_deriv(double s, double L) {
  const double x = s / L;
  return (3.0 * x - 1.5 * x * x) / L;
}

struct Geometry {
  const FingerState& st;
  const SceneConfig& sc;
  double L;

  Geometry(const FingerState& s, const SceneConfig& c) : st(s), sc(c), L(c.finger.length) {}

  double X(double s) const { return sc.x_root + s + st.pull_x * shape(s, L); }
  double Xd(double s) const { return 1.0 + st.pull_x * shape_deriv(s, L); }
  double Y0(double s) const { return st.pull_y * shape(s, L); }
  double f(double s) const { return poly_eval(st.bend, s); }
  double fd(double s) const { return poly_deriv(st.bend, s); }
  double theta(double s) const { return std::atan(fd(s) / Xd(s)); }
  double luf_offset(double s) const { return sc.finger.tv / std::cos(theta(s)); }
};

struct PressSphere {
  Point3 center;
  double radius;
};

std::vector<PressSphere> press_spheres(const Geometry& g) {
  std::vector<PressSphere> out;
  for (const auto& p : g.st.presses) {
    const double z_luf = g.f(p.s) + g.luf_offset(p.s);
    out.push_back({{g.X(p.s), g.Y0(p.s) + p.lateral, z_luf + p.radius - p.depth}, p.radius});
  }
  return out;
}

// Indentation along z of the undeformed face at depth z_luf on the ray dir.
double press_depth(const std::vector<PressSphere>& spheres, const Direction3& dir, double z_luf) {
  double d = 0.0;
  for (const auto& sp : spheres) {
    const auto hit = ray_sphere_intersect(dir, sp.center, sp.radius);
    if (hit) d = std::max(d, z_luf - hit->z);
  }
  return d;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

double SceneConfig::brightness_drop(double d) const {
  if (d <= 0.0) return 0.0;
  return std::min(b_cap, 1.0 - std::exp(-d / b_scale));
}

void SceneConfig::validate() const {
  camera.validate();
  finger.validate();
  if (!(b_scale > 0.0) || !(b_cap > 0.0 && b_cap < 1.0)) fail(Errc::ConfigError, "invalid brightness law");
  if (i_root < 40.0 || i_root > 255.0 || i_tip < 40.0 || i_tip > 255.0) {
    fail(Errc::ConfigError, "base intensity must lie in [40, 255]");
  }
  if (noise_sigma < 0.0) fail(Errc::ConfigError, "noise sigma must be non-negative");
  if (!(z_root > 0.0)) fail(Errc::ConfigError, "finger root must lie in front of the camera");
}

void to_json(nlohmann::json& j, const SceneConfig& s) {
  j = nlohmann::json{{"camera", s.camera},         {"finger", s.finger},
                     {"x_root", s.x_root},         {"z_root", s.z_root},
                     {"tilt_deg", s.tilt_deg},     {"marker_gap", s.marker_gap},
                     {"marker_radius", s.marker_radius}, {"i_root", s.i_root},
                     {"i_tip", s.i_tip},           {"b_scale", s.b_scale},
                     {"b_cap", s.b_cap},           {"noise_sigma", s.noise_sigma}};
}

void from_json(const nlohmann::json& j, SceneConfig& s) {
  s = SceneConfig{};
  if (j.contains("camera")) j.at("camera").get_to(s.camera);
  if (j.contains("finger")) j.at("finger").get_to(s.finger);
  s.x_root = j.value("x_root", s.x_root);
  s.z_root = j.value("z_root", s.z_root);
  s.tilt_deg = j.value("tilt_deg", s.tilt_deg);
  s.marker_gap = j.value("marker_gap", s.marker_gap);
  s.marker_radius = j.value("marker_radius", s.marker_radius);
  s.i_root = j.value("i_root", s.i_root);
  s.i_tip = j.value("i_tip", s.i_tip);
  s.b_scale = j.value("b_scale", s.b_scale);
  s.b_cap = j.value("b_cap", s.b_cap);
  s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
}

void to_json(nlohmann::json& j, const Press& p) {
  j = nlohmann::json{{"s", p.s}, {"lateral", p.lateral}, {"radius", p.radius}, {"depth", p.depth}};
}

void from_json(const nlohmann::json& j, Press& p) {
  j.at("s").get_to(p.s);
  j.at("lateral").get_to(p.lateral);
  j.at("radius").get_to(p.radius);
  j.at("depth").get_to(p.depth);
}

void to_json(nlohmann::json& j, const FingerState& s) {
  j = nlohmann::json{{"bend", s.bend}, {"presses", s.presses}, {"side_pull", {s.pull_x, s.pull_y}}};
}

void from_json(const nlohmann::json& j, FingerState& s) {
  s = FingerState{};
  j.at("bend").get_to(s.bend);
  if (j.contains("presses")) j.at("presses").get_to(s.presses);
  if (j.contains("side_pull")) {
    s.pull_x = j.at("side_pull").at(0).get<double>();
    s.pull_y = j.at("side_pull").at(1).get<double>();
  }
}

FingerState rest_state(const SceneConfig& scene) { return bent_state(scene, 0.0); }

FingerState bent_state(const SceneConfig& scene, double tip, double s_mode, double pull_x, double pull_y) {
  const double L = scene.finger.length;
  FingerState st;
  st.bend = {scene.z_root, std::tan(scene.tilt_deg * kDeg), 0.0, 0.0, 0.0};
  st.bend[2] += 1.5 * tip / (L * L) + 16.0 * s_mode / (L * L);
  st.bend[3] += -0.5 * tip / (L * L * L) - 32.0 * s_mode / (L * L * L);
  st.bend[4] += 16.0 * s_mode / (L * L * L * L);
  st.pull_x = pull_x;
  st.pull_y = pull_y;
  return st;
}

Point3 face_point(const FingerState& st, const SceneConfig& scene, double s, double w) {
  const Geometry g(st, scene);
  return {g.X(s), g.Y0(s) + w, g.f(s)};
}

double face_incline(const FingerState& st, const SceneConfig& scene, double s) {
  return Geometry(st, scene).theta(s);
}

std::vector<Point3> marker_anchors(const FingerState& st, const SceneConfig& scene) {
  const Geometry g(st, scene);
  const int n = scene.finger.markers_per_side;
  const double off = 0.5 * scene.finger.W + scene.marker_gap;
  std::vector<Point3> out;
  for (int side = 0; side < 2; ++side) {
    for (int k = 0; k < n; ++k) {
      const double s = g.L * (k + 0.5) / n;
      out.push_back({g.X(s), g.Y0(s) + (side == 0 ? -off : off), g.f(s)});
    }
  }
  return out;
}

void validate_state(const FingerState& st, const SceneConfig& scene) {
  const Geometry g(st, scene);
  const auto& k = scene.camera;
  for (const auto& p : st.presses) {
    if (p.depth < 0.0 || p.depth > 3.0) fail(Errc::StateOutOfView, "press depth outside [0, 3] mm");
  }
  auto inside = [&](const Point3& p, double margin) {
    if (!(p.z > 0.0)) return false;
    const Pixel q = project(p, k);
    return q.u - margin >= 0.0 && q.v - margin >= 0.0 && q.u + margin <= k.width - 1 &&
           q.v + margin <= k.height - 1;
  };
  for (int i = 0; i <= 60; ++i) {
    const double s = g.L * i / 60.0;
    if (std::cos(g.theta(s)) <= 0.2) fail(Errc::StateOutOfView, "face incline too steep");
    for (double w : {-0.5 * scene.finger.W, 0.5 * scene.finger.W}) {
      if (!inside({g.X(s), g.Y0(s) + w, g.f(s)}, 2.0)) fail(Errc::StateOutOfView, "face leaves the image");
    }
  }
  for (const auto& a : marker_anchors(st, scene)) {
    const double r_px = k.fx * scene.marker_radius / a.z;
    if (!inside(a, r_px + 2.0)) fail(Errc::StateOutOfView, "marker leaves the image");
  }
}

std::optional<double> solve_column(const FingerState& st, const SceneConfig& scene, double xn, ColumnSolver solver) {
  const Geometry g(st, scene);
  auto h = [&](double s) { return g.X(s) - xn * g.f(s); };
  double lo = 0.0, hi = g.L;
  const double h_lo = h(lo), h_hi = h(hi);
  if (h_lo > 0.0 || h_hi < 0.0) return std::nullopt;
  if (solver == ColumnSolver::bisection) {
    for (int i = 0; i < 100 && hi - lo > 1e-11; ++i) {
      const double mid = 0.5 * (lo + hi);
      (h(mid) > 0.0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
  }
  // Newton from the secant estimate.
  double s = h_lo / (h_lo - h_hi) * g.L;
  for (int i = 0; i < 50; ++i) {
    const double step = h(s) / (g.Xd(s) - xn * g.fd(s));
    s -= step;
    if (std::abs(step) < 1e-13) break;
  }
  return std::clamp(s, 0.0, g.L);
}

Frame render(const FingerState& st, const SceneConfig& scene, std::uint64_t seed) {
  validate_state(st, scene);
  const Geometry g(st, scene);
  const auto& k = scene.camera;
  const auto spheres = press_spheres(g);
  const Point3 led{g.X(0.0), g.Y0(0.0), g.f(0.0)};
  const double half_w = 0.5 * scene.finger.W;

  std::vector<double> img(static_cast<std::size_t>(k.width) * k.height, 0.0);
  for (int u = 0; u < k.width; ++u) {
    const double xn = (u - k.cx) / k.fx;
    const auto s = solve_column(st, scene, xn, ColumnSolver::bisection);
    if (!s) continue;
    const double z = g.f(*s);
    const double y0 = g.Y0(*s);
    const double z_luf = z + g.luf_offset(*s);
    for (int v = 0; v < k.height; ++v) {
      const double yn = (v - k.cy) / k.fy;
      const double y = yn * z;
      if (std::abs(y - y0) > half_w) continue;
      const Point3 p{xn * z, y, z};
      const double rho = distance(p, led);
      const double i0 = std::clamp(scene.i_root - (scene.i_root - scene.i_tip) * rho / g.L, 40.0, 255.0);
      const double d = spheres.empty() ? 0.0 : press_depth(spheres, {xn, yn, 1.0}, z_luf);
      img[static_cast<std::size_t>(v) * k.width + u] = i0 * (1.0 - scene.brightness_drop(d));
    }
  }
  for (const auto& a : marker_anchors(st, scene)) {
    const Pixel c = project(a, k);
    const double r = k.fx * scene.marker_radius / a.z;
    for (int v = static_cast<int>(std::floor(c.v - r)); v <= static_cast<int>(std::ceil(c.v + r)); ++v) {
      for (int u = static_cast<int>(std::floor(c.u - r)); u <= static_cast<int>(std::ceil(c.u + r)); ++u) {
        if (u < 0 || v < 0 || u >= k.width || v >= k.height) continue;
        if ((u - c.u) * (u - c.u) + (v - c.v) * (v - c.v) <= r * r) {
          img[static_cast<std::size_t>(v) * k.width + u] = 255.0;
        }
      }
    }
  }

  Frame out(k.width, k.height);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double sigma = scene.noise_sigma;
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double val = sigma > 0.0 ? img[i] + sigma * noise(rng) : img[i];
    out.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(val), 0L, 255L));
  }
  return out;
}

MarkerSet project_markers(const FingerState& st, const SceneConfig& scene) {
  const auto anchors = marker_anchors(st, scene);
  const int n = scene.finger.markers_per_side;
  MarkerSet ms;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    Marker m;
    m.k = static_cast<int>(i) % n;
    m.group = static_cast<int>(i) < n ? Group::upper : Group::lower;
    m.centroid = project(anchors[i], scene.camera);
    m.visible = m.centroid.u >= 0 && m.centroid.v >= 0 && m.centroid.u < scene.camera.width &&
                m.centroid.v < scene.camera.height;
    ms.markers.push_back(m);
  }
  return ms;
}

MarkerLayout rest_layout(const SceneConfig& scene) { return layout_from(project_markers(rest_state(scene), scene)); }

GroundTruth ground_truth(const FingerState& st, const SceneConfig& scene) {
  validate_state(st, scene);
  const Geometry g(st, scene);
  const auto& k = scene.camera;
  const auto spheres = press_spheres(g);
  const double half_w = 0.5 * scene.finger.W;

  struct Column {
    bool hit = false;
    double z = 0.0, y0 = 0.0, luf = 0.0;
  };
  std::vector<Column> cols(k.width);
  int u_min = k.width, u_max = -1, v_min = k.height, v_max = -1;
  for (int u = 0; u < k.width; ++u) {
    const double xn = (u - k.cx) / k.fx;
    const auto s = solve_column(st, scene, xn, ColumnSolver::newton);
    if (!s) continue;
    auto& c = cols[u];
    c.z = g.f(*s);
    c.y0 = g.Y0(*s);
    c.luf = g.luf_offset(*s);
    for (int v = 0; v < k.height; ++v) {
      const double yn = (v - k.cy) / k.fy;
      if (std::abs(yn * c.z - c.y0) > half_w) continue;
      c.hit = true;
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
    if (c.hit) {
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
    }
  }
  if (u_max < 0) fail(Errc::StateOutOfView, "face not visible");

  const GridRect grid{u_min, v_min, u_max - u_min + 1, v_max - v_min + 1};
  GroundTruth gt;
  gt.view_face = SurfaceCloud(grid);
  gt.luf = SurfaceCloud(grid);
  gt.depth = DepthMap(grid);
  for (int u = u_min; u <= u_max; ++u) {
    const auto& c = cols[u];
    if (!c.hit) continue;
    const double xn = (u - k.cx) / k.fx;
    for (int v = v_min; v <= v_max; ++v) {
      const double yn = (v - k.cy) / k.fy;
      if (std::abs(yn * c.z - c.y0) > half_w) continue;
      const auto idx = grid.index(u, v);
      gt.view_face.points[idx] = {xn * c.z, yn * c.z, c.z};
      gt.view_face.valid[idx] = 1;
      gt.luf.points[idx] = {xn * c.z, yn * c.z, c.z + c.luf};
      gt.luf.valid[idx] = 1;
      if (!spheres.empty()) {
        const double d = press_depth(spheres, {xn, yn, 1.0}, c.z + c.luf);
        if (d > 0.0) {
          gt.depth.depth[idx] = d;
          gt.depth.mask[idx] = 1;
        }
      }
    }
  }
  gt.contact_face = compose_contact_cloud(gt.luf, gt.depth);
  gt.markers = project_markers(st, scene);

  gt.event.detected = !st.presses.empty() || st.pull_x != 0.0 || st.pull_y != 0.0;
  if (gt.event.detected) {
    const double n = std::hypot(st.pull_x, st.pull_y);
    gt.event.o = n > 0.0 ? Direction3{st.pull_x / n, st.pull_y / n, 0.0} : scene.finger.face_normals[0];
    gt.event.face = classify_direction({gt.event.o.dx, gt.event.o.dy}, scene.finger).face;
    gt.event.region = classify_region(gt.event.o);
  }
  gt.event.contact_point = contact_point(gt.contact_face, gt.depth);
  return gt;
}

std::vector<FingerState> reference_walk(const SceneConfig& scene, int n, std::uint64_t seed, const WalkRanges& r,
                                        double max_step_px) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double lo[4] = {r.tip_lo, r.s_lo, r.px_lo, r.py_lo};
  const double hi[4] = {r.tip_hi, r.s_hi, r.px_hi, r.py_hi};
  double q[4] = {0.0, 0.0, 0.0, 0.0};
  double vel[4] = {0.0, 0.0, 0.0, 0.0};
  auto make = [&](const double* x) { return bent_state(scene, x[0], x[1], x[2], x[3]); };

  std::vector<FingerState> out;
  FingerState cur = make(q);
  MarkerSet cur_markers = project_markers(cur, scene);
  out.push_back(cur);
  for (int i = 1; i < n; ++i) {
    for (int d = 0; d < 4; ++d) vel[d] = 0.95 * vel[d] + 0.003 * (hi[d] - lo[d]) * gauss(rng);
    bool placed = false;
    for (int attempt = 0; attempt < 12 && !placed; ++attempt) {
      double cand[4];
      for (int d = 0; d < 4; ++d) {
        cand[d] = q[d] + vel[d];
        if (cand[d] < lo[d] || cand[d] > hi[d]) {
          vel[d] = -vel[d];
          cand[d] = std::clamp(q[d] + vel[d], lo[d], hi[d]);
        }
      }
      const FingerState st = make(cand);
      try {
        validate_state(st, scene);
      } catch (const Error&) {
        for (double& v : vel) v = -0.5 * v;
        continue;
      }
      const MarkerSet ms = project_markers(st, scene);
      double step = 0.0;
      for (std::size_t m = 0; m < ms.markers.size(); ++m) {
        step = std::max(step, std::hypot(ms.markers[m].centroid.u - cur_markers.markers[m].centroid.u,
                                         ms.markers[m].centroid.v - cur_markers.markers[m].centroid.v));
      }
      if (step > max_step_px) {
        for (double& v : vel) v *= 0.5;
        continue;
      }
      std::copy(cand, cand + 4, q);
      cur = st;
      cur_markers = ms;
      placed = true;
    }
    if (!placed) std::fill(vel, vel + 4, 0.0);
    out.push_back(cur);
  }
  return out;
}

std::vector<FingerState> press_release_states(const SceneConfig& scene, int n) {
  // Phase lengths in the proportions 100 : 250 : 350 : 250 : 100.
  const double total = 1050.0;
  const double b1 = 100.0 / total, b2 = 350.0 / total, b3 = 700.0 / total, b4 = 950.0 / total;
  std::vector<FingerState> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double t = n > 1 ? static_cast<double>(i) / (n - 1) : 0.0;
    double a = 0.0;
    if (t >= b1 && t < b2) {
      a = (t - b1) / (b2 - b1);
    } else if (t >= b2 && t < b3) {
      a = 1.0;
    } else if (t >= b3 && t < b4) {
      a = 1.0 - (t - b3) / (b4 - b3);
    }
    a = a * a * (3.0 - 2.0 * a);
    FingerState st = bent_state(scene, -10.0 * a, 1.5 * a, 11.0 * a, 4.0 * a);
    if (a > 0.0) st.presses.push_back({32.0, 2.0, 5.0, 2.0 * a});
    out.push_back(st);
  }
  return out;
}

std::vector<FingerState> idle_states(const SceneConfig& scene, int n) {
  return std::vector<FingerState>(static_cast<std::size_t>(std::max(n, 0)), rest_state(scene));
}

FingerState push_state(const SceneConfig& scene, double phi, double s, double magnitude_mm) {
  const double x = s / scene.finger.length;
  const double compliance = 0.5 * x * x * (3.0 - x);
  return bent_state(scene, 0.0, 0.0, magnitude_mm * compliance * std::cos(phi),
                    magnitude_mm * compliance * std::sin(phi));
}

FingerState line_press_state(const SceneConfig& scene, double angle_deg, double s, double lateral, double length,
                             double depth) {
  FingerState st = rest_state(scene);
  const double c = std::cos(angle_deg * kDeg);
  const double sn = std::sin(angle_deg * kDeg);
  const int count = static_cast<int>(std::lround(length / 0.75)) + 1;
  for (int i = 0; i < count; ++i) {
    const double t = -0.5 * length + length * i / (count - 1);
    st.presses.push_back({s + t * c, lateral + t * sn, 2.0, depth});
  }
  return st;
}

std::vector<ForceSample> gen_force_dataset(const SceneConfig& scene, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double L = scene.finger.length;
  const int per_side = scene.finger.markers_per_side;
  const FingerState rest = rest_state(scene);
  // Pixel response per newton at unit influence, along u and v.
  constexpr double kx = 4.0, ky = 6.0, twist = 0.35;

  std::vector<ForceSample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    ForceSample smp;
    const bool zero = i % 16 == 0 || unit(rng) < 0.02;
    const double fx = zero ? 0.0 : 10.0 * unit(rng);
    const double fy = zero ? 0.0 : -4.0 + 8.0 * unit(rng);
    const double a = 10.0 + 45.0 * unit(rng);
    const double lateral = -8.0 + 16.0 * unit(rng);
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? -1.0 : 1.0;
      for (int k = 0; k < per_side && k < 6; ++k) {
        const double sk = L * (k + 0.5) / per_side;
        const double infl = (sk <= a ? sk * sk * (3.0 * a - sk) : a * a * (3.0 * sk - a)) / (L * L * L);
        const double tw = 1.0 + twist * sign * lateral / (0.5 * scene.finger.W);
        const int idx = side * 6 + k;
        smp.x[2 * idx] = kx * fx * infl * tw + 0.2 * gauss(rng);
        smp.x[2 * idx + 1] = ky * fy * infl + 0.2 * gauss(rng);
      }
    }
    const Point3 cp = face_point(rest, scene, a, lateral);
    smp.x[24] = cp.x + 0.1 * gauss(rng);
    smp.x[25] = cp.y + 0.1 * gauss(rng);
    smp.x[26] = cp.z + scene.finger.tv + 0.1 * gauss(rng);
    smp.y = {fx, fy};
    out.push_back(smp);
  }
  return out;
}

std::uint64_t frame_seed(std::uint64_t seed, std::int64_t index) {
  return splitmix(splitmix(seed) ^ static_cast<std::uint64_t>(index));
}

void write_sequence(const std::filesystem::path& dir, const std::vector<FingerState>& states,
                    const SceneConfig& scene, std::uint64_t seed, double fps) {
  SequenceWriter writer(dir, fps);
  std::ostringstream markers, st_lines;
  for (std::size_t i = 0; i < states.size(); ++i) {
    Frame f = render(states[i], scene, frame_seed(seed, static_cast<std::int64_t>(i)));
    writer.append(f);
    MarkerSet ms = project_markers(states[i], scene);
    ms.frame_id = static_cast<std::int64_t>(i);
    markers << nlohmann::json(ms).dump() << '\n';
    st_lines << nlohmann::json(states[i]).dump() << '\n';
  }
  writer.finish();
  write_text(dir / "markers.jsonl", markers.str());
  write_text(dir / "states.jsonl", st_lines.str());
  write_text(dir / "layout.json", nlohmann::json(rest_layout(scene)).dump(2) + "\n");
  write_text(dir / "scene.json", nlohmann::json(scene).dump(2) + "\n");
}

void gen_reference_sequence(const std::filesystem::path& dir, const SceneConfig& scene, int n, std::uint64_t seed) {
  write_sequence(dir, reference_walk(scene, n, seed), scene, seed);
}

}  // namespace finray
