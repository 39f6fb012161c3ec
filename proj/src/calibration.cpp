#include "finray/calibration.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "finray/error.hpp"
#include "finray/image_io.hpp"
#include "finray/polyfit.hpp"

namespace finray {

CircleFit fit_circle_kasa(std::span<const Pixel> pts) {
  if (pts.size() < 8) fail(Errc::DegenerateBoundary, "fewer than 8 boundary pixels");
  // Centre the data for conditioning, then solve u² + v² = a u + b v + c.
  double mu = 0.0, mv = 0.0;
  for (const auto& p : pts) {
    mu += p.u;
    mv += p.v;
  }
  mu /= pts.size();
  mv /= pts.size();
  Eigen::MatrixXd a(pts.size(), 3);
  Eigen::VectorXd b(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double x = pts[i].u - mu;
    const double y = pts[i].v - mv;
    a(i, 0) = x;
    a(i, 1) = y;
    a(i, 2) = 1.0;
    b(i) = x * x + y * y;
  }
  const Eigen::Vector3d s = a.colPivHouseholderQr().solve(b);
  const double cx = 0.5 * s(0);
  const double cy = 0.5 * s(1);
  const double r2 = s(2) + cx * cx + cy * cy;
  if (!(r2 > 0.0) || !std::isfinite(r2)) fail(Errc::DegenerateBoundary, "boundary pixels are collinear");
  CircleFit fit;
  fit.center = {cx + mu, cy + mv};
  fit.radius = std::sqrt(r2);
  const double du = pts[0].u - fit.center.u;
  const double dv = pts[0].v - fit.center.v;
  const double n = std::hypot(du, dv);
  fit.edge = n > 0 ? Pixel{fit.center.u + fit.radius * du / n, fit.center.v + fit.radius * dv / n}
                   : Pixel{fit.center.u + fit.radius, fit.center.v};
  return fit;
}

CircleFit fit_dark_circle(const Frame& live, const Frame& ref, double dark_threshold) {
  const GridRect all{0, 0, live.width, live.height};
  const auto field = normalized_diff(live, ref, all);
  std::vector<std::uint8_t> dark(field.value.size(), 0);
  for (std::size_t i = 0; i < dark.size(); ++i) dark[i] = field.valid[i] && field.value[i] >= dark_threshold;
  std::vector<int> labels;
  const auto comps = label_components(dark, live.width, live.height, labels);
  const Component* best = nullptr;
  for (const auto& c : comps) {
    if (!best || c.area > best->area) best = &c;
  }
  if (!best || best->area < 200) fail(Errc::NoDarkRegion, "no dark region of at least 200 px");

  std::vector<Pixel> boundary;
  for (int v = best->bbox.v_min; v <= best->bbox.v_max; ++v) {
    for (int u = best->bbox.u_min; u <= best->bbox.u_max; ++u) {
      const auto idx = static_cast<std::size_t>(v) * live.width + u;
      if (labels[idx] != best->label) continue;
      const int nu[4] = {u - 1, u + 1, u, u};
      const int nv[4] = {v, v, v - 1, v + 1};
      for (int n = 0; n < 4; ++n) {
        if (!live.contains(nu[n], nv[n])) continue;
        const auto ni = static_cast<std::size_t>(nv[n]) * live.width + nu[n];
        if (field.valid[ni] && !dark[ni]) {
          boundary.push_back({static_cast<double>(u), static_cast<double>(v)});
          break;
        }
      }
    }
  }
  CircleFit fit = fit_circle_kasa(boundary);
  double best_err = std::numeric_limits<double>::infinity();
  for (const auto& p : boundary) {
    const double dist = std::hypot(p.u - fit.center.u, p.v - fit.center.v);
    const double err = std::abs(dist - fit.radius);
    if (err < best_err && dist > 0.0) {
      best_err = err;
      fit.edge = {fit.center.u + fit.radius * (p.u - fit.center.u) / dist,
                  fit.center.v + fit.radius * (p.v - fit.center.v) / dist};
    }
  }
  return fit;
}

Point3 locate_ball_center(const CircleFit& fit, const CameraIntrinsics& k, const BallSpec& ball) {
  const Direction3 pn = backproject_ray(fit.edge, k);
  const Direction3 cn = backproject_ray(fit.center, k);
  const Direction3 cross{pn.dy * cn.dz - pn.dz * cn.dy, pn.dz * cn.dx - pn.dx * cn.dz, pn.dx * cn.dy - pn.dy * cn.dx};
  const double alpha = std::atan2(cross.norm(), dot(pn, cn));
  if (alpha < 1e-4) fail(Errc::DegenerateTangent, "edge ray is parallel to the centre ray");
  const double dist = ball.R / std::sin(alpha);
  return (dist / cn.norm()) * cn;
}

namespace {

// A usable calibration has samples down to (nearly) zero brightness difference.
constexpr double kZeroReach = 0.02;

// Every pixel inside the circle whose ray meets the ball, with the signed
// depth (negative where the ball surface lies behind the face).
std::vector<CalibSample> signed_samples(const Frame& live, const Frame& ref, const CircleFit& fit, const Point3& c,
                                        const BallSpec& ball, const SurfaceCloud& luf, const CameraIntrinsics& k,
                                        int& inside) {
  const int u_lo = std::max(0, static_cast<int>(std::floor(fit.center.u - fit.radius)));
  const int u_hi = std::min(live.width - 1, static_cast<int>(std::ceil(fit.center.u + fit.radius)));
  const int v_lo = std::max(0, static_cast<int>(std::floor(fit.center.v - fit.radius)));
  const int v_hi = std::min(live.height - 1, static_cast<int>(std::ceil(fit.center.v + fit.radius)));
  const GridRect box{u_lo, v_lo, std::max(0, u_hi - u_lo + 1), std::max(0, v_hi - v_lo + 1)};
  const auto field = normalized_diff(live, ref, box);

  std::vector<CalibSample> out;
  inside = 0;
  const double r2 = fit.radius * fit.radius;
  for (int v = v_lo; v <= v_hi; ++v) {
    for (int u = u_lo; u <= u_hi; ++u) {
      const double du = u - fit.center.u;
      const double dv = v - fit.center.v;
      if (du * du + dv * dv > r2) continue;
      if (!luf.valid_at(u, v) || !field.valid[box.index(u, v)]) continue;
      ++inside;
      const Pixel q{static_cast<double>(u), static_cast<double>(v)};
      const auto hit = ray_sphere_intersect(backproject_ray(q, k), c, ball.R);
      if (!hit) continue;
      out.push_back({field.value[box.index(u, v)], luf.at(u, v).z - hit->z, q});
    }
  }
  return out;
}

}  // namespace

std::vector<CalibSample> collect_samples(const Frame& live, const Frame& ref, const CircleFit& fit, const Point3& c,
                                         const BallSpec& ball, const SurfaceCloud& luf, const CameraIntrinsics& k) {
  int inside = 0;
  auto out = signed_samples(live, ref, fit, c, ball, luf, k, inside);
  std::erase_if(out, [](const CalibSample& s) { return s.d < 0.0; });
  if (out.size() < 50) fail(Errc::NoIntersections, std::to_string(out.size()) + " calibration samples");
  return out;
}

MappingFit fit_mapping(const std::vector<CalibSample>& samples, int degree) {
  if (static_cast<int>(samples.size()) < degree + 2) {
    fail(Errc::InsufficientSamples, "too few samples for the mapping degree");
  }
  std::vector<double> x, y;
  x.reserve(samples.size());
  y.reserve(samples.size());
  for (const auto& s : samples) {
    x.push_back(s.diff);
    y.push_back(s.d);
  }
  const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  if (*yhi - *ylo < 0.5) fail(Errc::InsufficientSamples, "samples span less than 0.5 mm of depth");

  for (int deg = degree; deg >= 1; --deg) {
    const auto fit = fit_polynomial(x, y, deg);
    if (fit.condition > 1e10) fail(Errc::IllConditioned, "mapping normal matrix is ill-conditioned");
    MappingFit out;
    out.mapping.coeffs = fit.poly.coeffs;
    out.mapping.domain_lo = *xlo;
    out.mapping.domain_hi = *xhi;
    out.residual_mm = fit.rms_residual;
    if (out.mapping.is_increasing()) return out;
  }
  fail(Errc::IllConditioned, "no increasing mapping fits the samples");
}

SelfCalibration self_calibrate(const Frame& live, const Frame& ref, const CircleFit& init, const CameraIntrinsics& k,
                               const BallSpec& ball, const SurfaceCloud& luf, int degree) {
  double dir_u = init.edge.u - init.center.u;
  double dir_v = init.edge.v - init.center.v;
  const double dn = std::hypot(dir_u, dir_v);
  if (dn > 0.0) {
    dir_u /= dn;
    dir_v /= dn;
  } else {
    dir_u = 1.0;
    dir_v = 0.0;
  }
  auto make = [&](double cu, double cv, double r) {
    return CircleFit{{cu, cv}, r, {cu + r * dir_u, cv + r * dir_v}};
  };

  SelfCalibration result;
  // |a0| plus the fit residual; |a0| alone has spurious zeros away from the
  // true ball, where the samples stop agreeing on one curve. A circle whose
  // ball sits too far away loses the samples near zero brightness difference
  // and leaves a0 as a wild extrapolation; such circles score above every
  // usable circle, graded so the search can walk out.
  auto evaluate = [&](const CircleFit& c, MappingFit& fit) {
    ++result.evaluations;
    try {
      const Point3 centre = locate_ball_center(c, k, ball);
      int inside = 0;
      auto samples = signed_samples(live, ref, c, centre, ball, luf, k, inside);
      if (samples.size() < 50) return 3e3;
      // Too few pixels in front of the face: grade by how far the 50th
      // deepest sample is behind it.
      std::nth_element(samples.begin(), samples.begin() + 49, samples.end(),
                       [](const CalibSample& a, const CalibSample& b) { return a.d > b.d; });
      const double d50 = samples[49].d;
      if (d50 < 0.0) return 2e3 - d50;
      std::erase_if(samples, [](const CalibSample& s) { return s.d < 0.0; });
      try {
        fit = fit_mapping(samples, degree);
      } catch (const Error&) {
        return 1.5e3 + 1.0 - static_cast<double>(samples.size()) / inside;
      }
      if (fit.mapping.domain_lo > kZeroReach) return 1e3 + fit.mapping.domain_lo;
      return std::abs(fit.mapping.coeffs[0]) + fit.residual_mm;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Offsets (cu, cv, r) from init. Half-pixel moves first; when no
  // neighbour improves the step is halved, down to 1/64 px.
  double cur[3] = {0.0, 0.0, 0.0};
  result.circle = init;
  double best = evaluate(init, result.fit);
  const double start = best;
  const MappingFit start_fit = result.fit;
  constexpr int kBudget = 200;
  double step = 0.5;
  while (result.evaluations < kBudget && step >= 1.0 / 64.0) {
    double best_move[3] = {0.0, 0.0, 0.0};
    bool moved = false;
    MappingFit best_fit;
    for (int axis = 0; axis < 3 && result.evaluations < kBudget; ++axis) {
      for (double dir : {-1.0, 1.0}) {
        if (result.evaluations >= kBudget) break;
        double cand[3] = {cur[0], cur[1], cur[2]};
        cand[axis] += dir * step;
        if (std::abs(cand[axis]) > 3.0 + 1e-12) continue;
        const double r = init.radius + cand[2];
        if (r <= 1.0) continue;
        MappingFit fit;
        const double score = evaluate(make(init.center.u + cand[0], init.center.v + cand[1], r), fit);
        if (score < best) {
          best = score;
          std::copy(cand, cand + 3, best_move);
          best_fit = fit;
          moved = true;
        }
      }
    }
    if (!moved) {
      step *= 0.5;
      continue;
    }
    std::copy(best_move, best_move + 3, cur);
    result.circle = make(init.center.u + cur[0], init.center.v + cur[1], init.radius + cur[2]);
    result.fit = best_fit;
  }
  // Never hand back a larger constant term than a usable starting circle had.
  if (start < 1e3 && std::abs(result.fit.mapping.coeffs[0]) > std::abs(start_fit.mapping.coeffs[0])) {
    result.circle = init;
    result.fit = start_fit;
    best = start;
  }
  result.improved = best < start;
  if (!(best < 1e3)) fail(Errc::NoIntersections, "no circle in the search window yields a mapping");
  return result;
}

CalibrationRun calibrate(const Frame& live, const Frame& ref, const CameraIntrinsics& k, const FingerConfig& finger,
                         const BallSpec& ball, const std::optional<CircleFit>& init, int degree) {
  if (live.width != ref.width || live.height != ref.height) fail(Errc::SizeMismatch, "live and reference differ in size");
  CalibrationRun run;
  run.initial = init ? *init : fit_dark_circle(live, ref);
  const auto edges = to_silhouette_boundary(repair_edge_dropouts(extract_silhouette_edges(binarize(live))));
  const auto incline = fit_incline_profile(edges, k, finger);
  const auto luf = to_locally_undeformed_face(smooth_view_face(reconstruct_view_face(edges, k, finger), incline),
                                              incline, finger);
  run.search = self_calibrate(live, ref, run.initial, k, ball, luf, degree);
  run.artifact.mapping = run.search.fit.mapping;
  run.artifact.ball_radius_mm = ball.R;
  run.artifact.circle = run.search.circle;
  run.artifact.residual_mm = run.search.fit.residual_mm;
  return run;
}

void to_json(nlohmann::json& j, const CalibrationArtifact& a) {
  j = nlohmann::json{{"coeffs", a.mapping.coeffs},
                     {"domain", {a.mapping.domain_lo, a.mapping.domain_hi}},
                     {"degree", a.mapping.degree()},
                     {"ball_radius_mm", a.ball_radius_mm},
                     {"circle", {{"cu", a.circle.center.u}, {"cv", a.circle.center.v}, {"r", a.circle.radius}}},
                     {"residual_mm", a.residual_mm}};
}

void from_json(const nlohmann::json& j, CalibrationArtifact& a) {
  a = CalibrationArtifact{};
  j.at("coeffs").get_to(a.mapping.coeffs);
  a.mapping.domain_lo = j.at("domain").at(0).get<double>();
  a.mapping.domain_hi = j.at("domain").at(1).get<double>();
  if (j.at("degree").get<int>() != a.mapping.degree()) fail(Errc::ParseError, "degree does not match coeffs");
  j.at("ball_radius_mm").get_to(a.ball_radius_mm);
  const auto& c = j.at("circle");
  a.circle.center = {c.at("cu").get<double>(), c.at("cv").get<double>()};
  a.circle.radius = c.at("r").get<double>();
  a.circle.edge = {a.circle.center.u + a.circle.radius, a.circle.center.v};
  j.at("residual_mm").get_to(a.residual_mm);
}

CalibrationArtifact load_calibration(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).get<CalibrationArtifact>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void save_calibration(const std::filesystem::path& path, const CalibrationArtifact& a) {
  write_text(path, nlohmann::json(a).dump(2) + "\n");
}

}  // namespace finray
