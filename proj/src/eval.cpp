#include "finray/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "finray/calibration.hpp"
#include "finray/contact.hpp"
#include "finray/error.hpp"
#include "finray/force_net.hpp"
#include "finray/image_io.hpp"
#include "finray/pipeline.hpp"
#include "finray/reference_store.hpp"
#include "finray/simulator.hpp"

namespace finray {

namespace fs = std::filesystem;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

struct Uniform {
  std::mt19937_64 rng;
  explicit Uniform(std::uint64_t seed) : rng(seed) {}
  double operator()(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
};

// Random bend inside the reference-walk ranges, optionally with presses,
// redrawn until the state is renderable.
FingerState random_state(const SceneConfig& scene, Uniform& u, const std::function<void(FingerState&)>& add = {}) {
  const WalkRanges r;
  for (;;) {
    FingerState st = bent_state(scene, u(r.tip_lo, r.tip_hi), u(r.s_lo, r.s_hi), u(r.px_lo, r.px_hi),
                                u(r.py_lo, r.py_hi));
    if (add) add(st);
    try {
      validate_state(st, scene);
      return st;
    } catch (const Error&) {
    }
  }
}

// Wraps an angle difference into (-90, 90].
double wrap180(double a) {
  a = std::fmod(a, 180.0);
  if (a <= -90.0) a += 180.0;
  if (a > 90.0) a -= 180.0;
  return a;
}

FrameResult process_one(const Frame& f, const PipelineContext& ctx) {
  std::vector<Frame> frames{f};
  auto results = run_pipeline(vector_source(frames), ctx);
  return std::move(results.front());
}

double rmse_view_face(const SurfaceCloud& est, const SurfaceCloud& gt, std::size_t& n) {
  double se = 0.0;
  n = 0;
  for (int v = gt.grid.v0; v < gt.grid.v0 + gt.grid.rows; ++v) {
    for (int u = gt.grid.u0; u < gt.grid.u0 + gt.grid.cols; ++u) {
      if (!gt.valid_at(u, v) || !est.valid_at(u, v)) continue;
      const double d = distance(est.at(u, v), gt.at(u, v));
      se += d * d;
      ++n;
    }
  }
  return n ? std::sqrt(se / n) : std::numeric_limits<double>::infinity();
}

double depth_at(const DepthMap& m, int u, int v) {
  if (!m.grid.contains(u, v)) return 0.0;
  const auto i = m.grid.index(u, v);
  return m.mask[i] ? m.depth[i] : 0.0;
}

// Shared simulator fixtures: reference store, calibration and contact
// threshold, written once under the work directory.
struct Fixture {
  SceneConfig scene;
  fs::path dir;
  std::uint64_t seed = 0;
  PipelineContext ctx;        // concurrent, disk-backed store
  PipelineContext ctx_single;  // same artifacts, one worker
  CalibrationRun calib;
  std::vector<double> idle_offsets;
};

Fixture build_fixture(const AcceptanceOptions& opt, std::ostream& log) {
  Fixture fx;
  fx.dir = opt.workdir;
  fx.seed = opt.seed;
  fs::create_directories(fx.dir);
  const auto& scene = fx.scene;

  log << "fixture: rendering " << opt.store_frames << " reference frames\n" << std::flush;
  const fs::path ref_dir = fx.dir / "reference";
  fs::remove_all(ref_dir);
  gen_reference_sequence(ref_dir, scene, opt.store_frames, opt.seed);
  const BlobMarkerDetector detector;
  const auto store = build_store(ref_dir, rest_layout(scene), detector);
  save_store(store, fx.dir / "store");

  log << "fixture: calibrating\n" << std::flush;
  FingerState pressed = rest_state(scene);
  pressed.presses.push_back({30.0, 0.0, 4.0, 2.5});
  const Frame ref = render(rest_state(scene), scene, frame_seed(opt.seed, 900001));
  const Frame live = render(pressed, scene, frame_seed(opt.seed, 900002));
  fx.calib = calibrate(live, ref, scene.camera, scene.finger, BallSpec{4.0});
  save_calibration(fx.dir / "calib.json", fx.calib.artifact);

  log << "fixture: contact threshold from unloaded frames\n" << std::flush;
  const MarkerLayout layout = rest_layout(scene);
  for (int i = 0; i < 200; ++i) {
    const Frame f = render(rest_state(scene), scene, frame_seed(opt.seed ^ 0x1d1eull, i));
    auto ms = estimate_occluded(index_markers(detector.detect(f), layout), layout);
    fx.idle_offsets.push_back(global_offset(ms, store.layout).norm());
  }
  const double eps = contact_epsilon(fx.idle_offsets);

  PipelineConfig cfg;
  cfg.store = "store";
  cfg.calibration = "calib.json";
  cfg.intrinsics_inline = scene.camera;
  cfg.finger_inline = scene.finger;
  cfg.width = scene.camera.width;
  cfg.epsilon = eps;
  cfg.workers = opt.workers;
  write_text(fx.dir / "pipeline.json", nlohmann::json(cfg).dump(2) + "\n");
  fx.ctx = load_context(load_pipeline_config(fx.dir / "pipeline.json"));
  fx.ctx_single = fx.ctx;
  fx.ctx_single.config.workers = 1;
  log << "fixture: epsilon " << fmt(eps, 4) << " px, store " << fx.ctx.store.size() << " frames\n" << std::flush;
  return fx;
}

CriterionResult crit_global(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 1;
  res.name = "global reconstruction accuracy";
  const auto& scene = fx.scene;
  Uniform u(fx.seed + 1);
  double worst = 0.0, pooled_se = 0.0;
  std::size_t pooled_n = 0;
  double loc_sum = 0.0;
  int loc_n = 0;
  for (int i = 0; i < 50; ++i) {
    const double s = u(10.0, 50.0), lat = u(-5.0, 5.0), depth = u(0.5, 2.0);
    const FingerState st = random_state(scene, u, [&](FingerState& x) { x.presses.push_back({s, lat, 5.0, depth}); });
    const Frame f = render(st, scene, frame_seed(fx.seed + 1, i));
    const auto gt = ground_truth(st, scene);
    const FrameResult r = process_one(f, fx.ctx_single);
    std::size_t n = 0;
    const double e = rmse_view_face(r.view_face, gt.view_face, n);
    worst = std::max(worst, e);
    pooled_se += e * e * n;
    pooled_n += n;
    if (r.depth.grid.size() > 0 && r.depth.contact_count() > 0 && gt.event.contact_point) {
      const auto cp = contact_point(r.contact_face, r.depth);
      if (cp) {
        loc_sum += distance(*cp, *gt.event.contact_point);
        ++loc_n;
      } else {
        loc_sum += 1e3;
        ++loc_n;
      }
    } else {
      loc_sum += 1e3;  // missed contact counts as a gross error
      ++loc_n;
    }
  }
  const double pooled = std::sqrt(pooled_se / std::max<std::size_t>(1, pooled_n));
  const double loc = loc_sum / std::max(1, loc_n);
  log << "  view-face rmse pooled " << fmt(pooled, 4) << " worst " << fmt(worst, 4) << " mm; contact MAE "
      << fmt(loc, 4) << " mm\n";
  res.pass = worst <= 0.5 && loc <= 1.0;
  res.measured = "worst state RMSE " + fmt(worst) + " mm (pooled " + fmt(pooled) + "), contact MAE " + fmt(loc) + " mm";
  res.threshold = "RMSE <= 0.5 mm per state, MAE <= 1.0 mm";
  return res;
}

CriterionResult crit_calibration(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 2;
  res.name = "calibration inversion";
  const auto& m = fx.calib.artifact.mapping;
  double worst = 0.0;
  for (int i = 0; i <= 180; ++i) {
    const double d = 0.2 + 0.01 * i;
    const double x = std::min(fx.scene.brightness_drop(d), m.domain_hi);
    worst = std::max(worst, std::abs(m(x) - d));
  }
  const double a0 = std::abs(m.coeffs.at(0));
  log << "  circle (" << fmt(fx.calib.artifact.circle.center.u, 2) << ", " << fmt(fx.calib.artifact.circle.center.v, 2)
      << ") r " << fmt(fx.calib.artifact.circle.radius, 3) << " after " << fx.calib.search.evaluations
      << " evaluations\n";
  res.pass = worst <= 0.1 && a0 <= 0.05;
  res.measured = "max |M(b(d))-d| " + fmt(worst, 4) + " mm, |a0| " + fmt(a0, 4) + " mm";
  res.threshold = "<= 0.1 mm, <= 0.05 mm";
  return res;
}

CriterionResult crit_depth(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 3;
  res.name = "local depth accuracy";
  const auto& scene = fx.scene;
  Uniform u(fx.seed + 3);
  double se = 0.0, worst = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 30; ++i) {
    const Press p{u(15.0, 45.0), u(-4.0, 4.0), u(3.0, 6.0), u(0.3, 2.0)};
    const FingerState st = random_state(scene, u, [&](FingerState& x) { x.presses.push_back(p); });
    const Frame f = render(st, scene, frame_seed(fx.seed + 3, i));
    const auto gt = ground_truth(st, scene);
    const FrameResult r = process_one(f, fx.ctx_single);
    double se_i = 0.0;
    std::size_t n_i = 0;
    for (std::size_t k = 0; k < gt.depth.mask.size(); ++k) {
      if (!gt.depth.mask[k]) continue;
      const int pu = gt.depth.grid.u0 + static_cast<int>(k % gt.depth.grid.cols);
      const int pv = gt.depth.grid.v0 + static_cast<int>(k / gt.depth.grid.cols);
      const double e = depth_at(r.depth, pu, pv) - gt.depth.depth[k];
      se_i += e * e;
      ++n_i;
    }
    se += se_i;
    n += n_i;
    if (n_i) worst = std::max(worst, std::sqrt(se_i / n_i));
  }
  const double rmse = std::sqrt(se / std::max<std::size_t>(1, n));
  log << "  depth rmse " << fmt(rmse, 4) << " mm over " << n << " px, worst state " << fmt(worst, 4) << "\n";
  res.pass = rmse <= 0.1;
  res.measured = "RMSE " + fmt(rmse, 4) + " mm over " + std::to_string(n) + " contact px (worst state " + fmt(worst) + ")";
  res.threshold = "<= 0.1 mm";
  return res;
}

CriterionResult crit_retrieval(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 4;
  res.name = "reference retrieval quality";
  const auto& scene = fx.scene;
  const auto states = press_release_states(scene, 1050);
  std::size_t next = 0;
  const std::uint64_t seed = fx.seed + 4;
  FrameSource source = [&]() -> std::optional<Frame> {
    if (next >= states.size()) return std::nullopt;
    Frame f = render(states[next], scene, frame_seed(seed, static_cast<std::int64_t>(next)));
    f.frame_id = static_cast<std::int64_t>(next);
    ++next;
    return f;
  };
  const MarkerSet single = fx.ctx.store.entries.front().markers;
  int dyn_ok = 0, base_ok = 0, total = 0;
  run_pipeline(source, fx.ctx, [&](FrameResult&& r) {
    ++total;
    if (!r.reference || r.markers.size() == 0) return;
    const double per = static_cast<double>(r.markers.size());
    if (r.reference->distance / per < 40.0) ++dyn_ok;
    if (marker_distance(r.markers, single) / per < 40.0) ++base_ok;
  });
  const double dyn = 100.0 * dyn_ok / std::max(1, total);
  const double base = 100.0 * base_ok / std::max(1, total);
  log << "  dynamic " << fmt(dyn, 1) << "%, single reference " << fmt(base, 1) << "% of " << total << " frames\n";
  res.pass = total == 1050 && dyn >= 91.0 && base <= 60.0;
  res.measured = "dynamic " + fmt(dyn, 1) + "%, single " + fmt(base, 1) + "%";
  res.threshold = "dynamic >= 91%, single <= 60%";
  return res;
}

CriterionResult crit_direction(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 5;
  res.name = "direction classification";
  const auto& scene = fx.scene;
  Uniform u(fx.seed + 5);
  int correct = 0, total = 0;
  for (int region = 0; region < 8; ++region) {
    for (int k = 0; k < 20; ++k) {
      FingerState st;
      for (;;) {
        // Directions keep a 15° margin from the sector boundaries.
        const double phi = (45.0 * region + u(-15.0, 15.0)) * kDegToRad;
        st = push_state(scene, phi, u(25.0, 55.0), u(4.0, 10.0));
        try {
          validate_state(st, scene);
          break;
        } catch (const Error&) {
        }
      }
      const Frame f = render(st, scene, frame_seed(fx.seed + 5, region * 20 + k));
      const FrameResult r = process_one(f, fx.ctx_single);
      ++total;
      if (r.event.detected && r.event.region == region) ++correct;
    }
  }
  const double acc = 100.0 * correct / total;
  log << "  " << correct << "/" << total << " regions correct\n";
  res.pass = acc >= 98.0;
  res.measured = "accuracy " + fmt(acc, 2) + "% (" + std::to_string(correct) + "/" + std::to_string(total) + ")";
  res.threshold = ">= 98%";
  return res;
}

CriterionResult crit_force(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 6;
  res.name = "force regression";
  const auto data = gen_force_dataset(fx.scene, 484, fx.seed + 6);
  save_force_dataset(fx.dir / "force.jsonl", data);
  TrainOptions opt;
  opt.seed = fx.seed + 6;
  const auto rep = train_force(data, opt);
  save_force_net(fx.dir / "force_net.json", rep.net);
  log << "  " << rep.train_count << " train / " << rep.test_count << " test rows, " << rep.epochs
      << " epochs; train MAE " << fmt(rep.train_mae[0]) << " / " << fmt(rep.train_mae[1]) << " N\n";
  res.pass = rep.test_mae[0] <= 0.5 && rep.test_mae[1] <= 0.4;
  res.measured = "test MAE x " + fmt(rep.test_mae[0]) + " N, y " + fmt(rep.test_mae[1]) + " N";
  res.threshold = "x <= 0.5 N, y <= 0.4 N";
  return res;
}

CriterionResult crit_pose(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 7;
  res.name = "pose estimation";
  const auto& scene = fx.scene;
  double sum = 0.0, worst = 0.0;
  int n = 0, failed = 0;
  for (int i = 0; i <= 40; ++i) {
    const double angle = -100.0 + 5.0 * i;
    const FingerState st = line_press_state(scene, angle);
    const Frame f = render(st, scene, frame_seed(fx.seed + 7, i));
    const FrameResult r = process_one(f, fx.ctx_single);
    double err = 90.0;
    try {
      err = std::abs(wrap180(estimate_pose(r.contact_face, r.depth) - angle));
    } catch (const Error&) {
      ++failed;
    }
    sum += err;
    worst = std::max(worst, err);
    ++n;
  }
  const double mae = sum / n;
  log << "  pose MAE " << fmt(mae, 4) << " deg, worst " << fmt(worst, 3) << ", failures " << failed << "\n";
  res.pass = mae <= 1.0;
  res.measured = "MAE " + fmt(mae, 3) + " deg over 41 angles (worst " + fmt(worst, 2) + ")";
  res.threshold = "<= 1.0 deg";
  return res;
}

fs::path bench_sequence(Fixture& fx) {
  const fs::path dir = fx.dir / "bench";
  if (!fs::exists(dir / "manifest.json")) {
    write_sequence(dir, press_release_states(fx.scene, 300), fx.scene, fx.seed + 8);
  }
  return dir;
}

CriterionResult crit_performance(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 8;
  res.name = "pipeline performance";
  const fs::path dir = bench_sequence(fx);
  const auto rep = bench_pipeline(sequence_source(dir), fx.ctx);
  print_bench_table(log, rep);
  res.pass = rep.frames == 300 && rep.wall_ms_per_frame <= 33.0;
  res.measured = fmt(rep.wall_ms_per_frame, 2) + " ms/frame (preprocess " + fmt(rep.mean.preprocess_ms, 2) +
                 ", tracking+global " + fmt(std::max(rep.mean.tracking_ms, rep.mean.global_ms), 2) + ", local " +
                 fmt(rep.mean.local_ms, 2) + ")";
  res.threshold = "<= 33 ms/frame at 960x540 over 300 frames";
  return res;
}

bool same_files(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::directory_iterator(a)) fa.push_back(e.path().filename());
  for (const auto& e : fs::directory_iterator(b)) fb.push_back(e.path().filename());
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& name : fa) {
    if (read_text(a / name) != read_text(b / name)) return false;
  }
  return true;
}

CriterionResult crit_determinism(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 9;
  res.name = "determinism and concurrency soundness";
  const fs::path dir = bench_sequence(fx);
  PipelineContext conc = fx.ctx;
  conc.config.workers = 2;
  std::vector<std::string> a, b;
  run_pipeline(sequence_source(dir), conc, [&](FrameResult&& r) { a.push_back(serialize(r)); });
  run_pipeline(sequence_source(dir), fx.ctx_single, [&](FrameResult&& r) { b.push_back(serialize(r)); });
  const bool pipeline_same = a.size() == 300 && a == b;

  // Seeded generators.
  const auto& scene = fx.scene;
  const FingerState st = bent_state(scene, -5.0, 1.0, 4.0, -2.0);
  const bool render_same = render(st, scene, 99) == render(st, scene, 99);
  const bool walk_same =
      nlohmann::json(reference_walk(scene, 200, 5)).dump() == nlohmann::json(reference_walk(scene, 200, 5)).dump();
  const auto d1 = gen_force_dataset(scene, 300, 11);
  const auto d2 = gen_force_dataset(scene, 300, 11);
  const bool data_same = nlohmann::json(d1).dump() == nlohmann::json(d2).dump();
  TrainOptions topt;
  topt.seed = 3;
  topt.max_epochs = 40;
  const bool net_same =
      nlohmann::json(train_force(d1, topt).net).dump() == nlohmann::json(train_force(d2, topt).net).dump();
  const auto states = press_release_states(scene, 4);
  fs::remove_all(fx.dir / "det_a");
  fs::remove_all(fx.dir / "det_b");
  write_sequence(fx.dir / "det_a", states, scene, 21);
  write_sequence(fx.dir / "det_b", states, scene, 21);
  const bool seq_same = same_files(fx.dir / "det_a", fx.dir / "det_b");

  log << "  pipeline " << pipeline_same << " render " << render_same << " walk " << walk_same << " dataset "
      << data_same << " net " << net_same << " sequence " << seq_same << "\n";
  res.pass = pipeline_same && render_same && walk_same && data_same && net_same && seq_same;
  int same = pipeline_same + render_same + walk_same + data_same + net_same + seq_same;
  res.measured = std::to_string(same) + "/6 identical (concurrent vs sequential over " + std::to_string(a.size()) +
                 " frames: " + (pipeline_same ? "identical" : "differs") + ")";
  res.threshold = "6/6 byte-identical";
  return res;
}

struct Property {
  std::string name;
  double worst = 0.0;
  double tol = 0.0;
  bool ok() const { return worst <= tol; }
};

CriterionResult crit_properties(Fixture& fx, std::ostream& log) {
  CriterionResult res;
  res.id = 10;
  res.name = "property suites";
  const auto& scene = fx.scene;
  const auto& k = scene.camera;
  Uniform u(fx.seed + 10);
  std::vector<Property> props;

  {
    Property p{"width conservation", 0.0, 1e-6};
    for (int i = 0; i < 10; ++i) {
      const Frame f = render(random_state(scene, u), scene, frame_seed(fx.seed + 10, i));
      const auto e = to_silhouette_boundary(repair_edge_dropouts(extract_silhouette_edges(binarize(f))));
      for (std::size_t c = 0; c < e.size(); ++c) {
        const double z = solve_edge_depth(e.upper[c], e.lower[c], k, scene.finger.W);
        const Point3 a = z * backproject_ray(e.upper[c], k);
        const Point3 b = z * backproject_ray(e.lower[c], k);
        p.worst = std::max(p.worst, std::abs(distance(a, b) - scene.finger.W));
      }
    }
    props.push_back(p);
  }
  {
    Property p{"projection round trip", 0.0, 1e-9};
    for (int i = 0; i < 2000; ++i) {
      const Point3 x{u(-40, 40), u(-25, 25), u(20, 120)};
      const Point3 y = x.z * backproject_ray(project(x, k), k);
      p.worst = std::max(p.worst, distance(x, y));
    }
    props.push_back(p);
  }
  {
    Property p{"ray-sphere residual", 0.0, 1e-9};
    for (int i = 0; i < 2000; ++i) {
      const Point3 c{u(-10, 10), u(-10, 10), u(30, 90)};
      const double r = u(1, 8);
      const Point3 target{c.x + u(-0.9, 0.9) * r, c.y + u(-0.9, 0.9) * r, c.z};
      const Direction3 dir{target.x / target.z, target.y / target.z, 1.0};
      const auto hit = ray_sphere_intersect(dir, c, r);
      if (!hit) continue;
      p.worst = std::max(p.worst, std::abs(distance(*hit, c) - r));
    }
    props.push_back(p);
  }
  {
    Property p{"ball centre tangent consistency", 0.0, 1e-9};
    for (int i = 0; i < 500; ++i) {
      const double cu = u(300, 660), cv = u(150, 390), rad = u(10, 60), ang = u(-3.1, 3.1);
      const CircleFit fit{{cu, cv}, rad, {cu + rad * std::cos(ang), cv + rad * std::sin(ang)}};
      const BallSpec ball{u(2, 6)};
      const Point3 c = locate_ball_center(fit, k, ball);
      // Distance from the centre to the tangent ray equals R; the centre is on
      // the central ray.
      const Direction3 t = backproject_ray(fit.edge, k).normalized();
      const double along = c.x * t.dx + c.y * t.dy + c.z * t.dz;
      const Point3 foot = along * t;
      p.worst = std::max(p.worst, std::abs(distance(c, foot) - ball.R));
      const Pixel back = project(c, k);
      p.worst = std::max(p.worst, std::hypot(back.u - cu, back.v - cv) * 1e-3);
    }
    props.push_back(p);
  }
  {
    Property p{"mapping monotonicity", 0.0, 0.0};
    if (!fx.calib.artifact.mapping.is_increasing(1000)) p.worst = 1.0;
    for (int i = 0; i < 20; ++i) {
      std::vector<CalibSample> s;
      const double scale = u(0.8, 2.0);
      for (int j = 0; j < 400; ++j) {
        const double d = u(0.0, 2.5);
        s.push_back({std::min(0.9, 1.0 - std::exp(-d / scale)) + 0.01 * u(-1, 1), d, {}});
      }
      try {
        if (!fit_mapping(s).mapping.is_increasing(1000)) p.worst = 1.0;
      } catch (const Error&) {
        p.worst = 1.0;
      }
    }
    props.push_back(p);
  }
  {
    Property p{"face argmax scaling invariance", 0.0, 1e-12};
    for (int i = 0; i < 1000; ++i) {
      const Offset2 o{u(-50, 50), u(-50, 50)};
      if (o.norm() < 1e-6) continue;
      const auto base = classify_direction(o, scene.finger);
      for (double s : {1e-3, 0.5, 7.0, 1e4}) {
        const auto c = classify_direction({o.u * s, o.v * s}, scene.finger);
        if (c.face != base.face) p.worst = 1.0;
        p.worst = std::max(p.worst, std::hypot(c.o.dx - base.o.dx, c.o.dy - base.o.dy));
      }
    }
    props.push_back(p);
  }
  {
    Property p{"pose rotation equivariance", 0.0, 1e-6};
    for (int i = 0; i < 200; ++i) {
      std::vector<Point3> pts;
      const double a = u(-89, 89) * kDegToRad;
      for (int j = 0; j < 60; ++j) {
        const double t = u(-8, 8), w = u(-1, 1);
        pts.push_back({t * std::cos(a) - w * std::sin(a) + 3.0, t * std::sin(a) + w * std::cos(a) - 2.0, 55.0});
      }
      const double delta = u(-60, 60);
      std::vector<Point3> rot;
      const double c = std::cos(delta * kDegToRad), sn = std::sin(delta * kDegToRad);
      for (const auto& q : pts) rot.push_back({c * q.x - sn * q.y, sn * q.x + c * q.y, q.z});
      p.worst = std::max(p.worst, std::abs(wrap180(estimate_pose(rot) - estimate_pose(pts) - delta)));
    }
    props.push_back(p);
  }

  int ok = 0;
  std::string failed;
  for (const auto& p : props) {
    log << "  " << p.name << ": worst " << std::scientific << std::setprecision(2) << p.worst << " (tol " << p.tol
        << ")" << std::defaultfloat << (p.ok() ? "" : "  FAIL") << "\n";
    if (p.ok()) ++ok;
    else failed += (failed.empty() ? "" : ", ") + p.name;
  }
  res.pass = ok == static_cast<int>(props.size());
  res.measured = std::to_string(ok) + "/" + std::to_string(props.size()) + " properties hold" +
                 (failed.empty() ? "" : " (failed: " + failed + ")");
  res.threshold = "all hold at their tolerances";
  return res;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, std::ostream& log) {
  using Clock = std::chrono::steady_clock;
  Fixture fx = build_fixture(opt, log);
  using Fn = CriterionResult (*)(Fixture&, std::ostream&);
  const Fn all[] = {crit_global, crit_calibration, crit_depth,       crit_retrieval, crit_direction,
                    crit_force,  crit_pose,        crit_performance, crit_determinism, crit_properties};
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 10; ++id) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
    log << "criterion " << id << "\n" << std::flush;
    const auto t0 = Clock::now();
    CriterionResult r;
    try {
      r = all[id - 1](fx, log);
    } catch (const std::exception& e) {
      r.id = id;
      r.name = "criterion " + std::to_string(id);
      r.pass = false;
      r.measured = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

void print_report(std::ostream& os, const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    os << (r.pass ? "PASS" : "FAIL") << "  " << r.id << ". " << r.name << ": " << r.measured << " | threshold "
       << r.threshold << " (" << fmt(r.seconds, 1) << " s)\n";
  }
}

}  // namespace finray
