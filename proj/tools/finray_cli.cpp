// Command-line front end. Errors print one line on stderr:
//   error code=<Errc> exit=<n> message=<text>
// Exit codes: 0 ok, 1 acceptance failures, 2 configuration, 3 data.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "finray/calibration.hpp"
#include "finray/error.hpp"
#include "finray/eval.hpp"
#include "finray/force_net.hpp"
#include "finray/image_io.hpp"
#include "finray/pipeline.hpp"
#include "finray/reference_store.hpp"
#include "finray/simulator.hpp"

namespace fs = std::filesystem;
using namespace finray;

namespace {

template <class T>
T load_json_file(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).get<T>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(Errc::ConfigError, path.string() + ": " + e.what());
  }
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int report(Errc code, const std::string& msg) {
  const int exit_code = is_config_error(code) ? 2 : 3;
  std::cerr << "error code=" << to_string(code) << " exit=" << exit_code << " message=" << one_line(msg) << "\n";
  return exit_code;
}

struct SimulateArgs {
  fs::path scene, out;
  int frames = 300;
  std::uint64_t seed = 1;
  bool reference_only = false;
  int force_samples = 0;
};

void cmd_simulate(const SimulateArgs& a) {
  SceneConfig scene;
  if (!a.scene.empty()) scene = load_json_file<SceneConfig>(a.scene);
  scene.validate();
  if (a.frames < 1) fail(Errc::ConfigError, "--frames must be positive");
  if (a.reference_only) {
    gen_reference_sequence(a.out, scene, a.frames, a.seed);
  } else {
    write_sequence(a.out, press_release_states(scene, a.frames), scene, a.seed);
  }
  // Ball press for `calibrate`: R 4 mm, 2.5 mm deep, 30 mm from the root.
  FingerState press = rest_state(scene);
  press.presses.push_back({30.0, 0.0, 4.0, 2.5});
  write_frame(a.out / "calibration_live.pgm", render(press, scene, frame_seed(a.seed, -1)));
  if (a.force_samples > 0) {
    save_force_dataset(a.out / "force.jsonl", gen_force_dataset(scene, a.force_samples, a.seed));
  }
  std::cout << "wrote " << a.frames << " frames to " << a.out.string() << "\n";
}

void cmd_build_reference(const fs::path& in, const fs::path& layout_path, const fs::path& out) {
  const auto layout = load_json_file<MarkerLayout>(layout_path);
  const BlobMarkerDetector detector;
  const auto store = build_store(in, layout, detector);
  save_store(store, out);
  std::cout << "reference store: " << store.size() << " frames -> " << out.string() << "\n";
}

struct CalibrateArgs {
  fs::path live, store, out, intrinsics, finger;
  double ball_radius = 4.0;
  std::vector<double> init_circle;
};

void cmd_calibrate(const CalibrateArgs& a) {
  const Frame live = read_frame(a.live);
  const ReferenceStore store = load_store(a.store);
  if (store.size() == 0) fail(Errc::EmptyStore, "reference store is empty");
  const CameraIntrinsics k =
      a.intrinsics.empty() ? CameraIntrinsics::sensor_default(live.width) : load_json_file<CameraIntrinsics>(a.intrinsics);
  const FingerConfig finger = a.finger.empty() ? FingerConfig{} : load_json_file<FingerConfig>(a.finger);

  // The reference is the stored frame whose markers match the live frame.
  const BlobMarkerDetector detector;
  const MarkerSet ms = estimate_occluded(index_markers(detector.detect(live), store.layout), store.layout);
  const Retrieval r = retrieve(store, ms);
  const Frame ref = store.frame(r.index);

  std::optional<CircleFit> init;
  if (!a.init_circle.empty()) {
    if (a.init_circle.size() != 3 || !(a.init_circle[2] > 0.0)) fail(Errc::ConfigError, "--init-circle expects cu,cv,r");
    CircleFit c;
    c.center = {a.init_circle[0], a.init_circle[1]};
    c.radius = a.init_circle[2];
    c.edge = {c.center.u, c.center.v - c.radius};
    init = c;
  }
  const auto run = calibrate(live, ref, k, finger, BallSpec{a.ball_radius}, init);
  save_calibration(a.out, run.artifact);
  std::cout << "reference frame " << r.frame_id << ", circle (" << run.artifact.circle.center.u << ", "
            << run.artifact.circle.center.v << ") r " << run.artifact.circle.radius << ", a0 "
            << run.artifact.mapping.coeffs.at(0) << " mm -> " << a.out.string() << "\n";
}

PipelineContext context_from(const fs::path& config) { return load_context(load_pipeline_config(config)); }

void cmd_reconstruct(const fs::path& in, const fs::path& config, const fs::path& out) {
  const auto ctx = context_from(config);
  const auto results = run_pipeline(sequence_source(in), ctx);
  write_results(out, results, ctx.camera.width, ctx.camera.height);
  int failed = 0;
  for (const auto& r : results) failed += !r.ok();
  std::cout << results.size() << " frames reconstructed (" << failed << " degraded) -> " << out.string() << "\n";
}

void cmd_detect(const fs::path& in, const fs::path& config, const fs::path& out) {
  const auto ctx = context_from(config);
  std::ostringstream lines;
  int contacts = 0, n = 0;
  run_pipeline(sequence_source(in), ctx, [&](FrameResult&& r) {
    nlohmann::json j = r.event;
    j["frame_id"] = r.frame_id;
    if (!r.ok()) j["error"] = r.error;
    lines << j.dump() << "\n";
    contacts += r.event.detected;
    ++n;
  });
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, lines.str());
  std::cout << n << " frames, " << contacts << " with contact -> " << out.string() << "\n";
}

void cmd_train_force(const fs::path& dataset, const fs::path& out, std::uint64_t seed) {
  TrainOptions opt;
  opt.seed = seed;
  const auto rep = train_force(load_force_dataset(dataset), opt);
  save_force_net(out, rep.net);
  std::printf("epochs %d, train MAE %.3f / %.3f N, test MAE %.3f / %.3f N -> %s\n", rep.epochs, rep.train_mae[0],
              rep.train_mae[1], rep.test_mae[0], rep.test_mae[1], out.string().c_str());
}

int cmd_eval(const std::string& suite, const AcceptanceOptions& opt) {
  if (suite != "acceptance") fail(Errc::ConfigError, "unknown suite '" + suite + "'");
  const auto results = run_acceptance(opt, std::cerr);
  print_report(std::cout, results);
  for (const auto& r : results) {
    if (!r.pass) return 1;
  }
  return 0;
}

void cmd_bench(const fs::path& in, const fs::path& config) {
  print_bench_table(std::cout, bench_pipeline(sequence_source(in), context_from(config)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fin-ray finger vision: simulation, reconstruction and contact sensing"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Render a synthetic frame sequence");
  simulate->add_option("--scene", sim.scene, "Scene JSON (defaults when omitted)");
  simulate->add_option("--frames", sim.frames, "Number of frames");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Noise and walk seed");
  simulate->add_flag("--reference-only", sim.reference_only, "Contact-free reference walk instead of press/release");
  simulate->add_option("--force-samples", sim.force_samples, "Also write a force dataset with this many rows");

  fs::path in, out, layout, config, store;
  auto* build_ref = app.add_subcommand("build-reference", "Build a reference store from a sequence");
  build_ref->add_option("--in", in)->required();
  build_ref->add_option("--layout", layout)->required();
  build_ref->add_option("--out", out)->required();

  CalibrateArgs cal;
  auto* calib = app.add_subcommand("calibrate", "Fit the brightness-to-depth mapping from a ball press");
  calib->add_option("--live", cal.live)->required();
  calib->add_option("--store", cal.store)->required();
  calib->add_option("--ball-radius", cal.ball_radius, "mm")->required();
  calib->add_option("--out", cal.out)->required();
  calib->add_option("--init-circle", cal.init_circle, "cu,cv,r in pixels")->delimiter(',')->expected(3);
  calib->add_option("--intrinsics", cal.intrinsics, "Camera intrinsics JSON");
  calib->add_option("--finger", cal.finger, "Finger config JSON");

  auto* recon = app.add_subcommand("reconstruct", "Run the pipeline and write clouds, depth maps and events");
  recon->add_option("--in", in)->required();
  recon->add_option("--config", config)->required();
  recon->add_option("--out", out)->required();

  auto* detect = app.add_subcommand("detect", "Run the pipeline and write contact events");
  detect->add_option("--in", in)->required();
  detect->add_option("--config", config)->required();
  detect->add_option("--out", out)->required();

  fs::path dataset;
  std::uint64_t seed = 7;
  auto* train = app.add_subcommand("train-force", "Train the force regressor");
  train->add_option("--dataset", dataset)->required();
  train->add_option("--out", out)->required();
  train->add_option("--seed", seed);

  std::string suite = "acceptance";
  AcceptanceOptions acc;
  auto* eval = app.add_subcommand("eval", "Run the acceptance battery");
  eval->add_option("--suite", suite);
  eval->add_option("--workdir", acc.workdir)->required();
  eval->add_option("--seed", acc.seed);
  eval->add_option("--only", acc.only, "Criterion ids to run")->delimiter(',');
  eval->add_option("--store-frames", acc.store_frames, "Reference walk length");

  auto* bench = app.add_subcommand("bench", "Per-stage timing table");
  bench->add_option("--in", in)->required();
  bench->add_option("--config", config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report(Errc::ConfigError, e.what());
  }

  try {
    if (*simulate) cmd_simulate(sim);
    if (*build_ref) cmd_build_reference(in, layout, out);
    if (*calib) cmd_calibrate(cal);
    if (*recon) cmd_reconstruct(in, config, out);
    if (*detect) cmd_detect(in, config, out);
    if (*train) cmd_train_force(dataset, out, seed);
    if (*eval) return cmd_eval(suite, acc);
    if (*bench) cmd_bench(in, config);
  } catch (const Error& e) {
    return report(e.code(), e.what());
  } catch (const std::exception& e) {
    return report(Errc::IoError, e.what());
  }
  return 0;
}
