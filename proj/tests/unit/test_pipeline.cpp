#include <gtest/gtest.h>

#include <filesystem>

#include "finray/contact.hpp"
#include "finray/error.hpp"
#include "finray/image_io.hpp"
#include "finray/pipeline.hpp"
#include "finray/simulator.hpp"

using namespace finray;
namespace fs = std::filesystem;

namespace {

struct Env {
  SceneConfig scene;
  fs::path dir;
  PipelineContext ctx;
};

const Env& env() {
  static const Env e = [] {
    Env e;
    e.dir = fs::temp_directory_path() / "finray_pipeline_test";
    fs::remove_all(e.dir);
    fs::create_directories(e.dir);
    gen_reference_sequence(e.dir / "reference", e.scene, 150, 3);
    save_store(build_store(e.dir / "reference", rest_layout(e.scene), BlobMarkerDetector{}), e.dir / "store");
    FingerState pressed = rest_state(e.scene);
    pressed.presses.push_back({30.0, 0.0, 4.0, 2.5});
    const auto run = calibrate(render(pressed, e.scene, 11), render(rest_state(e.scene), e.scene, 12), e.scene.camera,
                               e.scene.finger, BallSpec{4.0});
    save_calibration(e.dir / "calib.json", run.artifact);
    PipelineConfig cfg;
    cfg.store = "store";
    cfg.calibration = "calib.json";
    cfg.intrinsics_inline = e.scene.camera;
    cfg.finger_inline = e.scene.finger;
    cfg.epsilon = 0.6;
    write_text(e.dir / "pipeline.json", nlohmann::json(cfg).dump(2));
    e.ctx = load_context(load_pipeline_config(e.dir / "pipeline.json"));
    return e;
  }();
  return e;
}

std::vector<Frame> short_sequence(int n) {
  const auto& e = env();
  const auto states = press_release_states(e.scene, n);
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) {
    frames.push_back(render(states[i], e.scene, frame_seed(5, i)));
    frames.back().frame_id = i;
  }
  return frames;
}

}  // namespace

TEST(Pipeline, ConcurrentMatchesSequential) {
  const auto frames = short_sequence(40);
  PipelineContext seq = env().ctx, par = env().ctx;
  seq.config.workers = 1;
  par.config.workers = 2;
  const auto a = run_pipeline(vector_source(frames), seq);
  const auto b = run_pipeline(vector_source(frames), par);
  ASSERT_EQ(a.size(), frames.size());
  ASSERT_EQ(b.size(), frames.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].frame_id, static_cast<std::int64_t>(i));
    EXPECT_EQ(serialize(a[i]), serialize(b[i])) << "frame " << i;
  }
}

TEST(Pipeline, PressDetectedAndReconstructed) {
  const auto& e = env();
  // Detection follows the marker offset, so the finger has to bend too.
  FingerState st = bent_state(e.scene, -5.0);
  st.presses.push_back({30.0, 2.0, 5.0, 1.5});
  Frame f = render(st, e.scene, 77);
  const auto r = run_pipeline(vector_source({f}), e.ctx);
  ASSERT_EQ(r.size(), 1u);
  ASSERT_TRUE(r[0].ok()) << r[0].error;
  EXPECT_TRUE(r[0].event.detected);
  EXPECT_GT(r[0].depth.contact_count(), 50u);
  ASSERT_TRUE(r[0].event.contact_point);
  const auto gt = ground_truth(st, e.scene);
  EXPECT_LT(distance(*r[0].event.contact_point, *gt.event.contact_point), 1.0);
}

TEST(Pipeline, RestFrameHasNoContact) {
  const auto& e = env();
  const auto r = run_pipeline(vector_source({render(rest_state(e.scene), e.scene, 78)}), e.ctx);
  ASSERT_TRUE(r[0].ok()) << r[0].error;
  EXPECT_FALSE(r[0].event.detected);
  EXPECT_EQ(r[0].depth.contact_count(), 0u);
}

TEST(Pipeline, DegradedFramesCarryErrorsAndStreamContinues) {
  const auto& e = env();
  std::vector<Frame> frames = short_sequence(3);
  Frame black(e.scene.camera.width, e.scene.camera.height);
  black.frame_id = 3;
  Frame missing;
  missing.frame_id = 4;
  Frame good = render(rest_state(e.scene), e.scene, 79);
  good.frame_id = 5;
  frames.push_back(black);
  frames.push_back(missing);
  frames.push_back(good);
  for (int workers : {1, 2}) {
    PipelineContext ctx = e.ctx;
    ctx.config.workers = workers;
    const auto r = run_pipeline(vector_source(frames), ctx);
    ASSERT_EQ(r.size(), 6u);
    EXPECT_FALSE(r[3].ok());
    EXPECT_FALSE(r[4].ok());
    EXPECT_NE(r[4].error.find("IoError"), std::string::npos);
    EXPECT_TRUE(r[5].ok()) << r[5].error;
    EXPECT_FALSE(r[3].event.detected);
  }
}

TEST(Pipeline, SequenceSourceRoundTrip) {
  const auto& e = env();
  const fs::path dir = e.dir / "seq";
  fs::remove_all(dir);
  write_sequence(dir, press_release_states(e.scene, 12), e.scene, 5);
  std::int64_t prev = -1;
  run_pipeline(sequence_source(dir), e.ctx, [&](FrameResult&& r) {
    EXPECT_GT(r.frame_id, prev);
    prev = r.frame_id;
  });
  EXPECT_EQ(prev, 11);
}

TEST(Pipeline, WriteResultsLayout) {
  const auto& e = env();
  const auto results = run_pipeline(vector_source(short_sequence(4)), e.ctx);
  const fs::path out = e.dir / "out";
  fs::remove_all(out);
  write_results(out, results, e.ctx.camera.width, e.ctx.camera.height);
  EXPECT_TRUE(fs::exists(out / "events.jsonl"));
  int lines = 0;
  for (char c : read_text(out / "events.jsonl")) lines += c == '\n';
  EXPECT_EQ(lines, 4);
}

TEST(Pipeline, SerializeIsDeterministic) {
  const auto frames = short_sequence(5);
  const auto a = run_pipeline(vector_source(frames), env().ctx);
  const auto b = run_pipeline(vector_source(frames), env().ctx);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(serialize(a[i]), serialize(b[i]));
  EXPECT_EQ(serialize(a[0]).find("timings"), std::string::npos);
  EXPECT_NE(serialize(a[0], true).find("timings"), std::string::npos);
}

TEST(PipelineConfig, ParseDefaultsAndValidation) {
  const auto c = parse_pipeline_config(nlohmann::json{{"store", "s"}, {"calibration", "c.json"}}, "/base");
  EXPECT_EQ(c.store, fs::path("/base/s"));
  EXPECT_EQ(c.workers, 2);
  auto bad = [](nlohmann::json j) {
    j["store"] = "s";
    j["calibration"] = "c";
    try {
      parse_pipeline_config(j);
    } catch (const Error& e) {
      return e.code() == Errc::ConfigError;
    }
    return false;
  };
  EXPECT_TRUE(bad({{"epsilon", -1.0}}));
  EXPECT_TRUE(bad({{"workers", 0}}));
  EXPECT_TRUE(bad({{"width", 100}}));
  EXPECT_TRUE(bad({{"contact_threshold", 1.5}}));
  EXPECT_TRUE(bad({{"mask_opening", -1}}));
  EXPECT_TRUE(bad({{"epsilon", "x"}}));
}

TEST(PipelineConfig, JsonRoundTrip) {
  PipelineConfig c;
  c.store = "/a/store";
  c.calibration = "/a/c.json";
  c.epsilon = 0.75;
  c.workers = 3;
  const auto back = parse_pipeline_config(nlohmann::json(c));
  EXPECT_EQ(back.epsilon, 0.75);
  EXPECT_EQ(back.workers, 3);
  EXPECT_EQ(back.store, c.store);
}

TEST(PipelineConfig, MissingArtifactsAreConfigErrors) {
  PipelineConfig c;
  c.store = "/nonexistent/store";
  c.calibration = "/nonexistent/c.json";
  try {
    load_context(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigError);
  }
}
