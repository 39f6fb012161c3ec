#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "finray/calibration.hpp"
#include "finray/contact.hpp"
#include "finray/force_net.hpp"
#include "finray/geometry.hpp"
#include "finray/global_recon.hpp"
#include "finray/image.hpp"
#include "finray/local_recon.hpp"
#include "finray/markers.hpp"
#include "finray/reference_store.hpp"

namespace finray {

/// Paths are resolved against the directory of the config file. Intrinsics
/// and the finger config may also be given inline as JSON objects.
struct PipelineConfig {
  std::filesystem::path intrinsics;   // empty: sensor default
  std::filesystem::path finger;       // empty: defaults
  std::filesystem::path store;
  std::filesystem::path calibration;
  std::filesystem::path force_net;    // optional
  std::optional<CameraIntrinsics> intrinsics_inline;
  std::optional<FingerConfig> finger_inline;
  int width = 960;
  bool flip_h = false;
  bool flip_v = false;
  double epsilon = 10.0;              // px, contact threshold on ‖o'‖
  double contact_threshold = 0.04;    // normalised brightness difference
  int min_region = 20;                // px, smaller contact blobs are dropped
  int mask_opening = 1;               // px, half width of the contact-mask opening
  int workers = 2;
  bool realtime = false;              // latest-wins instead of lossless
  bool coarse_retrieval = false;
  double max_jump = 20.0;             // px, tracker association radius
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
/// Parses and validates (ConfigError on bad values).
PipelineConfig parse_pipeline_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Loaded artifacts shared read-only by every stage.
struct PipelineContext {
  PipelineConfig config;
  CameraIntrinsics camera;  // at the processing width
  FingerConfig finger;
  ReferenceStore store;
  CalibrationArtifact calibration;
  std::optional<ForceNet> force_net;
};

/// Loads and checks every artifact of `cfg`; failures are ConfigErrors.
PipelineContext load_context(const PipelineConfig& cfg);

struct StageTimings {
  double preprocess_ms = 0.0;
  double tracking_ms = 0.0;
  double global_ms = 0.0;
  double local_ms = 0.0;  // retrieval, local reconstruction, contact, merge
  double total_ms = 0.0;  // first stage start to result
};

struct FrameResult {
  std::int64_t frame_id = 0;
  std::string error;  // "Code: message" of the first failing stage, empty if none
  MarkerSet markers;
  SurfaceCloud view_face;
  SurfaceCloud contact_face;
  DepthMap depth;
  ContactEvent event;
  std::optional<Retrieval> reference;
  StageTimings timings;

  bool ok() const { return error.empty(); }
};

/// Deterministic text form of a result: one JSON object with the event,
/// reference, markers and digests of the clouds and depth map.
std::string serialize(const FrameResult& r, bool with_timings = false);

/// Yields raw frames in order; nullopt ends the stream. A frame that failed
/// to load is reported by an empty Frame with its frame_id set.
using FrameSource = std::function<std::optional<Frame>()>;

FrameSource sequence_source(const std::filesystem::path& dir);
FrameSource vector_source(const std::vector<Frame>& frames);

using ResultSink = std::function<void(FrameResult&&)>;

/// Runs the stages over `source`. With workers >= 2 tracking and global
/// reconstruction run on their own threads and are joined by frame_id;
/// otherwise every stage runs on the calling thread. Results arrive at
/// `sink` in frame order.
void run_pipeline(const FrameSource& source, const PipelineContext& ctx, const ResultSink& sink);

/// Convenience wrapper collecting every result.
std::vector<FrameResult> run_pipeline(const FrameSource& source, const PipelineContext& ctx);

/// Mean stage timings and wall time per frame.
struct BenchReport {
  int frames = 0;
  StageTimings mean;
  double wall_ms_per_frame = 0.0;
};

BenchReport bench_pipeline(const FrameSource& source, const PipelineContext& ctx);
void print_bench_table(std::ostream& os, const BenchReport& r);

/// Writes view/contact PLYs, depth PGMs and events.jsonl for every frame.
void write_results(const std::filesystem::path& dir, const std::vector<FrameResult>& results, int width, int height);

}  // namespace finray
