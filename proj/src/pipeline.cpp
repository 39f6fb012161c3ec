#include "finray/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "finray/error.hpp"
#include "finray/image_io.hpp"

namespace finray {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string describe(const Error& e) { return std::string(to_string(e.code())) + ": " + e.what(); }

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Single-item hand-off between two threads. push blocks while the slot is
// full, pop blocks while it is empty; close wakes everyone.
template <class T>
class Slot {
 public:
  void push(T item) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !item_ || closed_; });
    if (closed_) return;
    item_ = std::move(item);
    cv_.notify_all();
  }

  bool full() {
    std::lock_guard lock(mu_);
    return item_.has_value();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return item_ || closed_; });
    if (!item_) return std::nullopt;
    std::optional<T> out = std::move(item_);
    item_.reset();
    cv_.notify_all();
    return out;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<T> item_;
  bool closed_ = false;
};

struct Prepared {
  std::shared_ptr<const Frame> frame;  // preprocessed; empty on load failure
  std::int64_t frame_id = 0;
  std::string error;
  Clock::time_point start;
  double preprocess_ms = 0.0;
};

struct TrackOut {
  std::int64_t frame_id = 0;
  std::optional<MarkerSet> markers;
  std::string error;
  double ms = 0.0;
};

struct GlobalOut {
  std::int64_t frame_id = 0;
  SurfaceCloud view_face;
  SurfaceCloud luf;
  std::string error;
  double ms = 0.0;
};

Prepared prepare(std::optional<Frame>&& raw, const PipelineContext& ctx) {
  Prepared p;
  p.start = Clock::now();
  p.frame_id = raw->frame_id;
  if (raw->empty()) {
    p.error = "IoError: frame could not be read";
    return p;
  }
  try {
    auto f = preprocess(*raw, ctx.config.width, ctx.config.flip_h, ctx.config.flip_v);
    f.frame_id = raw->frame_id;
    p.frame = std::make_shared<const Frame>(std::move(f));
  } catch (const Error& e) {
    p.error = describe(e);
  }
  p.preprocess_ms = ms_since(p.start);
  return p;
}

// Marker stage. Keeps the previous marker set between frames and falls back
// to fresh indexing when tracking loses the markers.
class Tracker {
 public:
  explicit Tracker(const PipelineContext& ctx) : ctx_(ctx) {}

  TrackOut run(const Prepared& p) {
    TrackOut out;
    out.frame_id = p.frame_id;
    if (!p.frame) {
      prev_.reset();
      return out;
    }
    const auto t0 = Clock::now();
    try {
      const auto blobs = detector_.detect(*p.frame);
      MarkerSet ms;
      if (prev_) {
        try {
          ms = track(*prev_, blobs, ctx_.config.max_jump);
        } catch (const Error& e) {
          if (e.code() != Errc::TrackingLost) throw;
          ms = index_markers(blobs, ctx_.store.layout);
        }
      } else {
        ms = index_markers(blobs, ctx_.store.layout);
      }
      ms.frame_id = p.frame_id;
      ms = estimate_occluded(ms, ctx_.store.layout);
      prev_ = ms;
      out.markers = std::move(ms);
    } catch (const Error& e) {
      prev_.reset();
      out.error = describe(e);
    }
    out.ms = ms_since(t0);
    return out;
  }

 private:
  const PipelineContext& ctx_;
  BlobMarkerDetector detector_;
  std::optional<MarkerSet> prev_;
};

GlobalOut run_global(const Prepared& p, const PipelineContext& ctx) {
  GlobalOut out;
  out.frame_id = p.frame_id;
  if (!p.frame) return out;
  const auto t0 = Clock::now();
  try {
    const auto edges = to_silhouette_boundary(repair_edge_dropouts(extract_silhouette_edges(binarize(*p.frame))));
    out.view_face = reconstruct_view_face(edges, ctx.camera, ctx.finger);
    const auto incline = fit_incline_profile(edges, ctx.camera, ctx.finger);
    out.luf = to_locally_undeformed_face(smooth_view_face(out.view_face, incline), incline, ctx.finger);
  } catch (const Error& e) {
    out.error = describe(e);
  }
  out.ms = ms_since(t0);
  return out;
}

FrameResult merge(const Prepared& p, TrackOut&& t, GlobalOut&& g, const PipelineContext& ctx) {
  const auto t0 = Clock::now();
  FrameResult r;
  r.frame_id = p.frame_id;
  r.event.frame_id = p.frame_id;
  r.error = !p.error.empty() ? p.error : !t.error.empty() ? t.error : g.error;
  r.view_face = std::move(g.view_face);

  try {
    if (t.markers) {
      r.markers = std::move(*t.markers);
      const Offset2 o = global_offset(r.markers, ctx.store.layout);
      r.event.offset_norm = o.norm();
      r.event.detected = detect_contact(o, ctx.config.epsilon);
      if (r.event.detected) {
        const auto dc = classify_direction(o, ctx.finger);
        r.event.o = dc.o;
        r.event.face = dc.face;
        r.event.region = classify_region(dc.o);
      }
      r.reference = retrieve(ctx.store, r.markers, ctx.config.coarse_retrieval);
    }

    if (r.reference && g.error.empty() && p.frame) {
      const Frame ref = ctx.store.frame(r.reference->index);
      const auto field = normalized_diff(*p.frame, ref, g.luf.grid);
      r.depth = apply_mapping(field, ctx.calibration.mapping, ctx.config.contact_threshold);
      // Only pixels on the reconstructed face can be in contact.
      for (std::size_t i = 0; i < r.depth.mask.size(); ++i) {
        if (!g.luf.valid[i] && r.depth.mask[i]) {
          r.depth.mask[i] = 0;
          r.depth.depth[i] = 0.0;
        }
      }
      open_contact_mask(r.depth, ctx.config.mask_opening);
      remove_small_regions(r.depth, ctx.config.min_region);
      r.contact_face = compose_contact_cloud(g.luf, r.depth);

      if (r.event.detected && r.depth.contact_count() > 0) {
        r.event.contact_point = contact_point(r.contact_face, r.depth);
        if (ctx.force_net && r.event.contact_point) {
          const auto x = force_features(r.markers, ctx.store.layout, *r.event.contact_point);
          r.event.force = ctx.force_net->predict(x);
        }
        try {
          r.event.pose_deg = estimate_pose(r.contact_face, r.depth);
        } catch (const Error&) {
          // too few or isotropic contact points: no pose for this frame
        }
      }
    }
  } catch (const Error& e) {
    if (r.error.empty()) r.error = describe(e);
  }

  r.timings.preprocess_ms = p.preprocess_ms;
  r.timings.tracking_ms = t.ms;
  r.timings.global_ms = g.ms;
  r.timings.local_ms = ms_since(t0);
  r.timings.total_ms = ms_since(p.start);
  return r;
}

void run_sequential(const FrameSource& source, const PipelineContext& ctx, const ResultSink& sink) {
  Tracker tracker(ctx);
  while (auto raw = source()) {
    Prepared p = prepare(std::move(raw), ctx);
    auto t = tracker.run(p);
    auto g = run_global(p, ctx);
    sink(merge(p, std::move(t), std::move(g), ctx));
  }
}

// Producer thread preprocesses and publishes each frame to both workers;
// the calling thread joins the two outputs by frame_id and finishes the frame.
void run_concurrent(const FrameSource& source, const PipelineContext& ctx, const ResultSink& sink) {
  Slot<std::shared_ptr<const Prepared>> track_in, global_in, merge_in;
  Slot<TrackOut> track_out;
  Slot<GlobalOut> global_out;

  std::thread producer([&] {
    try {
      while (auto raw = source()) {
        auto p = std::make_shared<const Prepared>(prepare(std::move(raw), ctx));
        if (ctx.config.realtime && (track_in.full() || global_in.full())) continue;  // stale frame dropped
        merge_in.push(p);
        track_in.push(p);
        global_in.push(p);
      }
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: frame source failed: %s\n", e.what());
    }
    track_in.close();
    global_in.close();
    merge_in.close();
  });
  std::thread tracker_thread([&] {
    Tracker tracker(ctx);
    while (auto p = track_in.pop()) track_out.push(tracker.run(**p));
    track_out.close();
  });
  std::thread global_thread([&] {
    while (auto p = global_in.pop()) global_out.push(run_global(**p, ctx));
    global_out.close();
  });

  // The merge queue only has depth one, so the producer cannot run ahead of
  // the workers by more than a frame.
  std::exception_ptr failure;
  while (auto p = merge_in.pop()) {
    auto t = track_out.pop();
    auto g = global_out.pop();
    if (!t || !g) break;
    if (t->frame_id != (*p)->frame_id || g->frame_id != (*p)->frame_id) {
      failure = std::make_exception_ptr(std::logic_error("worker outputs out of step"));
      break;
    }
    try {
      sink(merge(**p, std::move(*t), std::move(*g), ctx));
    } catch (...) {
      failure = std::current_exception();
      break;
    }
  }
  track_in.close();
  global_in.close();
  merge_in.close();
  track_out.close();
  global_out.close();
  producer.join();
  tracker_thread.join();
  global_thread.join();
  if (failure) std::rethrow_exception(failure);
}

// FNV-1a over raw bytes.
struct Digest {
  std::uint64_t h = 1469598103934665603ull;
  void add(const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

std::string digest(const SurfaceCloud& c) {
  Digest d;
  d.add(&c.grid, sizeof c.grid);
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    d.add(&c.valid[i], 1);
    if (c.valid[i]) d.add(&c.points[i], sizeof(Point3));
  }
  return d.hex();
}

std::string digest(const DepthMap& m) {
  Digest d;
  d.add(&m.grid, sizeof m.grid);
  d.add(m.depth.data(), m.depth.size() * sizeof(double));
  d.add(m.mask.data(), m.mask.size());
  return d.hex();
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"store", c.store.string()},
                     {"calibration", c.calibration.string()},
                     {"width", c.width},
                     {"flip_h", c.flip_h},
                     {"flip_v", c.flip_v},
                     {"epsilon", c.epsilon},
                     {"contact_threshold", c.contact_threshold},
                     {"min_region", c.min_region},
                     {"mask_opening", c.mask_opening},
                     {"workers", c.workers},
                     {"realtime", c.realtime},
                     {"coarse_retrieval", c.coarse_retrieval},
                     {"max_jump", c.max_jump}};
  if (c.intrinsics_inline) j["intrinsics"] = *c.intrinsics_inline;
  else if (!c.intrinsics.empty()) j["intrinsics"] = c.intrinsics.string();
  if (c.finger_inline) j["finger"] = *c.finger_inline;
  else if (!c.finger.empty()) j["finger"] = c.finger.string();
  if (!c.force_net.empty()) j["force_net"] = c.force_net.string();
}

PipelineConfig parse_pipeline_config(const nlohmann::json& j, const fs::path& base_dir) {
  PipelineConfig c;
  try {
    if (j.contains("intrinsics")) {
      const auto& v = j.at("intrinsics");
      if (v.is_object()) c.intrinsics_inline = v.get<CameraIntrinsics>();
      else c.intrinsics = resolve(base_dir, v.get<std::string>());
    }
    if (j.contains("finger")) {
      const auto& v = j.at("finger");
      if (v.is_object()) c.finger_inline = v.get<FingerConfig>();
      else c.finger = resolve(base_dir, v.get<std::string>());
    }
    c.store = resolve(base_dir, j.at("store").get<std::string>());
    c.calibration = resolve(base_dir, j.at("calibration").get<std::string>());
    if (j.contains("force_net")) c.force_net = resolve(base_dir, j.at("force_net").get<std::string>());
    c.width = j.value("width", c.width);
    c.flip_h = j.value("flip_h", c.flip_h);
    c.flip_v = j.value("flip_v", c.flip_v);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.contact_threshold = j.value("contact_threshold", c.contact_threshold);
    c.min_region = j.value("min_region", c.min_region);
    c.mask_opening = j.value("mask_opening", c.mask_opening);
    c.workers = j.value("workers", c.workers);
    c.realtime = j.value("realtime", c.realtime);
    c.coarse_retrieval = j.value("coarse_retrieval", c.coarse_retrieval);
    c.max_jump = j.value("max_jump", c.max_jump);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, std::string("pipeline config: ") + e.what());
  }
  if (c.width < 320) fail(Errc::ConfigError, "processing width must be at least 320 px");
  if (!(c.epsilon > 0.0)) fail(Errc::ConfigError, "epsilon must be positive");
  if (!(c.contact_threshold > 0.0 && c.contact_threshold < 1.0)) {
    fail(Errc::ConfigError, "contact_threshold must lie in (0, 1)");
  }
  if (c.workers < 1) fail(Errc::ConfigError, "workers must be at least 1");
  if (c.min_region < 0) fail(Errc::ConfigError, "min_region must be non-negative");
  if (c.mask_opening < 0) fail(Errc::ConfigError, "mask_opening must be non-negative");
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, path.string() + ": " + e.what());
  } catch (const Error& e) {
    fail(Errc::ConfigError, e.what());
  }
  return parse_pipeline_config(j, path.parent_path());
}

PipelineContext load_context(const PipelineConfig& cfg) {
  PipelineContext ctx;
  ctx.config = cfg;
  auto load_json = [](const fs::path& p) {
    try {
      return nlohmann::json::parse(read_text(p));
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::ConfigError, p.string() + ": " + e.what());
    } catch (const Error& e) {
      fail(Errc::ConfigError, e.what());
    }
  };
  try {
    CameraIntrinsics raw = CameraIntrinsics::sensor_default(1920);
    if (cfg.intrinsics_inline) raw = *cfg.intrinsics_inline;
    else if (!cfg.intrinsics.empty()) raw = load_json(cfg.intrinsics).get<CameraIntrinsics>();
    raw.validate();
    ctx.camera = raw.width == cfg.width ? raw : raw.scaled_to_width(cfg.width);
    if (cfg.finger_inline) ctx.finger = *cfg.finger_inline;
    else if (!cfg.finger.empty()) ctx.finger = load_json(cfg.finger).get<FingerConfig>();
    ctx.finger.validate();
    ctx.store = load_store(cfg.store);
    if (ctx.store.size() == 0) fail(Errc::ConfigError, "reference store is empty");
    const Frame first = ctx.store.frame(0);
    if (first.width != cfg.width) {
      fail(Errc::ConfigError, "reference frames are " + std::to_string(first.width) + " px wide, pipeline runs at " +
                                  std::to_string(cfg.width));
    }
    ctx.calibration = load_calibration(cfg.calibration);
    if (!cfg.force_net.empty()) ctx.force_net = load_force_net(cfg.force_net);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError) throw;
    fail(Errc::ConfigError, describe(e));
  }
  return ctx;
}

std::string serialize(const FrameResult& r, bool with_timings) {
  nlohmann::json j;
  j["frame_id"] = r.frame_id;
  j["error"] = r.error;
  j["event"] = r.event;
  j["markers"] = r.markers;
  if (r.reference) {
    j["reference"] = {{"index", r.reference->index}, {"frame_id", r.reference->frame_id},
                      {"distance", r.reference->distance}};
  } else {
    j["reference"] = nullptr;
  }
  j["view_face"] = {{"valid", r.view_face.valid_count()}, {"digest", digest(r.view_face)}};
  j["contact_face"] = {{"valid", r.contact_face.valid_count()}, {"digest", digest(r.contact_face)}};
  j["depth"] = {{"contact", r.depth.contact_count()}, {"digest", digest(r.depth)}};
  if (with_timings) {
    j["timings_ms"] = {{"preprocess", r.timings.preprocess_ms}, {"tracking", r.timings.tracking_ms},
                       {"global", r.timings.global_ms},         {"local", r.timings.local_ms},
                       {"total", r.timings.total_ms}};
  }
  return j.dump();
}

FrameSource sequence_source(const fs::path& dir) {
  auto seq = std::make_shared<FrameSequence>(dir);
  auto next = std::make_shared<int>(0);
  return [seq, next]() -> std::optional<Frame> {
    if (*next >= seq->size()) return std::nullopt;
    const int i = (*next)++;
    try {
      return seq->load(i);
    } catch (const Error& e) {
      std::fprintf(stderr, "warning: frame %d: %s\n", i, describe(e).c_str());
      Frame bad;
      bad.frame_id = i;
      return bad;
    }
  };
}

FrameSource vector_source(const std::vector<Frame>& frames) {
  auto next = std::make_shared<std::size_t>(0);
  return [&frames, next]() -> std::optional<Frame> {
    if (*next >= frames.size()) return std::nullopt;
    return frames[(*next)++];
  };
}

void run_pipeline(const FrameSource& source, const PipelineContext& ctx, const ResultSink& sink) {
  if (ctx.config.workers >= 2) run_concurrent(source, ctx, sink);
  else run_sequential(source, ctx, sink);
}

std::vector<FrameResult> run_pipeline(const FrameSource& source, const PipelineContext& ctx) {
  std::vector<FrameResult> out;
  run_pipeline(source, ctx, [&](FrameResult&& r) { out.push_back(std::move(r)); });
  return out;
}

BenchReport bench_pipeline(const FrameSource& source, const PipelineContext& ctx) {
  BenchReport rep;
  const auto t0 = Clock::now();
  run_pipeline(source, ctx, [&](FrameResult&& r) {
    ++rep.frames;
    rep.mean.preprocess_ms += r.timings.preprocess_ms;
    rep.mean.tracking_ms += r.timings.tracking_ms;
    rep.mean.global_ms += r.timings.global_ms;
    rep.mean.local_ms += r.timings.local_ms;
    rep.mean.total_ms += r.timings.total_ms;
  });
  const double wall = ms_since(t0);
  if (rep.frames > 0) {
    const double n = rep.frames;
    rep.mean.preprocess_ms /= n;
    rep.mean.tracking_ms /= n;
    rep.mean.global_ms /= n;
    rep.mean.local_ms /= n;
    rep.mean.total_ms /= n;
    rep.wall_ms_per_frame = wall / n;
  }
  return rep;
}

void print_bench_table(std::ostream& os, const BenchReport& r) {
  const auto flags = os.flags();
  os << std::fixed << std::setprecision(2);
  os << "stage                 mean_ms   anchor_ms\n";
  os << "preprocess          " << std::setw(9) << r.mean.preprocess_ms << "        2.00\n";
  os << "  tracking          " << std::setw(9) << r.mean.tracking_ms << "\n";
  os << "  global            " << std::setw(9) << r.mean.global_ms << "\n";
  os << "tracking+global     " << std::setw(9) << std::max(r.mean.tracking_ms, r.mean.global_ms)
     << "       10.00\n";
  os << "local+merge         " << std::setw(9) << r.mean.local_ms << "        6.00\n";
  os << "latency             " << std::setw(9) << r.mean.total_ms << "\n";
  os << "wall per frame      " << std::setw(9) << r.wall_ms_per_frame << "       33.00\n";
  os << "frames              " << std::setw(9) << r.frames << "\n";
  os.flags(flags);
}

void write_results(const fs::path& dir, const std::vector<FrameResult>& results, int width, int height) {
  fs::create_directories(dir);
  std::string events;
  for (const auto& r : results) {
    const std::string stem = frame_filename(r.frame_id, "");
    if (r.view_face.valid_count() > 0) write_ply(dir / (stem + "_view.ply"), r.view_face);
    if (r.contact_face.valid_count() > 0) write_ply(dir / (stem + "_contact.ply"), r.contact_face);
    if (r.depth.grid.size() > 0) write_depth_pgm(dir / (stem + "_depth.pgm"), r.depth, width, height);
    nlohmann::json j = r.event;
    if (!r.error.empty()) j["error"] = r.error;
    if (r.reference) j["reference"] = {{"frame_id", r.reference->frame_id}, {"distance", r.reference->distance}};
    events += j.dump() + "\n";
  }
  write_text(dir / "events.jsonl", events);
}

}  // namespace finray
