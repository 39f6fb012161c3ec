#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "finray/contact.hpp"
#include "finray/force_net.hpp"
#include "finray/geometry.hpp"
#include "finray/global_recon.hpp"
#include "finray/image.hpp"
#include "finray/local_recon.hpp"
#include "finray/markers.hpp"

namespace finray {

/// Sphere pressed into the contact face.
struct Press {
  double s = 30.0;        // mm along the finger from the root
  double lateral = 0.0;   // mm across the face from its centre line
  double radius = 4.0;    // mm
  double depth = 1.0;     // mm of indentation below the undeformed face
};

/// Finger pose for rendering. The view face is the surface
/// P(s, w) = (x_root + s + pull_x·g(s), pull_y·g(s) + w, f(s)) for
/// s in [0, length] and w in [-W/2, W/2], where f is the `bend` polynomial
/// and g(s) = (3x² - x³)/2 with x = s/length is the cantilever shape.
struct FingerState {
  std::vector<double> bend;  // coefficients of f(s), mm
  std::vector<Press> presses;
  double pull_x = 0.0;  // mm of tip drift along the finger
  double pull_y = 0.0;  // mm of tip drift across the finger
};

struct SceneConfig {
  CameraIntrinsics camera = CameraIntrinsics::sensor_default(960);
  FingerConfig finger;
  double x_root = -30.0;   // mm, camera x of the finger root
  double z_root = 52.0;    // mm, view-face depth at the root
  double tilt_deg = 8.0;   // rest incline of the face
  double marker_gap = 3.0;     // mm between face edge and marker row
  double marker_radius = 0.7;  // mm
  double i_root = 220.0;   // base intensity next to the LED
  double i_tip = 120.0;    // base intensity one finger length away
  double b_scale = 1.2;    // mm, brightness law b(d) = 1 - exp(-d / b_scale)
  double b_cap = 0.9;
  double noise_sigma = 2.0;

  double brightness_drop(double d) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const SceneConfig& s);
void from_json(const nlohmann::json& j, SceneConfig& s);
void to_json(nlohmann::json& j, const Press& p);
void from_json(const nlohmann::json& j, Press& p);
void to_json(nlohmann::json& j, const FingerState& s);
void from_json(const nlohmann::json& j, FingerState& s);

/// Rest pose: straight face at the configured tilt.
FingerState rest_state(const SceneConfig& scene);

/// Rest pose plus a tip deflection `tip` (mm along z, cantilever shape) and
/// an S-shaped mode of peak amplitude `s_mode`.
FingerState bent_state(const SceneConfig& scene, double tip, double s_mode = 0.0, double pull_x = 0.0,
                       double pull_y = 0.0);

/// Position of the face centre line at arc position s.
Point3 face_point(const FingerState& st, const SceneConfig& scene, double s, double w = 0.0);
/// Incline angle of the face at arc position s.
double face_incline(const FingerState& st, const SceneConfig& scene, double s);

/// 3D anchors of the side markers in MarkerSet order.
std::vector<Point3> marker_anchors(const FingerState& st, const SceneConfig& scene);

/// Throws StateOutOfView if the face or a marker leaves the image, or if
/// the state violates its invariants.
void validate_state(const FingerState& st, const SceneConfig& scene);

/// Arc position where the column ray with normalised x coordinate `xn`
/// meets the face. Bisection is the renderer's solver; Newton is an
/// independent solver used for ground truth.
enum class ColumnSolver { bisection, newton };
std::optional<double> solve_column(const FingerState& st, const SceneConfig& scene, double xn, ColumnSolver solver);

Frame render(const FingerState& st, const SceneConfig& scene, std::uint64_t seed);

struct GroundTruth {
  SurfaceCloud view_face;
  SurfaceCloud luf;
  SurfaceCloud contact_face;
  DepthMap depth;
  MarkerSet markers;
  ContactEvent event;
};

GroundTruth ground_truth(const FingerState& st, const SceneConfig& scene);

/// Exact marker projections.
MarkerSet project_markers(const FingerState& st, const SceneConfig& scene);

/// Layout of the rest pose.
MarkerLayout rest_layout(const SceneConfig& scene);

/// Bounds of the contact-free random walk.
struct WalkRanges {
  double tip_lo = -12.0, tip_hi = 6.0;
  double s_lo = -3.0, s_hi = 3.0;
  double px_lo = -6.0, px_hi = 12.0;
  double py_lo = -6.0, py_hi = 6.0;
};

/// Smooth seeded random walk over bend and side pull with no presses.
/// Consecutive marker motion stays within `max_step_px`.
std::vector<FingerState> reference_walk(const SceneConfig& scene, int n, std::uint64_t seed,
                                        const WalkRanges& ranges = {}, double max_step_px = 5.0);

/// Press/release protocol: rest, ramp up to a combined bend, pull and
/// press, hold, ramp down, rest.
std::vector<FingerState> press_release_states(const SceneConfig& scene, int n = 1050);

/// Unloaded frames (rest pose; only sensor noise varies).
std::vector<FingerState> idle_states(const SceneConfig& scene, int n);

/// A push whose summed marker drift points along image angle `phi`
/// (radians from +u toward +v), applied at arc position `s`.
FingerState push_state(const SceneConfig& scene, double phi, double s, double magnitude_mm);

/// Line contact: a chain of small spheres along a segment through
/// (s, lateral) at `angle_deg` from the finger axis toward +y.
FingerState line_press_state(const SceneConfig& scene, double angle_deg, double s = 30.0, double lateral = 0.0,
                             double length = 16.0, double depth = 1.0);

/// Force samples: marker displacements from a cantilever influence-function
/// response to a point load, plus the contact point, with noise.
std::vector<ForceSample> gen_force_dataset(const SceneConfig& scene, int n, std::uint64_t seed);

/// Renders `states` into a sequence directory together with ground-truth
/// markers (markers.jsonl), states (states.jsonl), layout.json and scene.json.
void write_sequence(const std::filesystem::path& dir, const std::vector<FingerState>& states,
                    const SceneConfig& scene, std::uint64_t seed, double fps = 30.0);

/// Reference sequence generator: random walk written with write_sequence.
void gen_reference_sequence(const std::filesystem::path& dir, const SceneConfig& scene, int n, std::uint64_t seed);

/// Per-frame noise seed of frame `index` in a sequence seeded with `seed`.
std::uint64_t frame_seed(std::uint64_t seed, std::int64_t index);

}  // namespace finray
