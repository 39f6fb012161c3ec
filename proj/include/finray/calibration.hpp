#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "finray/geometry.hpp"
#include "finray/global_recon.hpp"
#include "finray/image.hpp"
#include "finray/local_recon.hpp"

namespace finray {

struct BallSpec {
  double R = 4.0;  // mm
};

struct CircleFit {
  Pixel center;
  double radius = 0.0;
  Pixel edge;  // lies on the circle
};

struct CalibSample {
  double diff = 0.0;  // normalised brightness difference
  double d = 0.0;     // press depth, mm
  Pixel pixel;
};

/// Algebraic (Kåsa) least-squares circle through `pts`. The edge point is
/// left at the first input point projected onto the circle.
CircleFit fit_circle_kasa(std::span<const Pixel> pts);

/// Circle fitted to the boundary of the largest region whose normalised
/// brightness difference is at least `dark_threshold`. Only boundary pixels
/// that border valid, non-dark pixels are used, so edges cut by the
/// silhouette or the frame do not bias the fit.
CircleFit fit_dark_circle(const Frame& live, const Frame& ref, double dark_threshold = 0.04);

/// Ball centre from the tangent ray through `fit.edge` and the central ray
/// through `fit.center`.
Point3 locate_ball_center(const CircleFit& fit, const CameraIntrinsics& k, const BallSpec& ball);

/// (ΔĨ, d) pairs for the pixels inside the fitted circle, with d measured
/// along z from the near ball surface up to the undeformed face.
std::vector<CalibSample> collect_samples(const Frame& live, const Frame& ref, const CircleFit& fit, const Point3& c,
                                         const BallSpec& ball, const SurfaceCloud& luf, const CameraIntrinsics& k);

struct MappingFit {
  MappingPolynomial mapping;
  double residual_mm = 0.0;  // rms
};

/// Least-squares d = M(ΔĨ). If the fit is not increasing on its domain the
/// degree is reduced until it is.
MappingFit fit_mapping(const std::vector<CalibSample>& samples, int degree = 4);

struct SelfCalibration {
  CircleFit circle;
  MappingFit fit;
  int evaluations = 0;
  bool improved = false;
};

/// Coordinate descent over the circle centre and radius (±3 px around
/// `init`, at most 200 evaluations) minimising |a0| + fit residual. Steps
/// start at 0.5 px and halve down to 1/64 px once no neighbour improves.
/// The returned |a0| never exceeds that of a usable `init`.
SelfCalibration self_calibrate(const Frame& live, const Frame& ref, const CircleFit& init, const CameraIntrinsics& k,
                               const BallSpec& ball, const SurfaceCloud& luf, int degree = 4);

struct CalibrationArtifact {
  MappingPolynomial mapping;
  double ball_radius_mm = 4.0;
  CircleFit circle;
  double residual_mm = 0.0;
};

struct CalibrationRun {
  CalibrationArtifact artifact;
  CircleFit initial;
  SelfCalibration search;
};

/// Whole procedure on one pressed frame and its contact-free reference:
/// dark-circle fit (unless `init` is given), undeformed face from the live
/// silhouette, then self-calibration.
CalibrationRun calibrate(const Frame& live, const Frame& ref, const CameraIntrinsics& k, const FingerConfig& finger,
                         const BallSpec& ball, const std::optional<CircleFit>& init = std::nullopt, int degree = 4);

void to_json(nlohmann::json& j, const CalibrationArtifact& a);
void from_json(const nlohmann::json& j, CalibrationArtifact& a);
CalibrationArtifact load_calibration(const std::filesystem::path& path);
void save_calibration(const std::filesystem::path& path, const CalibrationArtifact& a);

}  // namespace finray
