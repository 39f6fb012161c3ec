#pragma once

#include <stdexcept>
#include <string>

namespace finray {

enum class Errc {
  NonPositiveDepth,
  BadTarget,
  DegenerateHistogram,
  NoRegion,
  MultipleRegions,
  DegenerateWidth,
  InsufficientRows,
  ExtremeIncline,
  TooManyBlobs,
  TrackingLost,
  GroupBlind,
  LayoutMismatch,
  SparseMarkers,
  EmptyStore,
  SizeMismatch,
  GridMismatch,
  NoDarkRegion,
  DegenerateBoundary,
  DegenerateTangent,
  NoIntersections,
  IllConditioned,
  InsufficientSamples,
  ZeroOffset,
  UntrainedNet,
  TooFewSamples,
  TooFewPoints,
  IsotropicCloud,
  StateOutOfView,
  ConfigError,
  IoError,
  ParseError,
};

const char* to_string(Errc code) noexcept;

// Configuration problems map to exit code 2, everything else to 3.
bool is_config_error(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace finray
