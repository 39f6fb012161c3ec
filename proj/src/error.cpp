#include "finray/error.hpp"

namespace finray {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NonPositiveDepth: return "NonPositiveDepth";
    case Errc::BadTarget: return "BadTarget";
    case Errc::DegenerateHistogram: return "DegenerateHistogram";
    case Errc::NoRegion: return "NoRegion";
    case Errc::MultipleRegions: return "MultipleRegions";
    case Errc::DegenerateWidth: return "DegenerateWidth";
    case Errc::InsufficientRows: return "InsufficientRows";
    case Errc::ExtremeIncline: return "ExtremeIncline";
    case Errc::TooManyBlobs: return "TooManyBlobs";
    case Errc::TrackingLost: return "TrackingLost";
    case Errc::GroupBlind: return "GroupBlind";
    case Errc::LayoutMismatch: return "LayoutMismatch";
    case Errc::SparseMarkers: return "SparseMarkers";
    case Errc::EmptyStore: return "EmptyStore";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::NoDarkRegion: return "NoDarkRegion";
    case Errc::DegenerateBoundary: return "DegenerateBoundary";
    case Errc::DegenerateTangent: return "DegenerateTangent";
    case Errc::NoIntersections: return "NoIntersections";
    case Errc::IllConditioned: return "IllConditioned";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::ZeroOffset: return "ZeroOffset";
    case Errc::UntrainedNet: return "UntrainedNet";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::IsotropicCloud: return "IsotropicCloud";
    case Errc::StateOutOfView: return "StateOutOfView";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

bool is_config_error(Errc code) noexcept {
  return code == Errc::ConfigError || code == Errc::ParseError;
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace finray
