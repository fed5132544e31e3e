#include "facecycle/errors.hpp"

namespace facecycle {

const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::InputTooSmall: return "InputTooSmall";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::IoError: return "IoError";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ConfigMismatch: return "ConfigMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::NonFinite: return "NonFinite";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::ResolutionUnsupported: return "ResolutionUnsupported";
    case Errc::WeightLoadError: return "WeightLoadError";
    case Errc::EmbedderFailure: return "EmbedderFailure";
    case Errc::EmptyEvaluationSet: return "EmptyEvaluationSet";
    case Errc::CheckpointMismatch: return "CheckpointMismatch";
    case Errc::BadDirection: return "BadDirection";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace facecycle
