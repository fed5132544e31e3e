#pragma once

#include <stdexcept>
#include <string>

namespace facecycle {

enum class Errc {
  InputTooSmall,
  TooFewFrames,
  EmptyDataset,
  IoError,
  InvalidConfig,
  ConfigMismatch,
  ShapeMismatch,
  NonFinite,
  NonFiniteGradient,
  NonFiniteLoss,
  ResolutionUnsupported,
  WeightLoadError,
  EmbedderFailure,
  EmptyEvaluationSet,
  CheckpointMismatch,
  BadDirection,
};

const char* to_string(Errc code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace facecycle
