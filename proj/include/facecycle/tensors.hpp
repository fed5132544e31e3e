#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace facecycle {

/// (B, C, r, r) face images in [-1, 1].
///
/// Construction checks rank and squareness only; value range is a property of
/// data coming from the loaders and the tanh heads, not something every
/// intermediate (interpolates, finite-difference probes) satisfies.
struct ImageBatch {
  torch::Tensor data;

  ImageBatch() = default;
  explicit ImageBatch(torch::Tensor t);

  std::int64_t batch() const { return data.size(0); }
  std::int64_t channels() const { return data.size(1); }
  std::int64_t resolution() const { return data.size(2); }
};

/// (B, C, L, r, r) clips, frames in temporal order along dim 2.
struct ClipBatch {
  torch::Tensor data;

  ClipBatch() = default;
  explicit ClipBatch(torch::Tensor t);

  std::int64_t batch() const { return data.size(0); }
  std::int64_t channels() const { return data.size(1); }
  std::int64_t frames() const { return data.size(2); }
  std::int64_t resolution() const { return data.size(3); }

  /// Frame i of every clip, shape (B, C, r, r).
  ImageBatch frame(std::int64_t i) const;
};

/// (B, D, 4, 4) bottleneck between an encoder and the opposite-modality decoder.
struct LatentCode {
  torch::Tensor data;

  LatentCode() = default;
  explicit LatentCode(torch::Tensor t);

  std::int64_t batch() const { return data.size(0); }
  std::int64_t channels() const { return data.size(1); }
};

inline constexpr std::int64_t kLatentExtent = 4;

bool is_power_of_two(std::int64_t v);

}  // namespace facecycle
