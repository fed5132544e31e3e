#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "facecycle/tensors.hpp"

namespace facecycle {

/// Frozen face verificator F. Every output row is unit-norm, and the map is
/// differentiable w.r.t. its input so identity losses can backpropagate
/// through it into the generators.
class Embedder {
 public:
  virtual ~Embedder() = default;

  /// (B, C, r, r) -> (B, E).
  virtual torch::Tensor embed(const ImageBatch& x) const = 0;
  virtual int embedding_dim(int channels) const = 0;
  virtual std::string name() const = 0;
};

/// Mean color per channel plus 4x4 average-pooled luminance, L2-normalized.
///
/// A constant stabilizer coordinate equal to the norm floor (1e-8) is appended
/// before normalizing, so the all-zero input maps to a finite unit vector
/// instead of 0/0.
class BuiltinEmbedder final : public Embedder {
 public:
  static constexpr double kNormFloor = 1e-8;

  torch::Tensor embed(const ImageBatch& x) const override;
  int embedding_dim(int channels) const override { return channels + 16 + 1; }
  std::string name() const override { return "builtin"; }
};

/// Sequential network read from `<name>.weights` (raw little-endian float32)
/// and `<name>.weights.json` (layer list). Weights are never updated.
///
/// Manifest schema, format_version 1:
///   {"format_version": 1, "embedding_dim": E, "input_resolution": r,
///    "input_channels": C, "layers": [ {"type": ...}, ... ]}
/// Layer types: "conv2d" {in, out, kernel, stride, padding, bias},
/// "linear" {in, out, bias}, "relu", "leaky_relu" {slope}, "tanh",
/// "avgpool" {kernel}, "flatten". Parametric layers consume weight then bias
/// from the blob in PyTorch layout; the blob must be consumed exactly.
class ExternalEmbedder final : public Embedder {
 public:
  static constexpr int kFormatVersion = 1;

  static ExternalEmbedder load(const std::filesystem::path& weights);
  ExternalEmbedder(nlohmann::json manifest, std::vector<float> weights);

  /// Writes both files.
  void save(const std::filesystem::path& weights) const;

  torch::Tensor embed(const ImageBatch& x) const override;
  int embedding_dim(int) const override { return embedding_dim_; }
  std::string name() const override { return "external"; }

 private:
  struct Layer {
    std::string type;
    torch::Tensor weight, bias;
    int stride = 1, padding = 0, kernel = 1;
    double slope = 0.0;
  };

  nlohmann::json manifest_;
  std::vector<float> raw_;
  std::vector<Layer> layers_;
  int embedding_dim_ = 0;
  int input_resolution_ = 0;
  int input_channels_ = 0;
};

/// "builtin" or "file:PATH".
std::shared_ptr<const Embedder> make_embedder(const std::string& name);

/// Mean over frames of ||F(frame_i) - F(image)||^2. image: (C, r, r),
/// clip: (C, L, r, r).
torch::Tensor clip_image_distance(const Embedder& embedder, const torch::Tensor& image, const torch::Tensor& clip);

/// One (source, translated) pair; which side was the source does not change
/// the distance.
struct EvalPair {
  torch::Tensor image;  // (C, r, r)
  torch::Tensor clip;   // (C, L, r, r)
};

/// Mean clip_image_distance over the pairs; lower means better identity
/// preservation.
double facenet_score(const Embedder& embedder, const std::vector<EvalPair>& pairs);

}  // namespace facecycle
