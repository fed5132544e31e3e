#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <torch/torch.h>

#include "facecycle/tensors.hpp"

namespace facecycle {

struct CriticConfig {
  int resolution = 64;
  int frames = 32;
  int channels = 3;
  int base = 64;
  /// 0 selects min(5, log2(r / 2)).
  int video_depth = 0;
  double leaky_slope = 0.2;

  int image_depth() const;
  int resolved_video_depth() const;
  void validate() const;
  std::string describe() const;
};

/// One unbounded score per sample, shape (B).
struct CriticScore {
  torch::Tensor values;
};

/// Strided 2D convs with layer norm + leaky ReLU, then a linear read-out.
class ImageCriticImpl : public torch::nn::Module {
 public:
  explicit ImageCriticImpl(CriticConfig cfg);
  torch::Tensor forward(const torch::Tensor& x);
  const CriticConfig& config() const { return cfg_; }
  torch::nn::Linear& head() { return head_; }

 private:
  CriticConfig cfg_;
  torch::nn::Sequential body_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ImageCritic);

/// Spatio-temporal convs (stride 2 along every extent still > 1); layer norm +
/// leaky ReLU on all but the last conv, then a linear read-out.
class VideoCriticImpl : public torch::nn::Module {
 public:
  explicit VideoCriticImpl(CriticConfig cfg);
  torch::Tensor forward(const torch::Tensor& y);
  const CriticConfig& config() const { return cfg_; }
  torch::nn::Linear& head() { return head_; }

  /// (t, s) extents after each conv, input first.
  const std::vector<std::pair<int, int>>& extents() const { return extents_; }

 private:
  CriticConfig cfg_;
  std::vector<std::pair<int, int>> extents_;
  torch::nn::Sequential body_;
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(VideoCritic);

CriticScore critic_image(ImageCritic& net, const ImageBatch& x);
CriticScore critic_video(VideoCritic& net, const ClipBatch& y);

/// Maps a batch tensor to per-sample scores.
using ScoreFn = std::function<torch::Tensor(const torch::Tensor&)>;

ScoreFn score_fn(ImageCritic& net);
ScoreFn score_fn(VideoCritic& net);

/// x_hat_b = eps_b * real_b + (1 - eps_b) * fake_b.
torch::Tensor interpolate_samples(const torch::Tensor& real, const torch::Tensor& fake, const torch::Tensor& eps);

/// lambda * mean_b (||d critic(x_hat)_b / d x_hat_b||_2 - 1)^2.
///
/// The input gradient is taken with create_graph so the result can itself be
/// differentiated w.r.t. the critic's parameters.
torch::Tensor gradient_penalty(const ScoreFn& critic, const torch::Tensor& x_hat, double lambda);

/// Per-sample input-gradient norms, shape (B); graph retained.
torch::Tensor critic_gradient_norms(const ScoreFn& critic, const torch::Tensor& x_hat);

}  // namespace facecycle
