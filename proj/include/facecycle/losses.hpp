#pragma once

#include <torch/torch.h>

#include "facecycle/critics.hpp"
#include "facecycle/rng.hpp"
#include "facecycle/tensors.hpp"

namespace facecycle {

class Embedder;

enum class IdentityMode { None, Pixel, Embed };

struct LossWeights {
  double lambda_gp = 10.0;
  double gamma_cycle = 1000.0;
  double omega_id = 100.0;
  IdentityMode id_mode = IdentityMode::None;

  void validate() const;
};

/// Critic-side objective and its two parts. Lower is better for the critic.
struct CriticLoss {
  torch::Tensor total;    // mean C(fake) - mean C(real) + penalty
  torch::Tensor gap;      // mean C(real) - mean C(fake), the Wasserstein estimate
  torch::Tensor penalty;  // lambda-weighted
};

/// Interpolation weights are drawn per sample from U(0, 1) using `rng`.
/// `fake` must already be detached from the generator.
CriticLoss wgan_critic_loss(const ScoreFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                            double lambda_gp, Rng& rng);

/// -mean(critic(fake)).
torch::Tensor wgan_generator_loss(const ScoreFn& critic, const torch::Tensor& fake);

/// mean |x_rec - x| + mean |y_rec - y|.
torch::Tensor cycle_loss(const ImageBatch& x, const ImageBatch& x_rec, const ClipBatch& y, const ClipBatch& y_rec);

/// Frame-averaged MSE between each generated frame and its source image, plus
/// frame-averaged MSE between the generated image and each source frame.
torch::Tensor pixel_identity_loss(const ImageBatch& x, const ClipBatch& y_gen, const ClipBatch& y,
                                  const ImageBatch& x_gen);

/// Same pairing as the pixel loss, measured as squared Euclidean distance
/// between embeddings. The embedder stays frozen; gradients reach only the
/// generated tensors.
torch::Tensor embedding_identity_loss(const Embedder& embedder, const ImageBatch& x, const ClipBatch& y_gen,
                                      const ClipBatch& y, const ImageBatch& x_gen);

/// Unweighted generator-side terms.
struct GeneratorTerms {
  torch::Tensor adv_img;
  torch::Tensor adv_vid;
  torch::Tensor cycle;
  torch::Tensor identity;  // ignored (may be undefined) when id_mode == None
};

/// adv_img + adv_vid + gamma * cycle + omega * identity; the identity term is
/// not added at all in None mode.
torch::Tensor total_generator_objective(const GeneratorTerms& terms, const LossWeights& w);

}  // namespace facecycle
