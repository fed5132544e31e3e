#include "facecycle/losses.hpp"

#include "facecycle/errors.hpp"
#include "facecycle/identity.hpp"

namespace facecycle {

void LossWeights::validate() const {
  if (!(lambda_gp >= 0 && gamma_cycle >= 0 && omega_id >= 0))
    throw Error(Errc::InvalidConfig, "loss weights must be non-negative");
}

namespace {

void require_finite(const torch::Tensor& t, const char* name) {
  if (!torch::isfinite(t.detach()).all().item<bool>()) throw Error(Errc::NonFinite, std::string(name) + " is not finite");
}

void require_same(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.sizes().equals(b.sizes())) throw Error(Errc::ShapeMismatch, what);
}

// (B, C, r, r) and (B, C, L, r, r): same batch, channels and resolution.
void require_pairable(const ImageBatch& x, const ClipBatch& y, const char* what) {
  if (x.batch() != y.batch() || x.channels() != y.channels() || x.resolution() != y.resolution())
    throw Error(Errc::ShapeMismatch, what);
}

}  // namespace

CriticLoss wgan_critic_loss(const ScoreFn& critic, const torch::Tensor& real, const torch::Tensor& fake,
                            double lambda_gp, Rng& rng) {
  require_same(real, fake, "critic loss needs real and fake of one shape");
  const auto real_scores = critic(real);
  const auto fake_scores = critic(fake);
  const auto eps = rng.uniform({real.size(0)}, real.options().requires_grad(false));
  CriticLoss out;
  out.gap = real_scores.mean() - fake_scores.mean();
  out.penalty = gradient_penalty(critic, interpolate_samples(real.detach(), fake.detach(), eps), lambda_gp);
  out.total = -out.gap + out.penalty;
  require_finite(out.total, "critic loss");
  return out;
}

torch::Tensor wgan_generator_loss(const ScoreFn& critic, const torch::Tensor& fake) { return -critic(fake).mean(); }

torch::Tensor cycle_loss(const ImageBatch& x, const ImageBatch& x_rec, const ClipBatch& y, const ClipBatch& y_rec) {
  require_same(x.data, x_rec.data, "image reconstruction differs in shape");
  require_same(y.data, y_rec.data, "clip reconstruction differs in shape");
  return (x_rec.data - x.data).abs().mean() + (y_rec.data - y.data).abs().mean();
}

torch::Tensor pixel_identity_loss(const ImageBatch& x, const ClipBatch& y_gen, const ClipBatch& y,
                                  const ImageBatch& x_gen) {
  require_pairable(x, y_gen, "generated clip does not pair with source images");
  require_pairable(x_gen, y, "generated images do not pair with source clips");
  // Every frame has the same element count, so the frame-average of per-frame
  // means is the mean over the broadcast difference.
  const auto forward = (y_gen.data - x.data.unsqueeze(2)).pow(2).mean();
  const auto backward = (x_gen.data.unsqueeze(2) - y.data).pow(2).mean();
  return forward + backward;
}

namespace {

// Mean over (B, L) of ||F(frame_{b,i}) - F(image_b)||^2.
torch::Tensor frame_embedding_distance(const Embedder& embedder, const ImageBatch& images, const ClipBatch& clips) {
  const auto b = clips.batch(), l = clips.frames();
  const auto frames = clips.data.transpose(1, 2).reshape({b * l, clips.channels(), clips.resolution(), clips.resolution()});
  const auto e_frames = embedder.embed(ImageBatch(frames)).view({b, l, -1});
  const auto e_images = embedder.embed(images).unsqueeze(1);
  return (e_frames - e_images).pow(2).sum(-1).mean();
}

}  // namespace

torch::Tensor embedding_identity_loss(const Embedder& embedder, const ImageBatch& x, const ClipBatch& y_gen,
                                      const ClipBatch& y, const ImageBatch& x_gen) {
  require_pairable(x, y_gen, "generated clip does not pair with source images");
  require_pairable(x_gen, y, "generated images do not pair with source clips");
  return frame_embedding_distance(embedder, x, y_gen) + frame_embedding_distance(embedder, x_gen, y);
}

torch::Tensor total_generator_objective(const GeneratorTerms& terms, const LossWeights& w) {
  auto total = terms.adv_img + terms.adv_vid + w.gamma_cycle * terms.cycle;
  if (w.id_mode != IdentityMode::None) total = total + w.omega_id * terms.identity;
  return total;
}

}  // namespace facecycle
