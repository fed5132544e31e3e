#include "facecycle/critics.hpp"

#include <sstream>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace nn = torch::nn;

namespace {

int log2_floor(int v) {
  int k = 0;
  while (v > 1) {
    v /= 2;
    ++k;
  }
  return k;
}

nn::LeakyReLU leaky(double slope) { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(slope)); }

// Stride 2 (kernel 4, pad 1) halves an extent > 1; extent 1 passes through a
// unit kernel.
struct AxisStep {
  int kernel, stride, padding, out;
};

AxisStep axis_step(int extent) {
  if (extent > 1) return {4, 2, 1, (extent + 2 - 4) / 2 + 1};
  return {1, 1, 0, 1};
}

// Row-wise multiply-sum instead of a GEMM: the GEMM kernel blocks rows, so a
// sample's score could depend on its batch position in the last bits.
torch::Tensor linear_head(const nn::Linear& head, const torch::Tensor& features) {
  return (features.flatten(1) * head->weight).sum(1) + head->bias;
}

}  // namespace

int CriticConfig::image_depth() const { return log2_floor(resolution / static_cast<int>(kLatentExtent)); }

int CriticConfig::resolved_video_depth() const {
  return video_depth > 0 ? video_depth : std::min(5, log2_floor(resolution / 2));
}

void CriticConfig::validate() const {
  if (!is_power_of_two(resolution) || resolution < 8)
    throw Error(Errc::ConfigMismatch, "critic resolution must be a power of two >= 8");
  if (frames < 1 || channels < 1 || base < 1 || resolved_video_depth() < 1)
    throw Error(Errc::ConfigMismatch, "non-positive size in critic config " + describe());
}

std::string CriticConfig::describe() const {
  std::ostringstream os;
  os << "r=" << resolution << ",L=" << frames << ",C=" << channels << ",base=" << base
     << ",K_vid=" << resolved_video_depth() << ",slope=" << leaky_slope;
  return os.str();
}

ImageCriticImpl::ImageCriticImpl(CriticConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  int in = cfg_.channels;
  int extent = cfg_.resolution;
  for (int layer = 0; layer < cfg_.image_depth(); ++layer) {
    const int out = cfg_.base << layer;
    extent /= 2;
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1)));
    body_->push_back(nn::LayerNorm(nn::LayerNormOptions({out, extent, extent})));
    body_->push_back(leaky(cfg_.leaky_slope));
    in = out;
  }
  register_module("body", body_);
  head_ = register_module("head", nn::Linear(in * extent * extent, 1));
}

torch::Tensor ImageCriticImpl::forward(const torch::Tensor& x) {
  return linear_head(head_, body_->forward(x));
}

VideoCriticImpl::VideoCriticImpl(CriticConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int depth = cfg_.resolved_video_depth();
  int in = cfg_.channels;
  int t = cfg_.frames, s = cfg_.resolution;
  extents_.emplace_back(t, s);
  for (int layer = 0; layer < depth; ++layer) {
    const int out = cfg_.base << layer;
    const auto ts = axis_step(t);
    const auto ss = axis_step(s);
    t = ts.out;
    s = ss.out;
    extents_.emplace_back(t, s);
    body_->push_back(nn::Conv3d(nn::Conv3dOptions(in, out, {ts.kernel, ss.kernel, ss.kernel})
                                    .stride({ts.stride, ss.stride, ss.stride})
                                    .padding({ts.padding, ss.padding, ss.padding})));
    if (layer + 1 < depth) {
      body_->push_back(nn::LayerNorm(nn::LayerNormOptions({out, t, s, s})));
      body_->push_back(leaky(cfg_.leaky_slope));
    }
    in = out;
  }
  register_module("body", body_);
  head_ = register_module("head", nn::Linear(in * t * s * s, 1));
}

torch::Tensor VideoCriticImpl::forward(const torch::Tensor& y) {
  return linear_head(head_, body_->forward(y));
}

CriticScore critic_image(ImageCritic& net, const ImageBatch& x) {
  const auto& cfg = net->config();
  if (x.resolution() != cfg.resolution || x.channels() != cfg.channels)
    throw Error(Errc::ConfigMismatch, "image batch does not match critic " + cfg.describe());
  return {net->forward(x.data)};
}

CriticScore critic_video(VideoCritic& net, const ClipBatch& y) {
  const auto& cfg = net->config();
  if (y.resolution() != cfg.resolution || y.channels() != cfg.channels || y.frames() != cfg.frames)
    throw Error(Errc::ConfigMismatch, "clip batch does not match critic " + cfg.describe());
  return {net->forward(y.data)};
}

ScoreFn score_fn(ImageCritic& net) {
  return [net](const torch::Tensor& x) mutable { return critic_image(net, ImageBatch(x)).values; };
}

ScoreFn score_fn(VideoCritic& net) {
  return [net](const torch::Tensor& y) mutable { return critic_video(net, ClipBatch(y)).values; };
}

torch::Tensor interpolate_samples(const torch::Tensor& real, const torch::Tensor& fake, const torch::Tensor& eps) {
  if (!real.sizes().equals(fake.sizes()) || real.dim() < 1)
    throw Error(Errc::ShapeMismatch, "real and fake samples differ in shape");
  if (eps.dim() != 1 || eps.size(0) != real.size(0))
    throw Error(Errc::ShapeMismatch, "need one interpolation weight per sample");
  std::vector<std::int64_t> shape(static_cast<std::size_t>(real.dim()), 1);
  shape[0] = real.size(0);
  const auto w = eps.to(real.options()).view(shape);
  return w * real + (1 - w) * fake;
}

torch::Tensor critic_gradient_norms(const ScoreFn& critic, const torch::Tensor& x_hat) {
  auto input = x_hat.requires_grad() ? x_hat : x_hat.detach().requires_grad_(true);
  auto scores = critic(input);
  torch::Tensor grad;
  if (scores.requires_grad()) {
    grad = torch::autograd::grad({scores.sum()}, {input}, /*grad_outputs=*/{}, /*retain_graph=*/true,
                                 /*create_graph=*/true, /*allow_unused=*/true)[0];
  }
  if (!grad.defined()) grad = torch::zeros_like(input);
  return torch::linalg_vector_norm(grad.flatten(1), 2, {1});
}

torch::Tensor gradient_penalty(const ScoreFn& critic, const torch::Tensor& x_hat, double lambda) {
  auto norms = critic_gradient_norms(critic, x_hat);
  if (!torch::isfinite(norms.detach()).all().item<bool>())
    throw Error(Errc::NonFiniteGradient, "critic input gradient is not finite");
  return lambda * (norms - 1).pow(2).mean();
}

}  // namespace facecycle
