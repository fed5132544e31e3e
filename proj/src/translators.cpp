#include "facecycle/translators.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace nn = torch::nn;

namespace {

struct TemporalGeometry {
  int kernel;
  int padding;
};

// Kernel/padding that make a stride-s (transposed) convolution map extent n
// exactly to n*s (or n/s).
TemporalGeometry temporal_geometry(int stride) {
  if (stride == 1) return {3, 1};
  if (stride == 2) return {4, 1};
  return {stride, 0};
}

nn::BatchNormOptions batch_norm(int channels) { return nn::BatchNormOptions(channels).track_running_stats(false); }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

[[noreturn]] void mismatch(const std::string& what) { throw Error(Errc::ConfigMismatch, what); }

}  // namespace

int TranslatorConfig::depth() const {
  int k = 0;
  for (int extent = resolution; extent > static_cast<int>(kLatentExtent); extent /= 2) ++k;
  return k;
}

int TranslatorConfig::latent_channels() const { return base << (depth() - 1); }

std::vector<int> TranslatorConfig::decoder_strides() const {
  if (!temporal_strides.empty()) return temporal_strides;
  const int k = depth();
  std::vector<int> s(static_cast<std::size_t>(k), 2);
  s[0] = frames >> (k - 1);
  return s;
}

std::vector<int> TranslatorConfig::encoder_strides() const {
  auto s = decoder_strides();
  std::reverse(s.begin(), s.end());
  return s;
}

void TranslatorConfig::validate() const {
  if (!is_power_of_two(resolution) || resolution < 8)
    mismatch("resolution " + std::to_string(resolution) + " is not a power of two >= 8");
  if (channels < 1 || base < 1 || residual_blocks < 0 || frames < 1) mismatch("non-positive size in " + describe());
  const int k = depth();
  if (temporal_strides.empty() && (frames % (1 << (k - 1)) != 0))
    mismatch("frames " + std::to_string(frames) + " not divisible by 2^(K-1) = " + std::to_string(1 << (k - 1)));
  const auto s = decoder_strides();
  if (static_cast<int>(s.size()) != k) mismatch("need exactly K temporal strides");
  if (std::any_of(s.begin(), s.end(), [](int v) { return v < 1; })) mismatch("temporal strides must be positive");
  if (std::accumulate(s.begin(), s.end(), 1, std::multiplies<>()) != frames)
    mismatch("temporal strides do not multiply to the clip length");
}

std::string TranslatorConfig::describe() const {
  std::ostringstream os;
  os << "r=" << resolution << ",L=" << frames << ",C=" << channels << ",base=" << base
     << ",n_res=" << residual_blocks << ",strides=";
  for (int s : decoder_strides()) os << s << '.';
  return os.str();
}

std::uint64_t TranslatorConfig::fingerprint() const { return fnv1a(describe()); }

std::vector<int> residual_insertion_points(int depth) {
  if (depth >= 4) return {3, 4};
  if (depth == 1) return {1};
  return {depth - 1, depth};
}

ResidualBlockImpl::ResidualBlockImpl(int channels)
    : conv1_(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
      conv2_(nn::Conv2dOptions(channels, channels, 3).padding(1).bias(false)),
      norm1_(batch_norm(channels)),
      norm2_(batch_norm(channels)) {
  register_module("conv1", conv1_);
  register_module("norm1", norm1_);
  register_module("conv2", conv2_);
  register_module("norm2", norm2_);
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = torch::relu(norm1_->forward(conv1_->forward(x)));
  return x + norm2_->forward(conv2_->forward(h));
}

ImageEncoderImpl::ImageEncoderImpl(TranslatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int k = cfg_.depth();
  const auto points = residual_insertion_points(k);
  int in = cfg_.channels;
  for (int layer = 1; layer <= k; ++layer) {
    const int out = cfg_.base << (layer - 1);
    body_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(2).padding(1).bias(false)));
    body_->push_back(nn::BatchNorm2d(batch_norm(out)));
    body_->push_back(nn::Functional(torch::relu));
    if (std::find(points.begin(), points.end(), layer) != points.end())
      for (int b = 0; b < cfg_.residual_blocks; ++b) body_->push_back(ResidualBlock(out));
    in = out;
  }
  register_module("body", body_);
}

torch::Tensor ImageEncoderImpl::forward(const torch::Tensor& x) { return body_->forward(x); }

VideoDecoderImpl::VideoDecoderImpl(TranslatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto strides = cfg_.decoder_strides();
  const int k = cfg_.depth();
  int in = cfg_.latent_channels();
  for (int layer = 0; layer < k; ++layer) {
    const bool last = layer == k - 1;
    const int out = last ? cfg_.channels : in / 2;
    const auto t = temporal_geometry(strides[static_cast<std::size_t>(layer)]);
    body_->push_back(nn::ConvTranspose3d(nn::ConvTranspose3dOptions(in, out, {t.kernel, 4, 4})
                                             .stride({strides[static_cast<std::size_t>(layer)], 2, 2})
                                             .padding({t.padding, 1, 1})
                                             .bias(last)));
    if (last) {
      body_->push_back(nn::Functional(torch::tanh));
    } else {
      body_->push_back(nn::BatchNorm3d(batch_norm(out)));
      body_->push_back(nn::Functional(torch::relu));
    }
    in = out;
  }
  register_module("body", body_);
}

torch::Tensor VideoDecoderImpl::forward(const torch::Tensor& z) { return body_->forward(z.unsqueeze(2)); }

VideoEncoderImpl::VideoEncoderImpl(TranslatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const auto strides = cfg_.encoder_strides();
  const int k = cfg_.depth();
  int in = cfg_.channels;
  for (int layer = 0; layer < k; ++layer) {
    const int out = cfg_.base << layer;
    const auto t = temporal_geometry(strides[static_cast<std::size_t>(layer)]);
    body_->push_back(nn::Conv3d(nn::Conv3dOptions(in, out, {t.kernel, 4, 4})
                                    .stride({strides[static_cast<std::size_t>(layer)], 2, 2})
                                    .padding({t.padding, 1, 1})
                                    .bias(false)));
    body_->push_back(nn::BatchNorm3d(batch_norm(out)));
    body_->push_back(nn::Functional(torch::relu));
    in = out;
  }
  register_module("body", body_);
}

torch::Tensor VideoEncoderImpl::forward(const torch::Tensor& y) { return body_->forward(y).squeeze(2); }

ImageDecoderImpl::ImageDecoderImpl(TranslatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int k = cfg_.depth();
  int in = cfg_.latent_channels();
  for (int b = 0; b < cfg_.residual_blocks; ++b) body_->push_back(ResidualBlock(in));
  for (int layer = 0; layer < k; ++layer) {
    const bool last = layer == k - 1;
    const int out = last ? cfg_.channels : in / 2;
    body_->push_back(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1).bias(last)));
    if (last) {
      body_->push_back(nn::Functional(torch::tanh));
    } else {
      body_->push_back(nn::BatchNorm2d(batch_norm(out)));
      body_->push_back(nn::Functional(torch::relu));
    }
    in = out;
  }
  register_module("body", body_);
}

torch::Tensor ImageDecoderImpl::forward(const torch::Tensor& z) { return body_->forward(z); }

namespace {

void check_image(const TranslatorConfig& cfg, const ImageBatch& x) {
  if (!is_power_of_two(x.resolution()) || x.resolution() != cfg.resolution || x.channels() != cfg.channels)
    mismatch("image batch (C=" + std::to_string(x.channels()) + ", r=" + std::to_string(x.resolution()) +
             ") does not match " + cfg.describe());
}

void check_clip(const TranslatorConfig& cfg, const ClipBatch& y) {
  if (y.resolution() != cfg.resolution || y.channels() != cfg.channels || y.frames() != cfg.frames)
    mismatch("clip batch (C=" + std::to_string(y.channels()) + ", L=" + std::to_string(y.frames()) +
             ", r=" + std::to_string(y.resolution()) + ") does not match " + cfg.describe());
}

void check_latent(const TranslatorConfig& cfg, const torch::Tensor& z) {
  if (z.dim() != 4 || z.size(1) != cfg.latent_channels() || z.size(2) != kLatentExtent ||
      z.size(3) != kLatentExtent)
    mismatch("latent code does not match " + cfg.describe());
}

}  // namespace

LatentCode encode_image(ImageEncoder& net, const ImageBatch& x) {
  check_image(net->config(), x);
  return LatentCode(net->forward(x.data));
}

ClipBatch decode_video(VideoDecoder& net, const LatentCode& z) {
  check_latent(net->config(), z.data);
  return ClipBatch(net->forward(z.data));
}

LatentCode encode_video(VideoEncoder& net, const ClipBatch& y) {
  check_clip(net->config(), y);
  return LatentCode(net->forward(y.data));
}

ImageBatch decode_image(ImageDecoder& net, const LatentCode& z) {
  check_latent(net->config(), z.data);
  return ImageBatch(net->forward(z.data));
}

std::vector<torch::Tensor> VideoTranslator::parameters() const {
  auto p = encoder->parameters();
  auto q = decoder->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

std::vector<torch::Tensor> ImageTranslator::parameters() const {
  auto p = encoder->parameters();
  auto q = decoder->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

ClipBatch translate_image_to_video(VideoTranslator& g_y, const ImageBatch& x) {
  return decode_video(g_y.decoder, encode_image(g_y.encoder, x));
}

ImageBatch translate_video_to_image(ImageTranslator& g_x, const ClipBatch& y) {
  return decode_image(g_x.decoder, encode_video(g_x.encoder, y));
}

ClipBatch generate_video_from_noise(VideoDecoder& net, const torch::Tensor& noise) {
  check_latent(net->config(), noise);
  return ClipBatch(net->forward(noise));
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

void initialize_parameters(torch::nn::Module& module, Rng& rng) {
  torch::NoGradGuard no_grad;
  for (const auto& sub : module.modules()) {
    const bool is_norm = sub->as<nn::BatchNorm2d>() || sub->as<nn::BatchNorm3d>() || sub->as<nn::LayerNorm>();
    for (auto& item : sub->named_parameters(/*recurse=*/false)) {
      auto& p = item.value();
      if (item.key() == "bias") {
        p.zero_();
      } else if (is_norm) {
        p.fill_(1.0);
      } else {
        p.copy_(rng.normal(p.sizes(), p.options()) * 0.02);
      }
    }
  }
}

}  // namespace facecycle
