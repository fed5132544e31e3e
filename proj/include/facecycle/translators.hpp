#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "facecycle/rng.hpp"
#include "facecycle/tensors.hpp"

namespace facecycle {

/// Architecture of the four translator sub-networks.
struct TranslatorConfig {
  int resolution = 64;
  int frames = 32;
  int channels = 3;
  int base = 64;
  int residual_blocks = 3;
  /// Upsampling schedule of the video decoder, first layer first. Empty means
  /// the default (L / 2^(K-1), 2, ..., 2).
  std::vector<int> temporal_strides;

  /// K = log2(r / 4).
  int depth() const;
  /// D = base * 2^(K-1).
  int latent_channels() const;
  std::vector<int> decoder_strides() const;
  std::vector<int> encoder_strides() const;

  /// Throws ConfigMismatch when the invariants do not hold.
  void validate() const;
  std::string describe() const;
  std::uint64_t fingerprint() const;
};

/// Conv positions (1-based) after which a group of residual blocks sits.
std::vector<int> residual_insertion_points(int depth);

class ResidualBlockImpl : public torch::nn::Module {
 public:
  explicit ResidualBlockImpl(int channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
  torch::nn::BatchNorm2d norm1_{nullptr}, norm2_{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Downsampling 2D encoder: (B, C, r, r) -> (B, D, 4, 4).
class ImageEncoderImpl : public torch::nn::Module {
 public:
  explicit ImageEncoderImpl(TranslatorConfig cfg);
  torch::Tensor forward(const torch::Tensor& x);
  const TranslatorConfig& config() const { return cfg_; }

 private:
  TranslatorConfig cfg_;
  torch::nn::Sequential body_;
};
TORCH_MODULE(ImageEncoder);

/// Fractionally-strided 3D decoder: (B, D, 4, 4) -> (B, C, L, r, r), tanh head.
class VideoDecoderImpl : public torch::nn::Module {
 public:
  explicit VideoDecoderImpl(TranslatorConfig cfg);
  torch::Tensor forward(const torch::Tensor& z);
  const TranslatorConfig& config() const { return cfg_; }

 private:
  TranslatorConfig cfg_;
  torch::nn::Sequential body_;
};
TORCH_MODULE(VideoDecoder);

/// Strided 3D encoder: (B, C, L, r, r) -> (B, D, 4, 4).
class VideoEncoderImpl : public torch::nn::Module {
 public:
  explicit VideoEncoderImpl(TranslatorConfig cfg);
  torch::Tensor forward(const torch::Tensor& y);
  const TranslatorConfig& config() const { return cfg_; }

 private:
  TranslatorConfig cfg_;
  torch::nn::Sequential body_;
};
TORCH_MODULE(VideoEncoder);

/// Residual stack then fractionally-strided 2D decoder: (B, D, 4, 4) -> (B, C, r, r).
class ImageDecoderImpl : public torch::nn::Module {
 public:
  explicit ImageDecoderImpl(TranslatorConfig cfg);
  torch::Tensor forward(const torch::Tensor& z);
  const TranslatorConfig& config() const { return cfg_; }

 private:
  TranslatorConfig cfg_;
  torch::nn::Sequential body_;
};
TORCH_MODULE(ImageDecoder);

LatentCode encode_image(ImageEncoder& net, const ImageBatch& x);
ClipBatch decode_video(VideoDecoder& net, const LatentCode& z);
LatentCode encode_video(VideoEncoder& net, const ClipBatch& y);
ImageBatch decode_image(ImageDecoder& net, const LatentCode& z);

/// G_Y: image -> video.
struct VideoTranslator {
  ImageEncoder encoder{nullptr};
  VideoDecoder decoder{nullptr};

  explicit VideoTranslator(const TranslatorConfig& cfg) : encoder(cfg), decoder(cfg) {}
  std::vector<torch::Tensor> parameters() const;
};

/// G_X: video -> image.
struct ImageTranslator {
  VideoEncoder encoder{nullptr};
  ImageDecoder decoder{nullptr};

  explicit ImageTranslator(const TranslatorConfig& cfg) : encoder(cfg), decoder(cfg) {}
  std::vector<torch::Tensor> parameters() const;
};

ClipBatch translate_image_to_video(VideoTranslator& g_y, const ImageBatch& x);
ImageBatch translate_video_to_image(ImageTranslator& g_x, const ClipBatch& y);

/// Noise-to-clip baseline: the video decoder driven by N(0, 1) codes.
ClipBatch generate_video_from_noise(VideoDecoder& net, const torch::Tensor& noise);

std::int64_t parameter_count(const torch::nn::Module& module);

/// Conv/linear weights ~ N(0, 0.02), biases 0, normalization scale 1 / offset 0.
void initialize_parameters(torch::nn::Module& module, Rng& rng);

}  // namespace facecycle
