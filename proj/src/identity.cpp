#include "facecycle/identity.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

torch::Tensor normalize_rows(const torch::Tensor& v, double floor) {
  const auto stabilizer = torch::full({v.size(0), 1}, floor, v.options());
  const auto padded = torch::cat({v, stabilizer}, 1);
  return padded / padded.pow(2).sum(1, /*keepdim=*/true).sqrt();
}

torch::Tensor luminance(const torch::Tensor& x) {
  if (x.size(1) == 3) {
    const auto w = torch::tensor({0.299, 0.587, 0.114}, x.options()).view({1, 3, 1, 1});
    return (x * w).sum(1, /*keepdim=*/true);
  }
  return x.mean(1, /*keepdim=*/true);
}

void check_finite(const torch::Tensor& e) {
  if (!torch::isfinite(e.detach()).all().item<bool>()) throw Error(Errc::EmbedderFailure, "non-finite embedding");
}

}  // namespace

torch::Tensor BuiltinEmbedder::embed(const ImageBatch& x) const {
  const auto r = x.resolution();
  if (r < 4 || r % 4 != 0)
    throw Error(Errc::ResolutionUnsupported, "builtin embedder needs r divisible by 4, got " + std::to_string(r));
  const auto color = x.data.mean({2, 3});
  const auto pooled = torch::avg_pool2d(luminance(x.data), {r / 4, r / 4}).flatten(1);
  auto e = normalize_rows(torch::cat({color, pooled}, 1), kNormFloor);
  check_finite(e);
  return e;
}

ExternalEmbedder ExternalEmbedder::load(const fs::path& weights) {
  fs::path manifest_path = weights;
  manifest_path += ".json";
  std::ifstream mf(manifest_path);
  if (!mf) throw Error(Errc::WeightLoadError, "missing manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw Error(Errc::WeightLoadError, std::string("bad manifest: ") + e.what());
  }
  std::ifstream wf(weights, std::ios::binary | std::ios::ate);
  if (!wf) throw Error(Errc::WeightLoadError, "missing weight blob " + weights.string());
  const auto bytes = static_cast<std::size_t>(wf.tellg());
  if (bytes % sizeof(float) != 0) throw Error(Errc::WeightLoadError, "weight blob size is not a float multiple");
  std::vector<float> raw(bytes / sizeof(float));
  wf.seekg(0);
  wf.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!wf) throw Error(Errc::WeightLoadError, "short read on " + weights.string());
  return ExternalEmbedder(std::move(manifest), std::move(raw));
}

ExternalEmbedder::ExternalEmbedder(json manifest, std::vector<float> weights)
    : manifest_(std::move(manifest)), raw_(std::move(weights)) {
  static_assert(std::endian::native == std::endian::little, "weight blobs are little-endian");
  try {
    if (manifest_.at("format_version").get<int>() != kFormatVersion)
      throw Error(Errc::WeightLoadError, "unsupported embedder format version");
    embedding_dim_ = manifest_.at("embedding_dim").get<int>();
    input_resolution_ = manifest_.at("input_resolution").get<int>();
    input_channels_ = manifest_.value("input_channels", 3);
    std::size_t offset = 0;
    auto take = [&](std::vector<std::int64_t> shape) {
      std::int64_t n = 1;
      for (auto s : shape) n *= s;
      if (offset + static_cast<std::size_t>(n) > raw_.size())
        throw Error(Errc::WeightLoadError, "weight blob shorter than the manifest declares");
      auto t = torch::from_blob(raw_.data() + offset, shape, torch::kFloat32).clone();
      offset += static_cast<std::size_t>(n);
      return t;
    };
    for (const auto& entry : manifest_.at("layers")) {
      Layer layer;
      layer.type = entry.at("type").get<std::string>();
      if (layer.type == "conv2d") {
        const int in = entry.at("in"), out = entry.at("out");
        layer.kernel = entry.at("kernel");
        layer.stride = entry.value("stride", 1);
        layer.padding = entry.value("padding", 0);
        layer.weight = take({out, in, layer.kernel, layer.kernel});
        if (entry.value("bias", true)) layer.bias = take({out});
      } else if (layer.type == "linear") {
        const int in = entry.at("in"), out = entry.at("out");
        layer.weight = take({out, in});
        if (entry.value("bias", true)) layer.bias = take({out});
      } else if (layer.type == "leaky_relu") {
        layer.slope = entry.value("slope", 0.2);
      } else if (layer.type == "avgpool") {
        layer.kernel = entry.at("kernel");
      } else if (layer.type != "relu" && layer.type != "tanh" && layer.type != "flatten") {
        throw Error(Errc::WeightLoadError, "unknown layer type '" + layer.type + "'");
      }
      layers_.push_back(std::move(layer));
    }
    if (offset != raw_.size()) throw Error(Errc::WeightLoadError, "weight blob longer than the manifest declares");
  } catch (const json::exception& e) {
    throw Error(Errc::WeightLoadError, std::string("bad manifest: ") + e.what());
  }
}

void ExternalEmbedder::save(const fs::path& weights) const {
  fs::path manifest_path = weights;
  manifest_path += ".json";
  std::ofstream mf(manifest_path);
  mf << manifest_.dump(2) << '\n';
  std::ofstream wf(weights, std::ios::binary);
  wf.write(reinterpret_cast<const char*>(raw_.data()), static_cast<std::streamsize>(raw_.size() * sizeof(float)));
  if (!mf || !wf) throw Error(Errc::IoError, "cannot write embedder " + weights.string());
}

torch::Tensor ExternalEmbedder::embed(const ImageBatch& x) const {
  if (x.resolution() != input_resolution_ || x.channels() != input_channels_)
    throw Error(Errc::ResolutionUnsupported, "external embedder expects C=" + std::to_string(input_channels_) +
                                                 ", r=" + std::to_string(input_resolution_));
  auto h = x.data;
  try {
    for (const auto& layer : layers_) {
      if (layer.type == "conv2d") {
        h = torch::conv2d(h, layer.weight.to(h.dtype()), layer.bias.defined() ? layer.bias.to(h.dtype()) : torch::Tensor(),
                          layer.stride, layer.padding);
      } else if (layer.type == "linear") {
        h = torch::linear(h, layer.weight.to(h.dtype()), layer.bias.defined() ? layer.bias.to(h.dtype()) : torch::Tensor());
      } else if (layer.type == "relu") {
        h = torch::relu(h);
      } else if (layer.type == "leaky_relu") {
        h = torch::leaky_relu(h, layer.slope);
      } else if (layer.type == "tanh") {
        h = torch::tanh(h);
      } else if (layer.type == "avgpool") {
        h = torch::avg_pool2d(h, layer.kernel);
      } else if (layer.type == "flatten") {
        h = h.flatten(1);
      }
    }
  } catch (const c10::Error& e) {
    throw Error(Errc::EmbedderFailure, e.what_without_backtrace());
  }
  if (h.dim() != 2 || h.size(1) != embedding_dim_)
    throw Error(Errc::EmbedderFailure, "network output does not have embedding_dim columns");
  const auto e = h / h.pow(2).sum(1, true).clamp_min(BuiltinEmbedder::kNormFloor * BuiltinEmbedder::kNormFloor).sqrt();
  check_finite(e);
  return e;
}

std::shared_ptr<const Embedder> make_embedder(const std::string& name) {
  if (name == "builtin") return std::make_shared<BuiltinEmbedder>();
  if (name.rfind("file:", 0) == 0) return std::make_shared<ExternalEmbedder>(ExternalEmbedder::load(name.substr(5)));
  throw Error(Errc::InvalidConfig, "embedder must be 'builtin' or 'file:PATH', got '" + name + "'");
}

torch::Tensor clip_image_distance(const Embedder& embedder, const torch::Tensor& image, const torch::Tensor& clip) {
  if (image.dim() != 3 || clip.dim() != 4 || image.size(0) != clip.size(0) || image.size(1) != clip.size(2) ||
      image.size(2) != clip.size(3))
    throw Error(Errc::ShapeMismatch, "image (C, r, r) and clip (C, L, r, r) do not pair");
  const auto e_image = embedder.embed(ImageBatch(image.unsqueeze(0)));
  const auto e_frames = embedder.embed(ImageBatch(clip.transpose(0, 1)));
  return (e_frames - e_image).pow(2).sum(1).mean();
}

double facenet_score(const Embedder& embedder, const std::vector<EvalPair>& pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyEvaluationSet, "no pairs to score");
  torch::NoGradGuard no_grad;
  double sum = 0.0;
  for (const auto& p : pairs) sum += clip_image_distance(embedder, p.image, p.clip).item<double>();
  return sum / static_cast<double>(pairs.size());
}

}  // namespace facecycle
