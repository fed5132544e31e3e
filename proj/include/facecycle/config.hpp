#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "facecycle/critics.hpp"
#include "facecycle/losses.hpp"
#include "facecycle/translators.hpp"

namespace facecycle {

/// model1: no identity term; model2: pixel identity; model3: embedding
/// identity; videogen: noise-to-clip generator against the clip critic only.
enum class ModelKind { Model1, Model2, Model3, VideoGen };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct TrainConfig {
  int resolution = 64;
  int frames = 32;
  int base_channels = 64;
  int residual_blocks = 3;
  ModelKind model = ModelKind::Model1;
  double lambda_gp = 10.0;
  double gamma_cycle = 1000.0;
  double omega_id = 100.0;
  double learning_rate = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  int n_critic = 5;
  int batch_size = 16;
  std::int64_t iterations = 50000;
  std::uint64_t seed = 0;
  std::string image_data;
  std::string clip_data;
  std::string run_dir = "run";
  std::string embedder = "builtin";
  std::int64_t checkpoint_every = 1000;
  std::int64_t sample_every = 500;

  IdentityMode id_mode() const;
  LossWeights weights() const;
  TranslatorConfig translator() const;
  CriticConfig critic() const;

  /// Throws InvalidConfig / ConfigMismatch.
  void validate() const;

  /// Hash over the fields that determine parameter shapes.
  std::uint64_t architecture_fingerprint() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::filesystem::path& path);

std::string fingerprint_hex(std::uint64_t fp);

}  // namespace facecycle
