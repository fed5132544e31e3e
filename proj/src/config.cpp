#include "facecycle/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "facecycle/errors.hpp"

namespace facecycle {

using nlohmann::json;

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Model1: return "model1";
    case ModelKind::Model2: return "model2";
    case ModelKind::Model3: return "model3";
    case ModelKind::VideoGen: return "videogen";
  }
  return "model1";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "model1") return ModelKind::Model1;
  if (name == "model2") return ModelKind::Model2;
  if (name == "model3") return ModelKind::Model3;
  if (name == "videogen") return ModelKind::VideoGen;
  throw Error(Errc::InvalidConfig, "unknown model '" + name + "'");
}

IdentityMode TrainConfig::id_mode() const {
  switch (model) {
    case ModelKind::Model2: return IdentityMode::Pixel;
    case ModelKind::Model3: return IdentityMode::Embed;
    default: return IdentityMode::None;
  }
}

LossWeights TrainConfig::weights() const { return {lambda_gp, gamma_cycle, omega_id, id_mode()}; }

TranslatorConfig TrainConfig::translator() const {
  TranslatorConfig t;
  t.resolution = resolution;
  t.frames = frames;
  t.channels = 3;
  t.base = base_channels;
  t.residual_blocks = residual_blocks;
  return t;
}

CriticConfig TrainConfig::critic() const {
  CriticConfig c;
  c.resolution = resolution;
  c.frames = frames;
  c.channels = 3;
  c.base = base_channels;
  return c;
}

void TrainConfig::validate() const {
  translator().validate();
  critic().validate();
  weights().validate();
  if (learning_rate <= 0 || beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw Error(Errc::InvalidConfig, "optimizer settings out of range");
  if (n_critic < 1 || batch_size < 1 || iterations < 0 || checkpoint_every < 1 || sample_every < 1)
    throw Error(Errc::InvalidConfig, "counts must be positive");
}

std::uint64_t TrainConfig::architecture_fingerprint() const {
  const std::string s = std::string(to_string(model)) + "|" + translator().describe() + "|" + critic().describe();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json to_json(const TrainConfig& c) {
  return {
      {"resolution", c.resolution},
      {"frames", c.frames},
      {"base_channels", c.base_channels},
      {"residual_blocks", c.residual_blocks},
      {"model", to_string(c.model)},
      {"lambda_gp", c.lambda_gp},
      {"gamma_cycle", c.gamma_cycle},
      {"omega_id", c.omega_id},
      {"learning_rate", c.learning_rate},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"n_critic", c.n_critic},
      {"batch_size", c.batch_size},
      {"iterations", c.iterations},
      {"seed", c.seed},
      {"image_data", c.image_data},
      {"clip_data", c.clip_data},
      {"run_dir", c.run_dir},
      {"embedder", c.embedder},
      {"checkpoint_every", c.checkpoint_every},
      {"sample_every", c.sample_every},
  };
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
  TrainConfig c;
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!defaults.contains(key)) throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("resolution", c.resolution);
    get("frames", c.frames);
    get("base_channels", c.base_channels);
    get("residual_blocks", c.residual_blocks);
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    get("lambda_gp", c.lambda_gp);
    get("gamma_cycle", c.gamma_cycle);
    get("omega_id", c.omega_id);
    get("learning_rate", c.learning_rate);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("n_critic", c.n_critic);
    get("batch_size", c.batch_size);
    get("iterations", c.iterations);
    get("seed", c.seed);
    get("image_data", c.image_data);
    get("clip_data", c.clip_data);
    get("run_dir", c.run_dir);
    get("embedder", c.embedder);
    get("checkpoint_every", c.checkpoint_every);
    get("sample_every", c.sample_every);
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("bad config value: ") + e.what());
  }
  return c;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read config " + path.string());
  try {
    return train_config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw Error(Errc::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

}  // namespace facecycle
