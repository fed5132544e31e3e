#include <cstdio>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "facecycle/errors.hpp"
#include "facecycle/trainer.hpp"

namespace facecycle {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path checkpoint_dir(const fs::path& run_dir, std::int64_t iteration) {
  return run_dir / ("ckpt_" + std::to_string(iteration));
}

namespace {

json read_meta(const fs::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw Error(Errc::IoError, "no meta.json in " + dir.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::CheckpointMismatch, std::string("unreadable meta.json: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const fs::path& dir) {
  // Written next to the target and renamed, so a crash never leaves a
  // half-written checkpoint under the final name.
  fs::path staging = dir;
  staging += ".partial";
  std::error_code ec;
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + staging.string() + ": " + ec.message());
  try {
    for (const auto& [name, module] : state.networks()) {
      torch::serialize::OutputArchive archive;
      module->save(archive);
      archive.save_to((staging / (name + ".pt")).string());
    }
    for (const auto& [name, optimizer] : state.optimizers()) {
      torch::serialize::OutputArchive archive;
      optimizer->save(archive);
      archive.save_to((staging / (name + ".pt")).string());
    }
  } catch (const c10::Error& e) {
    throw Error(Errc::IoError, e.what_without_backtrace());
  }
  const json meta = {
      {"format_version", kCheckpointFormatVersion},
      {"iteration", state.iteration},
      {"config_fingerprint", fingerprint_hex(cfg.architecture_fingerprint())},
      {"critic_updates", state.critic_updates},
      {"generator_updates", state.generator_updates},
      {"wall_seconds", state.wall_seconds},
      {"rng", {{"seed", state.rng.seed()}, {"counter", state.rng.counter()}}},
      {"config", to_json(cfg)},
  };
  {
    std::ofstream out(staging / "meta.json");
    out << meta.dump(2) << '\n';
    if (!out) throw Error(Errc::IoError, "cannot write meta.json in " + staging.string());
  }
  fs::remove_all(dir, ec);
  fs::rename(staging, dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot finalize " + dir.string() + ": " + ec.message());
}

TrainConfig checkpoint_config(const fs::path& dir) {
  const auto meta = read_meta(dir);
  if (meta.value("format_version", 0) != kCheckpointFormatVersion)
    throw Error(Errc::CheckpointMismatch, "unsupported checkpoint format in " + dir.string());
  auto cfg = train_config_from_json(meta.at("config"));
  if (fingerprint_hex(cfg.architecture_fingerprint()) != meta.at("config_fingerprint").get<std::string>())
    throw Error(Errc::CheckpointMismatch, "stored config does not match the stored fingerprint");
  return cfg;
}

void load_checkpoint(TrainState& state, const TrainConfig& cfg, const fs::path& dir) {
  const auto meta = read_meta(dir);
  if (meta.value("format_version", 0) != kCheckpointFormatVersion)
    throw Error(Errc::CheckpointMismatch, "unsupported checkpoint format in " + dir.string());
  const auto expected = fingerprint_hex(cfg.architecture_fingerprint());
  const auto stored = meta.at("config_fingerprint").get<std::string>();
  if (stored != expected)
    throw Error(Errc::CheckpointMismatch, "checkpoint fingerprint " + stored + " differs from config " + expected);
  try {
    for (const auto& [name, module] : state.networks()) {
      torch::serialize::InputArchive archive;
      archive.load_from((dir / (name + ".pt")).string());
      module->load(archive);
    }
    for (const auto& [name, optimizer] : state.optimizers()) {
      torch::serialize::InputArchive archive;
      archive.load_from((dir / (name + ".pt")).string());
      optimizer->load(archive);
    }
  } catch (const c10::Error& e) {
    throw Error(Errc::CheckpointMismatch, e.what_without_backtrace());
  }
  for (const auto& [name, module] : state.networks()) module->to(state.dtype);
  state.iteration = meta.at("iteration").get<std::int64_t>();
  state.critic_updates = meta.value("critic_updates", std::int64_t{0});
  state.generator_updates = meta.value("generator_updates", std::int64_t{0});
  state.wall_seconds = meta.value("wall_seconds", 0.0);
  state.rng = Rng(meta.at("rng").at("seed").get<std::uint64_t>(), meta.at("rng").at("counter").get<std::uint64_t>());
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  std::optional<fs::path> best;
  long long best_iter = -1;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(run_dir, ec)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("ckpt_", 0) != 0) continue;
    const auto digits = name.substr(5);
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) continue;
    const long long it = std::stoll(digits);
    if (it > best_iter && fs::exists(entry.path() / "meta.json")) {
      best_iter = it;
      best = entry.path();
    }
  }
  return best;
}

}  // namespace facecycle
