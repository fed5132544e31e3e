#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "facecycle/config.hpp"
#include "facecycle/critics.hpp"
#include "facecycle/data.hpp"
#include "facecycle/identity.hpp"
#include "facecycle/rng.hpp"
#include "facecycle/translators.hpp"

namespace facecycle {

struct MetricsRecord {
  std::int64_t iteration = 0;
  double critic_img = 0.0;
  double critic_vid = 0.0;
  double gen_adv_img = 0.0;
  double gen_adv_vid = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double total_gen = 0.0;
  double wall_seconds = 0.0;

  // Not part of metrics.csv: mean Wasserstein estimates (real - fake critic
  // score gap) over the critic updates of this step.
  double gap_img = 0.0;
  double gap_vid = 0.0;
};

std::string metrics_csv_header();
/// Doubles are written with round-trip precision.
std::string metrics_csv_row(const MetricsRecord& r);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

/// Supplies real batches to the trainer. Each critic update and the generator
/// update draw their own batches.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual ImageBatch next_images(Rng& rng) = 0;
  virtual ClipBatch next_clips(Rng& rng) = 0;
};

/// Unpaired uniform sampling with replacement from two datasets.
class DatasetBatchSource final : public BatchSource {
 public:
  DatasetBatchSource(DatasetHandle images, DatasetHandle clips, std::int64_t batch)
      : images_(std::move(images)), clips_(std::move(clips)), batch_(batch) {}
  ImageBatch next_images(Rng& rng) override { return sample_images(images_, batch_, rng); }
  ClipBatch next_clips(Rng& rng) override { return sample_clips(clips_, batch_, rng); }

 private:
  DatasetHandle images_, clips_;
  std::int64_t batch_;
};

/// Always hands out the same pair of batches.
class FixedBatchSource final : public BatchSource {
 public:
  FixedBatchSource(ImageBatch images, ClipBatch clips) : images_(std::move(images)), clips_(std::move(clips)) {}
  ImageBatch next_images(Rng&) override { return images_; }
  ClipBatch next_clips(Rng&) override { return clips_; }

 private:
  ImageBatch images_;
  ClipBatch clips_;
};

/// Everything that evolves during training. Networks that the model kind does
/// not use stay null.
class TrainState {
 public:
  explicit TrainState(const TrainConfig& cfg, torch::Dtype dtype = torch::kFloat32);

  ModelKind kind;
  torch::Dtype dtype;
  std::int64_t iteration = 0;
  std::int64_t critic_updates = 0;
  std::int64_t generator_updates = 0;
  double wall_seconds = 0.0;
  Rng rng;

  std::optional<VideoTranslator> g_y;  // image -> video
  std::optional<ImageTranslator> g_x;  // video -> image
  VideoDecoder noise_generator{nullptr};
  ImageCritic c_x{nullptr};
  VideoCritic c_y{nullptr};

  std::unique_ptr<torch::optim::Adam> opt_g_y, opt_g_x, opt_noise, opt_c_x, opt_c_y;
  std::shared_ptr<const Embedder> embedder;

  /// (name, module) for every instantiated network, in a fixed order.
  std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> networks() const;
  /// (name, optimizer) for every instantiated optimizer, in a fixed order.
  std::vector<std::pair<std::string, torch::optim::Optimizer*>> optimizers() const;
};

/// n_critic critic updates followed by one generator update. Throws
/// NonFiniteLoss naming the offending term.
MetricsRecord train_step(TrainState& state, const TrainConfig& cfg, BatchSource& source);

struct TrainOptions {
  bool resume = false;
  /// Called after every step with the record just appended to metrics.csv.
  std::function<void(const MetricsRecord&)> observer;
};

/// Runs cfg.iterations steps in cfg.run_dir and returns the run directory.
std::filesystem::path train(const TrainConfig& cfg, const TrainOptions& opts = {});

// checkpoint.cpp

inline constexpr int kCheckpointFormatVersion = 1;

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, std::int64_t iteration);
void save_checkpoint(const TrainState& state, const TrainConfig& cfg, const std::filesystem::path& dir);
/// Restores into a state built from `cfg`; throws CheckpointMismatch when the
/// stored architecture fingerprint differs.
void load_checkpoint(TrainState& state, const TrainConfig& cfg, const std::filesystem::path& dir);
/// Config stored alongside the checkpoint.
TrainConfig checkpoint_config(const std::filesystem::path& dir);
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);

// evaluate.cpp

using ImageToVideoFn = std::function<ClipBatch(const ImageBatch&)>;
using VideoToImageFn = std::function<ImageBatch(const ClipBatch&)>;

struct EvalReport {
  double img2vid_score = 0.0;
  double vid2img_score = 0.0;
  std::int64_t samples_img2vid = 0;
  std::int64_t samples_vid2img = 0;
  std::string config_fingerprint;
};

/// Translates the first n_samples items of each dataset (clips through their
/// center window), in index order and chunks of `batch`, and scores both
/// directions with facenet_score.
EvalReport evaluate_translators(const ImageToVideoFn& img2vid, const VideoToImageFn& vid2img,
                                const DatasetHandle& images, const DatasetHandle& clips, const Embedder& embedder,
                                std::int64_t n_samples, std::int64_t batch, int frames);

EvalReport evaluate(const std::filesystem::path& checkpoint, const DatasetHandle& images,
                    const DatasetHandle& clips, const Embedder& embedder, std::int64_t n_samples);

void write_report(const EvalReport& report, const std::filesystem::path& path);

enum class Direction { ImageToVideo, VideoToImage };
Direction parse_direction(const std::string& s);

/// img2vid: writes frame_0001.png.. and montage.png into `out` (a directory).
/// vid2img: writes one PNG at `out` if it ends in .png, else `out`/out.png.
/// Returns the files written.
std::vector<std::filesystem::path> translate_files(const std::filesystem::path& checkpoint, Direction direction,
                                                   const std::filesystem::path& input,
                                                   const std::filesystem::path& out);

/// Frames laid out left to right, wrapping after `columns`.
Pixels montage(const torch::Tensor& clip, int columns = 8);

}  // namespace facecycle
