#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <torch/torch.h>

#include "facecycle/png_io.hpp"
#include "facecycle/rng.hpp"
#include "facecycle/tensors.hpp"

namespace facecycle {

/// Center crop to r x r then map pixel/127.5 - 1 into [-1, 1]; result is
/// channel-first (C, r, r) float32.
torch::Tensor preprocess_image(const Pixels& raw, int resolution);

/// Inverse map for writing: round((v + 1) * 127.5) clamped to [0, 255].
/// Accepts (C, r, r).
Pixels quantize_image(const torch::Tensor& image);

enum class DatasetKind { Image, Clip };
enum class ClipMode { Train, Eval };

/// Read-only view of a dataset root. `ids` is sorted lexicographically.
struct DatasetHandle {
  DatasetKind kind = DatasetKind::Image;
  std::filesystem::path root;
  std::vector<std::string> ids;
  std::vector<int> identities;  // -1 when the manifest carries no label
  int resolution = 0;
  int clip_len = 0;  // clip kind only

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }

  /// Opens `<root>/manifest.json`.
  static DatasetHandle open(const std::filesystem::path& root);

  /// Same root, restricted to the given positions (kept in index order).
  DatasetHandle subset(const std::vector<std::size_t>& positions) const;

  /// Splits off the last `per_identity` items of every identity label.
  /// Returns (remaining, held_out).
  std::pair<DatasetHandle, DatasetHandle> hold_out(std::size_t per_identity) const;

  std::filesystem::path image_path(std::size_t i) const;
  std::filesystem::path clip_dir(std::size_t i) const;
};

void write_manifest(const DatasetHandle& ds);

/// Number of consecutively numbered frame_%04d.png files starting at 0001.
int count_frames(const std::filesystem::path& clip_dir);

/// First frame of the L-frame window over F stored frames. Train mode draws
/// uniformly from [0, F - L]; eval mode is the center floor((F - L) / 2).
int clip_window_start(int stored_frames, int clip_len, Rng& rng, ClipMode mode);

torch::Tensor load_image(const DatasetHandle& ds, std::size_t i);
torch::Tensor load_image(const std::filesystem::path& png, int resolution);

/// (C, L, r, r) window of a stored clip.
torch::Tensor load_clip(const std::filesystem::path& clip_dir, int clip_len, int resolution, Rng& rng, ClipMode mode);
torch::Tensor load_clip(const DatasetHandle& ds, std::size_t i, Rng& rng, ClipMode mode);

ImageBatch sample_images(const DatasetHandle& ds, std::int64_t batch, Rng& rng);
ClipBatch sample_clips(const DatasetHandle& ds, std::int64_t batch, Rng& rng);

/// Uniform draw with replacement; dispatches on the dataset kind.
std::variant<ImageBatch, ClipBatch> sample_batch(const DatasetHandle& ds, std::int64_t batch, Rng& rng);

struct SynthOptions {
  int identities = 4;
  int images_per = 10;
  int clips_per = 4;
  int resolution = 16;
  int frames = 8;
};

/// Writes `<out>/image_set` and `<out>/clip_set`, each a dataset root with its
/// own manifest. Identities are coded by hue and blob geometry; clips move the
/// identity's blob along a smooth random path.
std::pair<DatasetHandle, DatasetHandle> synth_identity_dataset(const std::filesystem::path& out_dir,
                                                               const SynthOptions& opts, Rng& rng);

}  // namespace facecycle
