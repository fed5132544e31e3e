#include "facecycle/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "facecycle/errors.hpp"

namespace facecycle {

namespace fs = std::filesystem;
using nlohmann::json;

torch::Tensor preprocess_image(const Pixels& raw, int resolution) {
  if (raw.height < resolution || raw.width < resolution)
    throw Error(Errc::InputTooSmall, std::to_string(raw.height) + "x" + std::to_string(raw.width) +
                                         " is smaller than " + std::to_string(resolution));
  const int row0 = (raw.height - resolution) / 2;
  const int col0 = (raw.width - resolution) / 2;
  auto out = torch::empty({raw.channels, resolution, resolution}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  for (int c = 0; c < raw.channels; ++c)
    for (int y = 0; y < resolution; ++y)
      for (int x = 0; x < resolution; ++x)
        acc[c][y][x] = static_cast<float>(raw.at(row0 + y, col0 + x, c) / 127.5 - 1.0);
  return out;
}

Pixels quantize_image(const torch::Tensor& image) {
  TORCH_CHECK(image.dim() == 3, "quantize_image expects (C, H, W)");
  auto t = image.detach().to(torch::kDouble).contiguous();
  const int channels = static_cast<int>(t.size(0));
  Pixels p = make_pixels(static_cast<int>(t.size(1)), static_cast<int>(t.size(2)), channels);
  auto acc = t.accessor<double, 3>();
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const double v = std::round((acc[c][y][x] + 1.0) * 127.5);
        p.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
  return p;
}

DatasetHandle DatasetHandle::open(const fs::path& root) {
  std::ifstream in(root / "manifest.json");
  if (!in) throw Error(Errc::IoError, "missing manifest in " + root.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::IoError, "bad manifest in " + root.string() + ": " + e.what());
  }
  DatasetHandle ds;
  ds.root = root;
  const auto kind = m.at("kind").get<std::string>();
  if (kind == "image") {
    ds.kind = DatasetKind::Image;
  } else if (kind == "clip") {
    ds.kind = DatasetKind::Clip;
  } else {
    throw Error(Errc::IoError, "unknown dataset kind '" + kind + "'");
  }
  ds.resolution = m.at("resolution").get<int>();
  if (ds.kind == DatasetKind::Clip) ds.clip_len = m.at("clip_len").get<int>();

  std::vector<std::pair<std::string, int>> items;
  for (const auto& item : m.at("items")) {
    int label = -1;
    if (item.contains("identity") && item["identity"].is_number_integer()) label = item["identity"].get<int>();
    items.emplace_back(item.at("id").get<std::string>(), label);
  }
  std::sort(items.begin(), items.end());
  for (auto& [id, label] : items) {
    ds.ids.push_back(id);
    ds.identities.push_back(label);
  }
  if (ds.empty()) throw Error(Errc::EmptyDataset, root.string() + " lists no items");
  return ds;
}

DatasetHandle DatasetHandle::subset(const std::vector<std::size_t>& positions) const {
  DatasetHandle out = *this;
  out.ids.clear();
  out.identities.clear();
  auto sorted = positions;
  std::sort(sorted.begin(), sorted.end());
  for (auto p : sorted) {
    out.ids.push_back(ids.at(p));
    out.identities.push_back(identities.at(p));
  }
  return out;
}

std::pair<DatasetHandle, DatasetHandle> DatasetHandle::hold_out(std::size_t per_identity) const {
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < size(); ++i) by_label[identities[i]].push_back(i);
  std::vector<std::size_t> keep, held;
  for (auto& [label, positions] : by_label) {
    const std::size_t n_held = std::min(per_identity, positions.size());
    const std::size_t split = positions.size() - n_held;
    keep.insert(keep.end(), positions.begin(), positions.begin() + static_cast<std::ptrdiff_t>(split));
    held.insert(held.end(), positions.begin() + static_cast<std::ptrdiff_t>(split), positions.end());
  }
  return {subset(keep), subset(held)};
}

fs::path DatasetHandle::image_path(std::size_t i) const { return root / "images" / (ids.at(i) + ".png"); }

fs::path DatasetHandle::clip_dir(std::size_t i) const { return root / "clips" / ids.at(i); }

void write_manifest(const DatasetHandle& ds) {
  json items = json::array();
  for (std::size_t i = 0; i < ds.size(); ++i) items.push_back({{"id", ds.ids[i]}, {"identity", ds.identities[i]}});
  json m = {
      {"kind", ds.kind == DatasetKind::Image ? "image" : "clip"},
      {"resolution", ds.resolution},
      {"clip_len", ds.kind == DatasetKind::Clip ? json(ds.clip_len) : json(nullptr)},
      {"items", items},
  };
  std::ofstream out(ds.root / "manifest.json");
  if (!out) throw Error(Errc::IoError, "cannot write manifest in " + ds.root.string());
  out << m.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "cannot write manifest in " + ds.root.string());
}

namespace {

fs::path frame_path(const fs::path& dir, int one_based) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04d.png", one_based);
  return dir / name;
}

}  // namespace

int count_frames(const fs::path& clip_dir) {
  int n = 0;
  while (fs::exists(frame_path(clip_dir, n + 1))) ++n;
  return n;
}

int clip_window_start(int stored_frames, int clip_len, Rng& rng, ClipMode mode) {
  if (stored_frames < clip_len)
    throw Error(Errc::TooFewFrames,
                std::to_string(stored_frames) + " frames stored, " + std::to_string(clip_len) + " requested");
  const int slack = stored_frames - clip_len;
  if (mode == ClipMode::Eval) return slack / 2;
  return static_cast<int>(rng.index(slack + 1));
}

torch::Tensor load_image(const fs::path& png, int resolution) { return preprocess_image(read_png(png), resolution); }

torch::Tensor load_image(const DatasetHandle& ds, std::size_t i) { return load_image(ds.image_path(i), ds.resolution); }

torch::Tensor load_clip(const fs::path& clip_dir, int clip_len, int resolution, Rng& rng, ClipMode mode) {
  const int stored = count_frames(clip_dir);
  const int start = clip_window_start(stored, clip_len, rng, mode);
  std::vector<torch::Tensor> frames;
  frames.reserve(static_cast<std::size_t>(clip_len));
  for (int f = 0; f < clip_len; ++f) frames.push_back(load_image(frame_path(clip_dir, start + f + 1), resolution));
  return torch::stack(frames, 1);
}

torch::Tensor load_clip(const DatasetHandle& ds, std::size_t i, Rng& rng, ClipMode mode) {
  return load_clip(ds.clip_dir(i), ds.clip_len, ds.resolution, rng, mode);
}

ImageBatch sample_images(const DatasetHandle& ds, std::int64_t batch, Rng& rng) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "image dataset is empty");
  TORCH_CHECK(batch >= 1, "batch size must be positive");
  std::vector<torch::Tensor> items;
  for (std::int64_t b = 0; b < batch; ++b)
    items.push_back(load_image(ds, static_cast<std::size_t>(rng.index(static_cast<std::int64_t>(ds.size())))));
  return ImageBatch(torch::stack(items));
}

ClipBatch sample_clips(const DatasetHandle& ds, std::int64_t batch, Rng& rng) {
  if (ds.empty()) throw Error(Errc::EmptyDataset, "clip dataset is empty");
  TORCH_CHECK(batch >= 1, "batch size must be positive");
  std::vector<torch::Tensor> items;
  for (std::int64_t b = 0; b < batch; ++b) {
    const auto i = static_cast<std::size_t>(rng.index(static_cast<std::int64_t>(ds.size())));
    items.push_back(load_clip(ds, i, rng, ClipMode::Train));
  }
  return ClipBatch(torch::stack(items));
}

std::variant<ImageBatch, ClipBatch> sample_batch(const DatasetHandle& ds, std::int64_t batch, Rng& rng) {
  if (ds.kind == DatasetKind::Image) return sample_images(ds, batch, rng);
  return sample_clips(ds, batch, rng);
}

}  // namespace facecycle
