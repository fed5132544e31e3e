#include <algorithm>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "facecycle/errors.hpp"
#include "facecycle/trainer.hpp"

namespace facecycle {

namespace fs = std::filesystem;
using nlohmann::json;

EvalReport evaluate_translators(const ImageToVideoFn& img2vid, const VideoToImageFn& vid2img,
                                const DatasetHandle& images, const DatasetHandle& clips, const Embedder& embedder,
                                std::int64_t n_samples, std::int64_t batch, int frames) {
  torch::NoGradGuard no_grad;
  EvalReport report;
  const auto n_img = std::min<std::int64_t>(n_samples, static_cast<std::int64_t>(images.size()));
  const auto n_clip = std::min<std::int64_t>(n_samples, static_cast<std::int64_t>(clips.size()));
  if (n_img < 1 || n_clip < 1) throw Error(Errc::EmptyEvaluationSet, "nothing to evaluate");
  batch = std::max<std::int64_t>(batch, 1);

  std::vector<EvalPair> forward, backward;
  for (std::int64_t start = 0; start < n_img; start += batch) {
    std::vector<torch::Tensor> chunk;
    for (auto i = start; i < std::min(start + batch, n_img); ++i)
      chunk.push_back(load_image(images, static_cast<std::size_t>(i)));
    const auto src = torch::stack(chunk);
    const auto out = img2vid(ImageBatch(src)).data.to(torch::kFloat32);
    for (std::int64_t b = 0; b < src.size(0); ++b) forward.push_back({src[b], out[b]});
  }
  Rng unused;
  for (std::int64_t start = 0; start < n_clip; start += batch) {
    std::vector<torch::Tensor> chunk;
    for (auto i = start; i < std::min(start + batch, n_clip); ++i)
      chunk.push_back(load_clip(clips.clip_dir(static_cast<std::size_t>(i)), frames, clips.resolution, unused, ClipMode::Eval));
    const auto src = torch::stack(chunk);
    const auto out = vid2img(ClipBatch(src)).data.to(torch::kFloat32);
    for (std::int64_t b = 0; b < src.size(0); ++b) backward.push_back({out[b], src[b]});
  }
  report.img2vid_score = facenet_score(embedder, forward);
  report.vid2img_score = facenet_score(embedder, backward);
  report.samples_img2vid = n_img;
  report.samples_vid2img = n_clip;
  return report;
}

namespace {

struct LoadedModel {
  TrainConfig cfg;
  std::unique_ptr<TrainState> state;
};

LoadedModel load_model(const fs::path& checkpoint) {
  LoadedModel m;
  m.cfg = checkpoint_config(checkpoint);
  if (m.cfg.model == ModelKind::VideoGen)
    throw Error(Errc::CheckpointMismatch, "videogen checkpoints hold no translators");
  m.state = std::make_unique<TrainState>(m.cfg);
  load_checkpoint(*m.state, m.cfg, checkpoint);
  return m;
}

}  // namespace

EvalReport evaluate(const fs::path& checkpoint, const DatasetHandle& images, const DatasetHandle& clips,
                    const Embedder& embedder, std::int64_t n_samples) {
  auto model = load_model(checkpoint);
  auto& s = *model.state;
  auto img_ds = images;
  auto clip_ds = clips;
  img_ds.resolution = clip_ds.resolution = model.cfg.resolution;
  auto report = evaluate_translators(
      [&](const ImageBatch& x) { return translate_image_to_video(*s.g_y, x); },
      [&](const ClipBatch& y) { return translate_video_to_image(*s.g_x, y); }, img_ds, clip_ds, embedder, n_samples,
      model.cfg.batch_size, model.cfg.frames);
  report.config_fingerprint = fingerprint_hex(model.cfg.architecture_fingerprint());
  return report;
}

void write_report(const EvalReport& report, const fs::path& path) {
  const json j = {
      {"img2vid_facenet_score", report.img2vid_score},
      {"vid2img_facenet_score", report.vid2img_score},
      {"samples_img2vid", report.samples_img2vid},
      {"samples_vid2img", report.samples_vid2img},
      {"config_fingerprint", report.config_fingerprint},
  };
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

Direction parse_direction(const std::string& s) {
  if (s == "img2vid") return Direction::ImageToVideo;
  if (s == "vid2img") return Direction::VideoToImage;
  throw Error(Errc::BadDirection, "direction must be img2vid or vid2img, got '" + s + "'");
}

Pixels montage(const torch::Tensor& clip, int columns) {
  TORCH_CHECK(clip.dim() == 4, "montage expects (C, L, r, r)");
  const auto frames = clip.size(1);
  const auto cols = std::min<std::int64_t>(columns, frames);
  const auto rows = (frames + cols - 1) / cols;
  const auto r = clip.size(2);
  auto canvas = torch::full({clip.size(0), rows * r, cols * r}, -1.0, clip.options());
  for (std::int64_t f = 0; f < frames; ++f) {
    const auto row = f / cols, col = f % cols;
    canvas.narrow(1, row * r, r).narrow(2, col * r, r).copy_(clip.select(1, f));
  }
  return quantize_image(canvas);
}

std::vector<fs::path> translate_files(const fs::path& checkpoint, Direction direction, const fs::path& input,
                                      const fs::path& out) {
  auto model = load_model(checkpoint);
  auto& s = *model.state;
  const auto& cfg = model.cfg;
  torch::NoGradGuard no_grad;
  std::vector<fs::path> written;
  if (direction == Direction::ImageToVideo) {
    const auto x = load_image(input, cfg.resolution).unsqueeze(0);
    const auto clip = translate_image_to_video(*s.g_y, ImageBatch(x)).data[0];
    fs::create_directories(out);
    for (std::int64_t f = 0; f < clip.size(1); ++f) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04lld.png", static_cast<long long>(f + 1));
      write_png(out / name, quantize_image(clip.select(1, f)));
      written.push_back(out / name);
    }
    write_png(out / "montage.png", montage(clip));
    written.push_back(out / "montage.png");
  } else {
    Rng unused;
    const auto y = load_clip(input, cfg.frames, cfg.resolution, unused, ClipMode::Eval).unsqueeze(0);
    const auto image = translate_video_to_image(*s.g_x, ClipBatch(y)).data[0];
    fs::path target = out;
    if (target.extension() != ".png") {
      fs::create_directories(target);
      target /= "out.png";
    } else if (target.has_parent_path()) {
      fs::create_directories(target.parent_path());
    }
    write_png(target, quantize_image(image));
    written.push_back(target);
  }
  return written;
}

}  // namespace facecycle
