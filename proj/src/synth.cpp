#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "facecycle/data.hpp"
#include "facecycle/errors.hpp"

namespace facecycle {

namespace fs = std::filesystem;

namespace {

using Rgb = std::array<double, 3>;

Rgb hsv_to_rgb(double h, double s, double v) {
  h = (h - std::floor(h)) * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

struct Identity {
  Rgb face;
  Rgb background;
  double radius_x;  // fractions of r
  double radius_y;
  double angle;
};

Identity draw_identity(int k, int n_id, Rng& rng) {
  Identity id;
  const double hue = (k + 0.3 * rng.uniform()) / n_id;
  id.face = hsv_to_rgb(hue, 0.85, 0.95);
  id.background = hsv_to_rgb(hue, 0.5, 0.3);
  id.radius_x = 0.2 + 0.1 * rng.uniform();
  id.radius_y = 0.2 + 0.1 * rng.uniform();
  id.angle = std::numbers::pi * rng.uniform();
  return id;
}

/// Anti-aliased rotated ellipse over a tinted background.
Pixels render(const Identity& id, int r, double cx, double cy, double gain) {
  Pixels p = make_pixels(r, r, 3);
  const double rx = id.radius_x * r, ry = id.radius_y * r;
  const double ca = std::cos(id.angle), sa = std::sin(id.angle);
  for (int y = 0; y < r; ++y)
    for (int x = 0; x < r; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      const double u = (ca * dx + sa * dy) / rx, v = (-sa * dx + ca * dy) / ry;
      const double d = std::sqrt(u * u + v * v);
      const double alpha = std::clamp((1.0 - d) * std::min(rx, ry) + 0.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c) {
        const double value = gain * (alpha * id.face[c] + (1 - alpha) * id.background[c]);
        p.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::round(value * 255.0), 0.0, 255.0));
      }
    }
  return p;
}

std::string item_name(const char* fmt, int k, int j) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, k, j);
  return buf;
}

void make_dirs(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + p.string() + ": " + ec.message());
}

}  // namespace

std::pair<DatasetHandle, DatasetHandle> synth_identity_dataset(const fs::path& out_dir, const SynthOptions& opts,
                                                               Rng& rng) {
  if (opts.identities < 2) throw Error(Errc::InvalidConfig, "need at least two identities");
  if (opts.resolution < 4 || opts.frames < 1) throw Error(Errc::InvalidConfig, "bad resolution or frame count");
  const int r = opts.resolution;

  std::vector<Identity> identities;
  for (int k = 0; k < opts.identities; ++k) identities.push_back(draw_identity(k, opts.identities, rng));

  DatasetHandle images;
  images.kind = DatasetKind::Image;
  images.root = out_dir / "image_set";
  images.resolution = r;
  make_dirs(images.root / "images");

  DatasetHandle clips;
  clips.kind = DatasetKind::Clip;
  clips.root = out_dir / "clip_set";
  clips.resolution = r;
  clips.clip_len = opts.frames;
  make_dirs(clips.root / "clips");

  for (int k = 0; k < opts.identities; ++k) {
    const Identity& id = identities[static_cast<std::size_t>(k)];
    for (int j = 0; j < opts.images_per; ++j) {
      const double cx = r * (0.5 + 0.16 * (rng.uniform() - 0.5));
      const double cy = r * (0.5 + 0.16 * (rng.uniform() - 0.5));
      const double gain = 0.95 + 0.1 * rng.uniform();
      const auto name = item_name("id%02d_img%03d", k, j);
      write_png(images.root / "images" / (name + ".png"), render(id, r, cx, cy, gain));
      images.ids.push_back(name);
      images.identities.push_back(k);
    }
    for (int j = 0; j < opts.clips_per; ++j) {
      const double cx0 = r * (0.5 + 0.1 * (rng.uniform() - 0.5));
      const double cy0 = r * (0.5 + 0.1 * (rng.uniform() - 0.5));
      const double phase_x = 2 * std::numbers::pi * rng.uniform();
      const double phase_y = 2 * std::numbers::pi * rng.uniform();
      const double amp = 0.12 * r;
      const double gain = 0.95 + 0.1 * rng.uniform();
      const auto name = item_name("id%02d_clip%03d", k, j);
      const fs::path dir = clips.root / "clips" / name;
      make_dirs(dir);
      for (int f = 0; f < opts.frames; ++f) {
        const double t = 2 * std::numbers::pi * f / std::max(opts.frames, 1);
        const double cx = cx0 + amp * std::sin(t + phase_x);
        const double cy = cy0 + amp * std::sin(0.5 * t + phase_y);
        char frame[32];
        std::snprintf(frame, sizeof(frame), "frame_%04d.png", f + 1);
        write_png(dir / frame, render(id, r, cx, cy, gain));
      }
      clips.ids.push_back(name);
      clips.identities.push_back(k);
    }
  }

  // Names are zero-padded so generation order is already lexicographic.
  write_manifest(images);
  write_manifest(clips);
  return {images, clips};
}

}  // namespace facecycle
