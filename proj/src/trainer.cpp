#include "facecycle/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "facecycle/errors.hpp"
#include "facecycle/losses.hpp"

namespace facecycle {

namespace fs = std::filesystem;

std::string metrics_csv_header() {
  return "iteration,critic_img,critic_vid,gen_adv_img,gen_adv_vid,cycle,identity,total_gen,wall_seconds";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f",
                static_cast<long long>(r.iteration), r.critic_img, r.critic_vid, r.gen_adv_img, r.gen_adv_vid,
                r.cycle, r.identity, r.total_gen, r.wall_seconds);
  return buf;
}

std::vector<MetricsRecord> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::vector<MetricsRecord> rows;
  std::string line;
  std::getline(in, line);
  if (line != metrics_csv_header()) throw Error(Errc::IoError, "unexpected metrics header in " + path.string());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRecord r;
    long long it = 0;
    if (std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &it, &r.critic_img, &r.critic_vid,
                    &r.gen_adv_img, &r.gen_adv_vid, &r.cycle, &r.identity, &r.total_gen, &r.wall_seconds) != 9)
      throw Error(Errc::IoError, "malformed metrics row: " + line);
    r.iteration = it;
    rows.push_back(r);
  }
  return rows;
}

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& cfg) {
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(cfg.learning_rate).betas({cfg.beta1, cfg.beta2}));
}

template <typename Net>
Net prepare(Net net, torch::Dtype dtype, Rng& rng) {
  net->to(dtype);
  initialize_parameters(*net, rng);
  return net;
}

void set_trainable(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.requires_grad_(on);
}

double scalar(const torch::Tensor& t) { return t.detach().to(torch::kDouble).item<double>(); }

[[noreturn]] void non_finite(const char* term, const std::string& detail) {
  throw Error(Errc::NonFiniteLoss, std::string(term) + ": " + detail);
}

void require_finite(const torch::Tensor& t, const char* term) {
  if (!std::isfinite(scalar(t))) non_finite(term, "value is not finite");
}

template <typename F>
auto guard_term(const char* term, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::NonFinite || e.code() == Errc::NonFiniteGradient || e.code() == Errc::EmbedderFailure)
      non_finite(term, e.what());
    throw;
  }
}

}  // namespace

TrainState::TrainState(const TrainConfig& cfg, torch::Dtype dtype_) : kind(cfg.model), dtype(dtype_), rng(cfg.seed) {
  cfg.validate();
  const auto tcfg = cfg.translator();
  const auto ccfg = cfg.critic();
  if (kind == ModelKind::VideoGen) {
    noise_generator = prepare(VideoDecoder(tcfg), dtype, rng);
    c_y = prepare(VideoCritic(ccfg), dtype, rng);
    opt_noise = make_adam(noise_generator->parameters(), cfg);
    opt_c_y = make_adam(c_y->parameters(), cfg);
    return;
  }
  g_y.emplace(tcfg);
  prepare(g_y->encoder, dtype, rng);
  prepare(g_y->decoder, dtype, rng);
  g_x.emplace(tcfg);
  prepare(g_x->encoder, dtype, rng);
  prepare(g_x->decoder, dtype, rng);
  c_x = prepare(ImageCritic(ccfg), dtype, rng);
  c_y = prepare(VideoCritic(ccfg), dtype, rng);
  opt_g_y = make_adam(g_y->parameters(), cfg);
  opt_g_x = make_adam(g_x->parameters(), cfg);
  opt_c_x = make_adam(c_x->parameters(), cfg);
  opt_c_y = make_adam(c_y->parameters(), cfg);
  if (kind == ModelKind::Model3) embedder = make_embedder(cfg.embedder);
}

std::vector<std::pair<std::string, std::shared_ptr<torch::nn::Module>>> TrainState::networks() const {
  if (kind == ModelKind::VideoGen) return {{"noise_generator", noise_generator.ptr()}, {"c_y", c_y.ptr()}};
  return {
      {"g_y_image_encoder", g_y->encoder.ptr()}, {"g_y_video_decoder", g_y->decoder.ptr()},
      {"g_x_video_encoder", g_x->encoder.ptr()}, {"g_x_image_decoder", g_x->decoder.ptr()},
      {"c_x", c_x.ptr()},                        {"c_y", c_y.ptr()},
  };
}

std::vector<std::pair<std::string, torch::optim::Optimizer*>> TrainState::optimizers() const {
  if (kind == ModelKind::VideoGen) return {{"opt_noise_generator", opt_noise.get()}, {"opt_c_y", opt_c_y.get()}};
  return {{"opt_g_y", opt_g_y.get()}, {"opt_g_x", opt_g_x.get()}, {"opt_c_x", opt_c_x.get()}, {"opt_c_y", opt_c_y.get()}};
}

namespace {

MetricsRecord videogen_step(TrainState& s, const TrainConfig& cfg, BatchSource& source) {
  MetricsRecord rec;
  const auto latent = cfg.translator().latent_channels();
  const auto opts = torch::TensorOptions().dtype(s.dtype);
  auto critic = score_fn(s.c_y);

  set_trainable(*s.c_y, true);
  for (int i = 0; i < cfg.n_critic; ++i) {
    const auto y = source.next_clips(s.rng).data.to(s.dtype);
    torch::Tensor fake;
    {
      torch::NoGradGuard no_grad;
      fake = generate_video_from_noise(s.noise_generator, s.rng.normal({y.size(0), latent, 4, 4}, opts)).data;
    }
    auto loss = guard_term("critic_vid", [&] { return wgan_critic_loss(critic, y, fake, cfg.lambda_gp, s.rng); });
    s.opt_c_y->zero_grad();
    loss.total.backward();
    s.opt_c_y->step();
    ++s.critic_updates;
    rec.critic_vid += scalar(loss.total) / cfg.n_critic;
    rec.gap_vid += scalar(loss.gap) / cfg.n_critic;
  }

  set_trainable(*s.c_y, false);
  const auto noise = s.rng.normal({cfg.batch_size, latent, 4, 4}, opts);
  const auto fake = generate_video_from_noise(s.noise_generator, noise);
  const auto adv = wgan_generator_loss(critic, fake.data);
  require_finite(adv, "gen_adv_vid");
  s.opt_noise->zero_grad();
  adv.backward();
  s.opt_noise->step();
  set_trainable(*s.c_y, true);
  ++s.generator_updates;

  rec.gen_adv_vid = scalar(adv);
  rec.total_gen = rec.gen_adv_vid;
  return rec;
}

MetricsRecord cyclic_step(TrainState& s, const TrainConfig& cfg, BatchSource& source) {
  MetricsRecord rec;
  const auto weights = cfg.weights();
  auto critic_x = score_fn(s.c_x);
  auto critic_y = score_fn(s.c_y);

  set_trainable(*s.c_x, true);
  set_trainable(*s.c_y, true);
  for (int i = 0; i < cfg.n_critic; ++i) {
    const ImageBatch x(source.next_images(s.rng).data.to(s.dtype));
    const ClipBatch y(source.next_clips(s.rng).data.to(s.dtype));
    ClipBatch fake_vid;
    ImageBatch fake_img;
    {
      torch::NoGradGuard no_grad;
      fake_vid = translate_image_to_video(*s.g_y, x);
      fake_img = translate_video_to_image(*s.g_x, y);
    }
    auto loss_x = guard_term("critic_img",
                             [&] { return wgan_critic_loss(critic_x, x.data, fake_img.data, cfg.lambda_gp, s.rng); });
    auto loss_y = guard_term("critic_vid",
                             [&] { return wgan_critic_loss(critic_y, y.data, fake_vid.data, cfg.lambda_gp, s.rng); });
    s.opt_c_x->zero_grad();
    s.opt_c_y->zero_grad();
    (loss_x.total + loss_y.total).backward();
    s.opt_c_x->step();
    s.opt_c_y->step();
    ++s.critic_updates;
    rec.critic_img += scalar(loss_x.total) / cfg.n_critic;
    rec.critic_vid += scalar(loss_y.total) / cfg.n_critic;
    rec.gap_img += scalar(loss_x.gap) / cfg.n_critic;
    rec.gap_vid += scalar(loss_y.gap) / cfg.n_critic;
  }

  set_trainable(*s.c_x, false);
  set_trainable(*s.c_y, false);
  const ImageBatch x(source.next_images(s.rng).data.to(s.dtype));
  const ClipBatch y(source.next_clips(s.rng).data.to(s.dtype));
  const auto fake_vid = translate_image_to_video(*s.g_y, x);
  const auto fake_img = translate_video_to_image(*s.g_x, y);
  const auto rec_x = translate_video_to_image(*s.g_x, fake_vid);
  const auto rec_y = translate_image_to_video(*s.g_y, fake_img);

  GeneratorTerms terms;
  terms.adv_img = wgan_generator_loss(critic_x, fake_img.data);
  terms.adv_vid = wgan_generator_loss(critic_y, fake_vid.data);
  terms.cycle = cycle_loss(x, rec_x, y, rec_y);
  require_finite(terms.adv_img, "gen_adv_img");
  require_finite(terms.adv_vid, "gen_adv_vid");
  require_finite(terms.cycle, "cycle");
  switch (weights.id_mode) {
    case IdentityMode::Pixel:
      terms.identity = pixel_identity_loss(x, fake_vid, y, fake_img);
      break;
    case IdentityMode::Embed:
      terms.identity = guard_term("identity", [&] { return embedding_identity_loss(*s.embedder, x, fake_vid, y, fake_img); });
      break;
    case IdentityMode::None:
      break;
  }
  if (terms.identity.defined()) require_finite(terms.identity, "identity");
  const auto total = total_generator_objective(terms, weights);
  require_finite(total, "total_gen");

  s.opt_g_y->zero_grad();
  s.opt_g_x->zero_grad();
  total.backward();
  s.opt_g_y->step();
  s.opt_g_x->step();
  set_trainable(*s.c_x, true);
  set_trainable(*s.c_y, true);
  ++s.generator_updates;

  rec.gen_adv_img = scalar(terms.adv_img);
  rec.gen_adv_vid = scalar(terms.adv_vid);
  rec.cycle = scalar(terms.cycle);
  rec.identity = terms.identity.defined() ? scalar(terms.identity) : 0.0;
  rec.total_gen = scalar(total);
  return rec;
}

}  // namespace

MetricsRecord train_step(TrainState& state, const TrainConfig& cfg, BatchSource& source) {
  if (cfg.model != state.kind) throw Error(Errc::ConfigMismatch, "config model differs from the train state");
  auto rec = state.kind == ModelKind::VideoGen ? videogen_step(state, cfg, source) : cyclic_step(state, cfg, source);
  rec.iteration = ++state.iteration;
  return rec;
}

namespace {

DatasetHandle open_for(const std::string& root, const TrainConfig& cfg, DatasetKind kind) {
  auto ds = DatasetHandle::open(root);
  if (ds.kind != kind) throw Error(Errc::InvalidConfig, root + " holds the wrong dataset kind");
  ds.resolution = cfg.resolution;
  ds.clip_len = cfg.frames;
  return ds;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
}

/// Keeps the header and the rows with iteration <= last.
void truncate_metrics(const fs::path& path, std::int64_t last) {
  std::string kept = metrics_csv_header() + "\n";
  if (fs::exists(path)) {
    for (const auto& r : read_metrics_csv(path))
      if (r.iteration <= last) kept += metrics_csv_row(r) + "\n";
  }
  write_text(path, kept);
}

struct SampleInputs {
  ImageBatch images;
  ClipBatch clips;
  torch::Tensor noise;
};

void dump_samples(TrainState& s, const SampleInputs& in, const fs::path& dir) {
  torch::NoGradGuard no_grad;
  fs::create_directories(dir);
  torch::Tensor clip;
  if (s.kind == ModelKind::VideoGen) {
    clip = generate_video_from_noise(s.noise_generator, in.noise).data;
  } else {
    clip = translate_image_to_video(*s.g_y, in.images).data;
    const auto imgs = translate_video_to_image(*s.g_x, in.clips).data;
    // Row 1: source images, row 2: images translated from clips.
    const auto grid = torch::cat({torch::cat(in.images.data.unbind(0), 2), torch::cat(imgs.unbind(0), 2)}, 1);
    write_png(dir / "grid.png", quantize_image(grid.to(torch::kFloat32)));
  }
  const auto first = clip[0].to(torch::kFloat32);
  for (std::int64_t f = 0; f < first.size(1); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04lld.png", static_cast<long long>(f + 1));
    write_png(dir / name, quantize_image(first.select(1, f)));
  }
}

}  // namespace

fs::path train(const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const fs::path run_dir = cfg.run_dir;
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + run_dir.string() + ": " + ec.message());
  write_text(run_dir / "config.json", to_json(cfg).dump(2) + "\n");

  TrainState state(cfg);
  if (opts.resume) {
    if (auto ckpt = latest_checkpoint(run_dir)) load_checkpoint(state, cfg, *ckpt);
  }
  const fs::path metrics_path = run_dir / "metrics.csv";
  if (opts.resume) {
    truncate_metrics(metrics_path, state.iteration);
  } else {
    write_text(metrics_path, metrics_csv_header() + "\n");
  }

  const auto clips = open_for(cfg.clip_data, cfg, DatasetKind::Clip);
  const auto images = cfg.model == ModelKind::VideoGen ? DatasetHandle{} : open_for(cfg.image_data, cfg, DatasetKind::Image);
  DatasetBatchSource source(images, clips, cfg.batch_size);

  // Fixed inputs for the periodic sample dumps, drawn from their own stream.
  SampleInputs samples;
  {
    Rng sample_rng(cfg.seed ^ 0x5a3b1e5eedULL);
    const std::int64_t n = std::min<std::int64_t>(4, cfg.batch_size);
    if (cfg.model == ModelKind::VideoGen) {
      samples.noise = sample_rng.normal({n, cfg.translator().latent_channels(), 4, 4},
                                        torch::TensorOptions().dtype(state.dtype));
    } else {
      samples.images = ImageBatch(sample_images(images, n, sample_rng).data.to(state.dtype));
      samples.clips = ClipBatch(sample_clips(clips, n, sample_rng).data.to(state.dtype));
    }
  }

  std::ofstream metrics(metrics_path, std::ios::app);
  if (!metrics) throw Error(Errc::IoError, "cannot append to " + metrics_path.string());
  const auto started = std::chrono::steady_clock::now();
  const double wall_offset = state.wall_seconds;
  std::int64_t last_saved = state.iteration;
  while (state.iteration < cfg.iterations) {
    auto rec = train_step(state, cfg, source);
    rec.wall_seconds =
        wall_offset + std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.wall_seconds = rec.wall_seconds;
    metrics << metrics_csv_row(rec) << '\n' << std::flush;
    if (!metrics) throw Error(Errc::IoError, "cannot append to " + metrics_path.string());
    if (opts.observer) opts.observer(rec);
    if (state.iteration % cfg.checkpoint_every == 0) {
      save_checkpoint(state, cfg, checkpoint_dir(run_dir, state.iteration));
      last_saved = state.iteration;
    }
    if (state.iteration % cfg.sample_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "iter_%06lld", static_cast<long long>(state.iteration));
      dump_samples(state, samples, run_dir / "samples" / name);
    }
  }
  if (last_saved != state.iteration || !latest_checkpoint(run_dir))
    save_checkpoint(state, cfg, checkpoint_dir(run_dir, state.iteration));
  return run_dir;
}

}  // namespace facecycle
