// Acceptance gate. Prints one PASS/FAIL line per criterion; exit status is
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "facecycle/critics.hpp"
#include "facecycle/data.hpp"
#include "facecycle/errors.hpp"
#include "facecycle/identity.hpp"
#include "facecycle/losses.hpp"
#include "facecycle/trainer.hpp"
#include "facecycle/translators.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace facecycle;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kDouble);

struct Outcome {
  bool pass = true;
  std::vector<std::string> failures;
  std::string summary;

  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (failures.size() < 8) failures.push_back(what);
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ---------------------------------------------------------------------------
// 1. gradient penalty against the closed form

Outcome gradient_penalty_suite() {
  Outcome out;
  const double lambda = 10.0;
  double worst = 0.0;
  for (int a = -2; a <= 2; ++a) {
    for (std::int64_t n : {1, 4, 64}) {
      const ScoreFn critic = [a](const torch::Tensor& x) { return a * x.flatten(1).sum(1); };
      const auto x_hat = torch::randn({3, n}, kF64);
      const double got = gradient_penalty(critic, x_hat, lambda).item<double>();
      const double want = lambda * std::pow(std::abs(a) * std::sqrt(static_cast<double>(n)) - 1.0, 2);
      worst = std::max(worst, std::abs(got - want));
      out.expect(near(got, want, 1e-5), "a=" + std::to_string(a) + " N=" + std::to_string(n) + ": " + fmt(got) +
                                            " vs " + fmt(want));
    }
  }
  const ScoreFn constant = [](const torch::Tensor& x) { return torch::full({x.size(0)}, 3.0, x.options()); };
  const double c = gradient_penalty(constant, torch::randn({4, 3, 8, 8}, kF64), lambda).item<double>();
  out.expect(c == lambda, "constant critic gave " + fmt(c));
  out.summary = "15 (a, N) cases, max abs err " + fmt(worst) + ", constant critic " + fmt(c);
  return out;
}

// ---------------------------------------------------------------------------
// 2. double backward through the penalty

Outcome double_backward_check() {
  Outcome out;
  CriticConfig cfg;
  cfg.resolution = 8;
  cfg.frames = 4;
  cfg.channels = 1;
  cfg.base = 2;
  ImageCritic critic(cfg);
  critic->to(torch::kDouble);
  Rng rng(12);
  initialize_parameters(*critic, rng);
  {
    torch::NoGradGuard no_grad;
    for (auto& p : critic->parameters()) p.add_(rng.normal(p.sizes(), kF64) * 0.3);
  }
  const auto n_params = parameter_count(*critic);
  out.expect(n_params <= 200, "critic has " + std::to_string(n_params) + " parameters");

  const auto x_hat = rng.normal({3, 1, 8, 8}, kF64);
  const auto fn = score_fn(critic);
  auto penalty = [&] { return gradient_penalty(fn, x_hat, 10.0); };
  auto params = critic->parameters();
  const auto grads = torch::autograd::grad({penalty()}, params, {}, std::nullopt, false, true);

  double worst = 0.0;
  std::int64_t checked = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto data = params[i].detach();
    for (std::int64_t j = 0; j < data.numel(); ++j) {
      const double fd = testutil::central_difference([&] { return penalty().item<double>(); }, data, j, 1e-5);
      const double analytic = grads[i].defined() ? grads[i].view(-1)[j].item<double>() : 0.0;
      // Entries with no influence on the penalty: both sides must vanish.
      const double err = (std::abs(fd) < 1e-9 && std::abs(analytic) < 1e-9) ? 0.0 : testutil::relative_error(analytic, fd);
      worst = std::max(worst, err);
      out.expect(err <= 1e-4, "param " + std::to_string(i) + "[" + std::to_string(j) + "] analytic " + fmt(analytic) +
                                  " fd " + fmt(fd));
      ++checked;
    }
  }
  out.summary = std::to_string(checked) + " parameters, max rel err " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------
// 3. translator gradients vs finite differences

Outcome generator_differentiability() {
  Outcome out;
  TranslatorConfig cfg;
  cfg.resolution = 8;
  cfg.frames = 4;
  cfg.base = 4;
  VideoTranslator g_y(cfg);
  ImageTranslator g_x(cfg);
  Rng rng(7);
  for (torch::nn::Module* m : std::initializer_list<torch::nn::Module*>{g_y.encoder.get(), g_y.decoder.get(),
                                                                        g_x.encoder.get(), g_x.decoder.get()}) {
    m->to(torch::kDouble);
    initialize_parameters(*m, rng);
  }
  // Larger weights keep the tanh head away from its linear regime so the
  // check exercises every layer's nonlinearity.
  {
    torch::NoGradGuard no_grad;
    for (auto& p : g_y.parameters()) p.mul_(10.0);
    for (auto& p : g_x.parameters()) p.mul_(10.0);
  }
  auto x = (rng.uniform({2, 3, 8, 8}, kF64) * 2 - 1).contiguous();
  auto y = (rng.uniform({2, 3, 4, 8, 8}, kF64) * 2 - 1).contiguous();
  const auto w_clip = rng.normal({2, 3, 4, 8, 8}, kF64);
  const auto w_img = rng.normal({2, 3, 8, 8}, kF64);

  torch::Tensor x_in = x, y_in = y;
  auto f_img2vid = [&] { return (translate_image_to_video(g_y, ImageBatch(x_in)).data * w_clip).sum(); };
  auto f_vid2img = [&] { return (translate_video_to_image(g_x, ClipBatch(y_in)).data * w_img).sum(); };

  double worst = 0.0;
  int checked = 0;
  auto compare = [&](double analytic, double fd, const std::string& what) {
    const double err = testutil::relative_error(analytic, fd);
    worst = std::max(worst, err);
    out.expect(err <= 1e-3, what + ": analytic " + fmt(analytic) + " fd " + fmt(fd));
    ++checked;
  };

  auto check_input = [&](const std::function<torch::Tensor()>& f, torch::Tensor& slot, torch::Tensor& base,
                         const std::string& name) {
    slot = base.detach().clone().requires_grad_(true);
    const auto grad = torch::autograd::grad({f()}, {slot})[0];
    slot = base;
    for (int k = 0; k < 10; ++k) {
      const auto idx = rng.index(base.numel());
      const double fd = testutil::central_difference([&] { return f().item<double>(); }, base, idx);
      compare(grad.view(-1)[idx].item<double>(), fd, name + " input " + std::to_string(idx));
    }
  };
  check_input(f_img2vid, x_in, x, "img2vid");
  check_input(f_vid2img, y_in, y, "vid2img");

  auto check_params = [&](const std::function<torch::Tensor()>& f, std::vector<torch::Tensor> params,
                          const std::string& name) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto grad = torch::autograd::grad({f()}, {params[i]}, {}, std::nullopt, false, true)[0];
      auto data = params[i].detach();
      for (int k = 0; k < 2; ++k) {
        const auto idx = rng.index(data.numel());
        const double fd = testutil::central_difference([&] { return f().item<double>(); }, data, idx);
        compare(grad.defined() ? grad.view(-1)[idx].item<double>() : 0.0, fd,
                name + " param " + std::to_string(i) + "[" + std::to_string(idx) + "]");
      }
    }
  };
  check_params(f_img2vid, g_y.parameters(), "img2vid");
  check_params(f_vid2img, g_x.parameters(), "vid2img");

  out.summary = std::to_string(checked) + " entries, max rel err " + fmt(worst);
  return out;
}

// ---------------------------------------------------------------------------
// 4. shape laws over the configuration grid

Outcome shape_law_suite() {
  Outcome out;
  torch::NoGradGuard no_grad;
  int valid = 0, skipped = 0;
  const std::int64_t b = 3;
  const auto perm = torch::tensor({2, 0, 1}, torch::kLong);
  for (int r : {8, 16, 32, 64}) {
    for (int l : {4, 8, 16, 32}) {
      for (int base : {4, 64}) {
        TranslatorConfig tc;
        tc.resolution = r;
        tc.frames = l;
        tc.base = base;
        try {
          tc.validate();
        } catch (const Error& e) {
          if (e.code() != Errc::ConfigMismatch) throw;
          ++skipped;
          continue;
        }
        ++valid;
        const std::string tag = "r=" + std::to_string(r) + " L=" + std::to_string(l) + " base=" + std::to_string(base);
        Rng rng(static_cast<std::uint64_t>(r * 1000 + l * 10 + base));
        ImageEncoder enc_i(tc);
        VideoDecoder dec_v(tc);
        VideoEncoder enc_v(tc);
        ImageDecoder dec_i(tc);
        for (torch::nn::Module* m :
             std::initializer_list<torch::nn::Module*>{enc_i.get(), dec_v.get(), enc_v.get(), dec_i.get()})
          initialize_parameters(*m, rng);

        const int d = tc.latent_channels();
        const ImageBatch x(rng.uniform({b, 3, r, r}) * 2 - 1);
        const ClipBatch y(rng.uniform({b, 3, l, r, r}) * 2 - 1);
        const auto zx = encode_image(enc_i, x);
        out.expect(zx.data.sizes() == torch::IntArrayRef{b, d, 4, 4}, tag + ": image code shape");
        const auto yv = decode_video(dec_v, zx);
        out.expect(yv.data.sizes() == torch::IntArrayRef{b, 3, l, r, r}, tag + ": decoded clip shape");
        out.expect(yv.data.abs().max().item<float>() < 1.0f, tag + ": clip outside (-1, 1)");
        const auto zy = encode_video(enc_v, y);
        out.expect(zy.data.sizes() == torch::IntArrayRef{b, d, 4, 4}, tag + ": clip code shape");
        const auto xi = decode_image(dec_i, zy);
        out.expect(xi.data.sizes() == torch::IntArrayRef{b, 3, r, r}, tag + ": decoded image shape");
        out.expect(xi.data.abs().max().item<float>() < 1.0f, tag + ": image outside (-1, 1)");

        CriticConfig cc;
        cc.resolution = r;
        cc.frames = l;
        cc.channels = 3;
        cc.base = base;
        ImageCritic ci(cc);
        VideoCritic cv(cc);
        initialize_parameters(*ci, rng);
        initialize_parameters(*cv, rng);
        const auto si = critic_image(ci, x).values;
        const auto sv = critic_video(cv, y).values;
        out.expect(si.sizes() == torch::IntArrayRef{b} && sv.sizes() == torch::IntArrayRef{b}, tag + ": score shape");
        out.expect(torch::equal(critic_image(ci, ImageBatch(x.data.index_select(0, perm))).values, si.index_select(0, perm)),
                   tag + ": image critic not permutation equivariant");
        out.expect(torch::equal(critic_video(cv, ClipBatch(y.data.index_select(0, perm))).values, sv.index_select(0, perm)),
                   tag + ": video critic not permutation equivariant");
      }
    }
  }
  out.summary = std::to_string(valid) + " valid configs checked, " + std::to_string(skipped) +
                " rejected as invalid (L not divisible by 2^(K-1))";
  return out;
}

// ---------------------------------------------------------------------------
// 5. loss and identity examples

class ChannelMeanEmbedder final : public Embedder {
 public:
  torch::Tensor embed(const ImageBatch& x) const override {
    const auto m = x.data.mean({2, 3});
    return m / m.norm(2, 1, true);
  }
  int embedding_dim(int channels) const override { return channels; }
  std::string name() const override { return "channel-mean"; }
};

torch::Tensor two_channel(std::int64_t b, double c0, double c1) {
  auto t = torch::empty({b, 2, 4, 4}, kF64);
  t.select(1, 0).fill_(c0);
  t.select(1, 1).fill_(c1);
  return t;
}

torch::Tensor as_clip(const torch::Tensor& images, std::int64_t frames) {
  auto s = images.sizes().vec();
  s.insert(s.begin() + 2, frames);
  return images.unsqueeze(2).expand(s).contiguous();
}

Outcome loss_oracle_suite() {
  Outcome out;
  const double tol = 1e-6;
  int cases = 0;
  auto check = [&](double got, double want, const std::string& what) {
    ++cases;
    out.expect(near(got, want, tol), what + ": " + fmt(got) + " vs " + fmt(want));
  };
  Rng rng(5);
  const ScoreFn zero = [](const torch::Tensor& x) { return torch::zeros({x.size(0)}, x.options()); };
  const ScoreFn mean = [](const torch::Tensor& x) { return x.flatten(1).mean(1); };

  const auto real = rng.uniform({4, 3, 8, 8}, kF64), fake = rng.uniform({4, 3, 8, 8}, kF64);
  check(wgan_critic_loss(zero, real, fake, 10.0, rng).total.item<double>(), 10.0, "critic loss, zero critic");
  check(wgan_critic_loss(mean, torch::ones({4, 3, 8, 8}, kF64), -torch::ones({4, 3, 8, 8}, kF64), 0.0, rng)
            .total.item<double>(),
        -2.0, "critic loss, mean critic");
  check(wgan_critic_loss(mean, real, real, 0.0, rng).total.item<double>(), 0.0, "critic loss, real = fake");

  const ScoreFn fixed = [](const torch::Tensor&) { return torch::tensor({1.0, 3.0}, kF64); };
  const ScoreFn scaled = [](const torch::Tensor&) { return torch::tensor({3.0, 9.0}, kF64); };
  const auto dummy = torch::zeros({2, 1}, kF64);
  check(wgan_generator_loss(fixed, dummy).item<double>(), -2.0, "generator loss [1, 3]");
  check(wgan_generator_loss(zero, dummy).item<double>(), 0.0, "generator loss, zero critic");
  check(wgan_generator_loss(scaled, dummy).item<double>(), 3.0 * -2.0, "generator loss scales with c");

  const auto x = rng.uniform({2, 3, 8, 8}, kF64) * 2 - 1;
  const auto y = rng.uniform({2, 3, 4, 8, 8}, kF64) * 2 - 1;
  check(cycle_loss(ImageBatch(x), ImageBatch(x), ClipBatch(y), ClipBatch(y)).item<double>(), 0.0, "cycle, perfect");
  check(cycle_loss(ImageBatch(torch::ones({2, 3, 8, 8}, kF64)), ImageBatch(torch::zeros({2, 3, 8, 8}, kF64)),
                   ClipBatch(y), ClipBatch(y))
            .item<double>(),
        1.0, "cycle, ones vs zeros");
  const auto xs = torch::tensor({0.0, 1.0, 1.0, 0.0}, kF64).view({1, 1, 2, 2});
  const auto xr = torch::tensor({1.0, 1.0, 0.0, 0.0}, kF64).view({1, 1, 2, 2});
  double brute = 0.0;
  for (int i = 0; i < 4; ++i) brute += std::abs(xs.view(-1)[i].item<double>() - xr.view(-1)[i].item<double>());
  brute /= 4.0;
  const auto ys = torch::zeros({1, 1, 2, 2, 2}, kF64);
  check(cycle_loss(ImageBatch(xs), ImageBatch(xr), ClipBatch(ys), ClipBatch(ys)).item<double>(), brute,
        "cycle, 2x2 example");
  check(brute, 0.5, "cycle, 2x2 brute force");

  const auto static_y = as_clip(x.flip(0), 4);
  check(pixel_identity_loss(ImageBatch(x), ClipBatch(as_clip(x, 4)), ClipBatch(static_y), ImageBatch(x.flip(0)))
            .item<double>(),
        0.0, "pixel identity, exact");
  const auto zero_clip = torch::zeros({1, 3, 2, 8, 8}, kF64);
  check(pixel_identity_loss(ImageBatch(torch::ones({1, 3, 8, 8}, kF64)), ClipBatch(zero_clip), ClipBatch(zero_clip),
                            ImageBatch(torch::zeros({1, 3, 8, 8}, kF64)))
            .item<double>(),
        1.0, "pixel identity, constant gap");
  {
    const double a = 0.3, b = -0.7;
    const auto src = rng.uniform({1, 3, 8, 8}, kF64);
    const auto two = torch::stack({src + a, src + b}, 2);
    double per_frame = 0.0;
    for (int f = 0; f < 2; ++f) {
      const auto d = (two.select(2, f) - src).contiguous().view(-1);
      double s = 0.0;
      for (std::int64_t i = 0; i < d.numel(); ++i) s += d[i].item<double>() * d[i].item<double>();
      per_frame += s / static_cast<double>(d.numel());
    }
    const double got = pixel_identity_loss(ImageBatch(src), ClipBatch(two), ClipBatch(zero_clip),
                                           ImageBatch(torch::zeros({1, 3, 8, 8}, kF64)))
                           .item<double>();
    check(got, per_frame / 2, "pixel identity, brute-force frame average");
    check(got, (a * a + b * b) / 2, "pixel identity, (a^2 + b^2) / 2");
  }

  const ChannelMeanEmbedder cm;
  const auto e1 = two_channel(2, 1, 0), e2 = two_channel(2, 0, 1), anti = two_channel(2, -1, 0);
  check(embedding_identity_loss(cm, ImageBatch(e1), ClipBatch(as_clip(e1, 3)), ClipBatch(as_clip(e1, 3)), ImageBatch(e1))
            .item<double>(),
        0.0, "embedding identity, identical");
  check(embedding_identity_loss(cm, ImageBatch(e1), ClipBatch(as_clip(e2, 3)), ClipBatch(as_clip(e1, 3)), ImageBatch(e1))
            .item<double>(),
        2.0, "embedding identity, orthonormal");
  check(embedding_identity_loss(cm, ImageBatch(e1), ClipBatch(as_clip(anti, 3)), ClipBatch(as_clip(e1, 3)),
                                ImageBatch(e1))
            .item<double>(),
        4.0, "embedding identity, antipodal");

  LossWeights w;
  w.id_mode = IdentityMode::None;
  const GeneratorTerms t{torch::tensor(1.0, kF64), torch::tensor(2.0, kF64), torch::tensor(0.003, kF64),
                         torch::tensor(0.25, kF64)};
  check(total_generator_objective(t, w).item<double>(), 6.0, "total objective, weighted sum");
  const GeneratorTerms zeros{torch::tensor(0.0, kF64), torch::tensor(0.0, kF64), torch::tensor(0.0, kF64),
                             torch::tensor(0.0, kF64)};
  w.id_mode = IdentityMode::Embed;
  check(total_generator_objective(zeros, w).item<double>(), 0.0, "total objective, zeros");
  const double base = total_generator_objective(t, w).item<double>();
  w.omega_id *= 2;
  check(total_generator_objective(t, w).item<double>() - base, 100.0 * 0.25, "total objective, doubled omega");

  const BuiltinEmbedder f;
  const auto rows = f.embed(ImageBatch(rng.uniform({6, 3, 16, 16}) * 2 - 1)).norm(2, 1);
  check((rows - 1).abs().max().item<double>(), 0.0, "embedder row norms");
  const auto z = f.embed(ImageBatch(torch::zeros({1, 3, 16, 16})));
  ++cases;
  out.expect(torch::isfinite(z).all().item<bool>() && near(z.norm().item<double>(), 1.0, 1e-5),
             "embedder on all-zero image is not a finite unit vector");

  // Independent loop oracle for the red/blue distance.
  auto oracle = [](double rr, double gg, double bb) {
    std::vector<double> v{rr, gg, bb};
    const double lum = 0.299 * rr + 0.587 * gg + 0.114 * bb;
    for (int i = 0; i < 16; ++i) v.push_back(lum);
    v.push_back(BuiltinEmbedder::kNormFloor);
    double n = 0.0;
    for (double e : v) n += e * e;
    n = std::max(std::sqrt(n), BuiltinEmbedder::kNormFloor);
    for (double& e : v) e /= n;
    return v;
  };
  const auto red_o = oracle(1, -1, -1), blue_o = oracle(-1, -1, 1);
  double oracle_d = 0.0;
  for (std::size_t i = 0; i < red_o.size(); ++i) oracle_d += (red_o[i] - blue_o[i]) * (red_o[i] - blue_o[i]);
  auto solid = [](float rr, float gg, float bb) {
    auto t = torch::empty({1, 3, 16, 16});
    t.select(1, 0).fill_(rr);
    t.select(1, 1).fill_(gg);
    t.select(1, 2).fill_(bb);
    return ImageBatch(t);
  };
  const double red_blue = (f.embed(solid(1, -1, -1)) - f.embed(solid(-1, -1, 1))).pow(2).sum().item<double>();
  check(red_blue, oracle_d, "red/blue distance vs oracle");
  ++cases;
  out.expect(red_blue > 0.5, "red/blue distance " + fmt(red_blue) + " not above 0.5");

  const auto img = rng.uniform({3, 16, 16}) * 2 - 1;
  check(clip_image_distance(f, img, as_clip(img.unsqueeze(0), 5)[0]).item<double>(), 0.0, "clip distance, repeated");
  const auto fr1 = rng.uniform({3, 16, 16}) * 2 - 1, fr2 = rng.uniform({3, 16, 16}) * 2 - 1;
  const double d1 = clip_image_distance(f, img, fr1.unsqueeze(1)).item<double>();
  const double d2 = clip_image_distance(f, img, fr2.unsqueeze(1)).item<double>();
  check(clip_image_distance(f, img, torch::stack({fr1, fr2}, 1)).item<double>(), (d1 + d2) / 2, "clip distance, mean");
  double max_d = 0.0;
  for (int k = 0; k < 20; ++k)
    max_d = std::max(max_d, clip_image_distance(f, rng.uniform({3, 16, 16}) * 2 - 1, rng.uniform({3, 4, 16, 16}) * 2 - 1)
                                .item<double>());
  ++cases;
  out.expect(max_d <= 4.0, "clip distance above 4: " + fmt(max_d));

  check(facenet_score(f, {{img, as_clip(img.unsqueeze(0), 4)[0]}, {fr1, as_clip(fr1.unsqueeze(0), 4)[0]}}), 0.0,
        "facenet score, identical pairs");
  const auto clip = rng.uniform({3, 4, 16, 16}) * 2 - 1;
  check(facenet_score(f, {{img, clip}}), clip_image_distance(f, img, clip).item<double>(), "facenet score, one pair");

  out.summary = std::to_string(cases) + " examples";
  return out;
}

// ---------------------------------------------------------------------------
// Shared desk-scale fixtures

struct Workspace {
  testutil::TempDir dir{"acceptance"};
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

TrainConfig desk_config(ModelKind model, std::uint64_t seed, std::int64_t iterations, const fs::path& run_dir) {
  TrainConfig cfg;
  cfg.resolution = 16;
  cfg.frames = 8;
  cfg.base_channels = 16;
  cfg.batch_size = 8;
  cfg.model = model;
  cfg.seed = seed;
  cfg.iterations = iterations;
  cfg.run_dir = run_dir.string();
  cfg.checkpoint_every = std::max<std::int64_t>(iterations, 1);
  cfg.sample_every = std::max<std::int64_t>(iterations, 1);
  return cfg;
}

/// Copies the listed items into a fresh root with its own manifest.
DatasetHandle export_split(const DatasetHandle& ds, const fs::path& root) {
  DatasetHandle out = ds;
  out.root = root;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const fs::path src = ds.kind == DatasetKind::Image ? ds.image_path(i) : ds.clip_dir(i);
    const fs::path dst = root / fs::relative(src, ds.root);
    fs::create_directories(dst.parent_path());
    fs::copy(src, dst, fs::copy_options::recursive);
  }
  write_manifest(out);
  return out;
}

struct Splits {
  DatasetHandle train_images, train_clips, held_images, held_clips;
};

const Splits& identity_splits() {
  static const Splits splits = [] {
    const fs::path root = workspace().dir / "identity";
    SynthOptions opts;
    opts.identities = 4;
    opts.images_per = 32;
    opts.clips_per = 24;
    opts.resolution = 16;
    opts.frames = 8;
    Rng rng(0);
    const auto [images, clips] = synth_identity_dataset(root / "all", opts, rng);
    const auto [img_train, img_held] = images.hold_out(16);
    const auto [clip_train, clip_held] = clips.hold_out(16);
    return Splits{export_split(img_train, root / "train_images"), export_split(clip_train, root / "train_clips"),
                  img_held, clip_held};
  }();
  return splits;
}

// ---------------------------------------------------------------------------
// 6. determinism and checkpoint round trip

std::vector<std::vector<std::string>> csv_without_wall_clock(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty()) cells.pop_back();  // wall_seconds
    rows.push_back(std::move(cells));
  }
  return rows;
}

bool same_record(const MetricsRecord& a, const MetricsRecord& b) {
  return a.iteration == b.iteration && a.critic_img == b.critic_img && a.critic_vid == b.critic_vid &&
         a.gen_adv_img == b.gen_adv_img && a.gen_adv_vid == b.gen_adv_vid && a.cycle == b.cycle &&
         a.identity == b.identity && a.total_gen == b.total_gen;
}

Outcome determinism_and_round_trip() {
  Outcome out;
  const auto& s = identity_splits();
  const fs::path root = workspace().dir / "determinism";

  std::vector<fs::path> runs;
  for (const char* name : {"a", "b"}) {
    auto cfg = desk_config(ModelKind::Model3, 11, 50, root / name);
    cfg.image_data = s.train_images.root.string();
    cfg.clip_data = s.train_clips.root.string();
    runs.push_back(train(cfg));
  }
  const auto rows_a = csv_without_wall_clock(runs[0] / "metrics.csv");
  const auto rows_b = csv_without_wall_clock(runs[1] / "metrics.csv");
  out.expect(rows_a.size() == 51, "expected 50 metric rows, got " + std::to_string(rows_a.size() - 1));
  out.expect(rows_a == rows_b, "seeded runs wrote different metrics");

  auto cfg = desk_config(ModelKind::Model3, 12, 20, root / "roundtrip");
  cfg.image_data = s.train_images.root.string();
  cfg.clip_data = s.train_clips.root.string();
  DatasetBatchSource source(s.train_images, s.train_clips, cfg.batch_size);
  TrainState a(cfg);
  for (int i = 0; i < 5; ++i) train_step(a, cfg, source);
  const fs::path ckpt = checkpoint_dir(root / "roundtrip", a.iteration);
  save_checkpoint(a, cfg, ckpt);
  TrainState b(cfg);
  load_checkpoint(b, cfg, ckpt);
  out.expect(a.rng == b.rng && a.iteration == b.iteration, "rng or iteration not restored");
  const auto ra = train_step(a, cfg, source);
  const auto rb = train_step(b, cfg, source);
  out.expect(same_record(ra, rb), "next step after reload differs");
  const auto na = a.networks(), nb = b.networks();
  for (std::size_t i = 0; i < na.size(); ++i) {
    const auto pa = na[i].second->parameters(), pb = nb[i].second->parameters();
    for (std::size_t j = 0; j < pa.size(); ++j)
      out.expect(torch::equal(pa[j], pb[j]), na[i].first + " parameter " + std::to_string(j) + " differs after step");
  }
  out.summary = "two 50-step runs identical (wall-clock column excluded), reload after step 5 matched step 6";
  return out;
}

// ---------------------------------------------------------------------------
// 7 + 8. identity ordering and identity curve

struct IdentityRun {
  ModelKind model;
  std::uint64_t seed;
  EvalReport report;
  std::vector<MetricsRecord> metrics;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Least-squares slope of identity against iteration over [lo, hi].
double identity_slope(const std::vector<MetricsRecord>& rows, std::int64_t lo, std::int64_t hi) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& r : rows) {
    if (r.iteration < lo || r.iteration > hi) continue;
    const double x = static_cast<double>(r.iteration);
    n += 1;
    sx += x;
    sy += r.identity;
    sxx += x * x;
    sxy += x * r.identity;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

const std::vector<IdentityRun>& identity_runs() {
  static const std::vector<IdentityRun> runs = [] {
    const auto& s = identity_splits();
    const BuiltinEmbedder f;
    std::vector<IdentityRun> out;
    for (ModelKind model : {ModelKind::Model1, ModelKind::Model3}) {
      for (std::uint64_t seed : {1, 2, 3}) {
        const fs::path run_dir = workspace().dir / (std::string("ordering_") + to_string(model) + "_" + std::to_string(seed));
        auto cfg = desk_config(model, seed, 2000, run_dir);
        cfg.image_data = s.train_images.root.string();
        cfg.clip_data = s.train_clips.root.string();
        const auto t0 = std::chrono::steady_clock::now();
        train(cfg);
        IdentityRun run{model, seed, evaluate(*latest_checkpoint(run_dir), s.held_images, s.held_clips, f, 64),
                        read_metrics_csv(run_dir / "metrics.csv")};
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("  %s seed %llu: img2vid %.5f vid2img %.5f (%lld/%lld samples, %.0fs)\n", to_string(model),
                    static_cast<unsigned long long>(seed), run.report.img2vid_score, run.report.vid2img_score,
                    static_cast<long long>(run.report.samples_img2vid),
                    static_cast<long long>(run.report.samples_vid2img), secs);
        std::fflush(stdout);
        out.push_back(std::move(run));
      }
    }
    return out;
  }();
  return runs;
}

Outcome identity_ordering() {
  Outcome out;
  std::vector<double> m1_i2v, m1_v2i, m3_i2v, m3_v2i;
  for (const auto& r : identity_runs()) {
    out.expect(r.report.samples_img2vid == 64 && r.report.samples_vid2img == 64, "fewer than 64 held-out samples");
    (r.model == ModelKind::Model1 ? m1_i2v : m3_i2v).push_back(r.report.img2vid_score);
    (r.model == ModelKind::Model1 ? m1_v2i : m3_v2i).push_back(r.report.vid2img_score);
  }
  const double a = median(m3_i2v), b = median(m1_i2v), c = median(m3_v2i), d = median(m1_v2i);
  out.expect(a < b, "img2vid: model3 median " + fmt(a) + " not below model1 " + fmt(b));
  out.expect(c < d, "vid2img: model3 median " + fmt(c) + " not below model1 " + fmt(d));
  out.summary = "median img2vid model3 " + fmt(a) + " vs model1 " + fmt(b) + "; vid2img model3 " + fmt(c) +
                " vs model1 " + fmt(d);
  return out;
}

Outcome identity_curve() {
  Outcome out;
  int negative = 0;
  std::string slopes;
  for (const auto& r : identity_runs()) {
    if (r.model != ModelKind::Model3) continue;
    const double slope = identity_slope(r.metrics, 400, 2000);
    if (slope < 0) ++negative;
    slopes += (slopes.empty() ? "" : ", ") + fmt(slope);
  }
  out.expect(negative >= 2, "only " + std::to_string(negative) + " of 3 model3 slopes negative");
  out.summary = "identity slopes over iterations 400-2000: " + slopes;
  return out;
}

// ---------------------------------------------------------------------------
// 9. videogen stability

Outcome videogen_stability() {
  Outcome out;
  const auto& s = identity_splits();
  // Width and batch stay at the config defaults; a 16-channel decoder only
  // produces texture from the 4x4 noise map and the gap never closes.
  auto cfg = desk_config(ModelKind::VideoGen, 4, 2000, workspace().dir / "videogen");
  cfg.base_channels = TrainConfig{}.base_channels;
  cfg.batch_size = TrainConfig{}.batch_size;
  cfg.clip_data = s.train_clips.root.string();
  std::vector<double> gaps;
  TrainOptions opts;
  opts.observer = [&](const MetricsRecord& r) { gaps.push_back(r.gap_vid); };
  const auto run_dir = train(cfg, opts);

  const auto rows = read_metrics_csv(run_dir / "metrics.csv");
  out.expect(rows.size() == 2000, "expected 2000 metric rows, got " + std::to_string(rows.size()));
  std::int64_t bad = 0;
  for (const auto& r : rows) {
    for (double v : {r.critic_img, r.critic_vid, r.gen_adv_img, r.gen_adv_vid, r.cycle, r.identity, r.total_gen})
      if (!std::isfinite(v)) ++bad;
  }
  for (double g : gaps)
    if (!std::isfinite(g)) ++bad;
  out.expect(bad == 0, std::to_string(bad) + " non-finite metric values");
  if (gaps.size() < 400) {
    out.expect(false, "too few steps recorded");
    return out;
  }
  const double first = std::accumulate(gaps.begin(), gaps.begin() + 200, 0.0) / 200.0;
  const double last = std::accumulate(gaps.end() - 200, gaps.end(), 0.0) / 200.0;
  out.expect(last < first, "gap over last 200 (" + fmt(last) + ") not below first 200 (" + fmt(first) + ")");
  out.summary = "no non-finite metrics; mean gap first 200 " + fmt(first) + ", last 200 " + fmt(last);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Run just these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  torch::set_num_threads(1);
  torch::manual_seed(0);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, gradient_penalty_suite}, {2, double_backward_check},      {3, generator_differentiability},
      {4, shape_law_suite},        {5, loss_oracle_suite},          {6, determinism_and_round_trip},
      {7, identity_ordering},      {8, identity_curve},             {9, videogen_stability},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && o.pass;
    std::printf("criterion %d: %s  %s (%.1fs)\n", id, o.pass ? "PASS" : "FAIL", o.summary.c_str(), secs);
    for (const auto& f : o.failures) std::printf("    %s\n", f.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
