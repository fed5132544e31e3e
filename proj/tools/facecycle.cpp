// facecycle: command-line front end for dataset synthesis, training,
// translation and evaluation.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "facecycle/data.hpp"
#include "facecycle/errors.hpp"
#include "facecycle/identity.hpp"
#include "facecycle/trainer.hpp"

namespace fc = facecycle;

namespace {

constexpr int kUsageError = 2;

int run_synth(const std::string& out, const fc::SynthOptions& opts, std::uint64_t seed) {
  fc::Rng rng(seed);
  auto [images, clips] = fc::synth_identity_dataset(out, opts, rng);
  std::cout << "wrote " << images.size() << " images to " << images.root.string() << "\n"
            << "wrote " << clips.size() << " clips to " << clips.root.string() << "\n";
  return 0;
}

int run_train(const std::string& config_path, bool resume) {
  const auto cfg = fc::load_train_config(config_path);
  fc::TrainOptions opts;
  opts.resume = resume;
  const std::int64_t report_every = std::max<std::int64_t>(1, cfg.iterations / 20);
  opts.observer = [&](const fc::MetricsRecord& r) {
    if (r.iteration % report_every == 0 || r.iteration == cfg.iterations)
      std::cout << "iter " << r.iteration << "  critic_img " << r.critic_img << "  critic_vid " << r.critic_vid
                << "  cycle " << r.cycle << "  identity " << r.identity << "  total_gen " << r.total_gen << "\n";
  };
  const auto dir = fc::train(cfg, opts);
  std::cout << "run directory: " << dir.string() << "\n";
  return 0;
}

int run_evaluate(const std::string& ckpt, const std::string& images, const std::string& clips,
                 const std::string& embedder, std::int64_t samples, const std::string& out) {
  const auto f = fc::make_embedder(embedder);
  const auto report = fc::evaluate(ckpt, fc::DatasetHandle::open(images), fc::DatasetHandle::open(clips), *f, samples);
  fc::write_report(report, out);
  std::cout << "img2vid facenet score " << report.img2vid_score << " (" << report.samples_img2vid << " samples)\n"
            << "vid2img facenet score " << report.vid2img_score << " (" << report.samples_vid2img << " samples)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Identity-aware cyclic image<->video translation"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic identity dataset");
  std::string synth_out;
  fc::SynthOptions synth_opts;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--identities", synth_opts.identities, "Number of identities")->capture_default_str();
  synth->add_option("--images-per", synth_opts.images_per, "Images per identity")->capture_default_str();
  synth->add_option("--clips-per", synth_opts.clips_per, "Clips per identity")->capture_default_str();
  synth->add_option("--resolution", synth_opts.resolution, "Image side in pixels")->capture_default_str();
  synth->add_option("--frames", synth_opts.frames, "Frames per clip")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  std::string config_path;
  bool resume = false;
  train->add_option("--config", config_path, "TrainConfig JSON")->required()->check(CLI::ExistingFile);
  train->add_flag("--resume", resume, "Continue from the latest checkpoint in run_dir");

  auto* translate = app.add_subcommand("translate", "Translate one image or clip with a checkpoint");
  std::string t_ckpt, t_direction, t_input, t_out;
  translate->add_option("--checkpoint", t_ckpt, "Checkpoint directory")->required();
  translate->add_option("--direction", t_direction, "img2vid or vid2img")->required();
  translate->add_option("--input", t_input, "Input PNG (img2vid) or frame directory (vid2img)")->required();
  translate->add_option("--out", t_out, "Output directory or .png path")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Score identity preservation of a checkpoint");
  std::string e_ckpt, e_images, e_clips, e_embedder = "builtin", e_out = "report.json";
  std::int64_t e_samples = 1000;
  evaluate->add_option("--checkpoint", e_ckpt, "Checkpoint directory")->required();
  evaluate->add_option("--images", e_images, "Image dataset root")->required();
  evaluate->add_option("--clips", e_clips, "Clip dataset root")->required();
  evaluate->add_option("--embedder", e_embedder, "builtin or file:PATH")->capture_default_str();
  evaluate->add_option("--samples", e_samples, "Samples per direction")->capture_default_str();
  evaluate->add_option("--out", e_out, "Report path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth) return run_synth(synth_out, synth_opts, synth_seed);
    if (*train) return run_train(config_path, resume);
    if (*translate) {
      fc::Direction direction;
      try {
        direction = fc::parse_direction(t_direction);
      } catch (const fc::Error& e) {
        std::cerr << e.what() << "\n\n" << translate->help();
        return kUsageError;
      }
      for (const auto& p : fc::translate_files(t_ckpt, direction, t_input, t_out)) std::cout << p.string() << "\n";
      return 0;
    }
    if (*evaluate) return run_evaluate(e_ckpt, e_images, e_clips, e_embedder, e_samples, e_out);
  } catch (const fc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
