// SPDX-License-Identifier: Apache-2.0
#include "tagan/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "tagan/eval.hpp"
#include "tagan/image_io.hpp"
#include "tagan/sha256.hpp"
#include "tagan/synth_data.hpp"
#include "tagan/training.hpp"

namespace tagan::cli {

namespace fs = std::filesystem;

namespace {

std::string sibling(const std::string& anchor, const char* name) {
  return (fs::path(anchor).parent_path() / name).string();
}

/// Tokenize free-text CLI input; unknown tokens warn and map to <unk>.
Caption encode_cli_text(const std::string& text, const Vocabulary& vocab,
                        std::ostream& console) {
  std::vector<std::string> unknown;
  Caption caption = encode_caption(text, vocab, /*allow_unknown=*/true, &unknown);
  for (const auto& token : unknown) {
    console << "warning: token '" << token << "' is not in the vocabulary; "
            << "using <unk>\n";
  }
  return caption;
}

TensorF read_input_image(const std::string& path, int expected_side) {
  const RgbImage img = read_ppm(path);
  if (img.width != expected_side || img.height != expected_side) {
    throw DimensionError("input image must be " + std::to_string(expected_side) +
                         "x" + std::to_string(expected_side) + ", got " +
                         std::to_string(img.width) + "x" +
                         std::to_string(img.height) + ": " + path);
  }
  return rgb_to_tensor<float>(img);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::exists(dir)) throw IoError("cannot create directory: " + dir);
}

}  // namespace

LoadedModel load_model_for_inference(const std::string& checkpoint_path,
                                     std::string config_path,
                                     std::string vocab_path, bool force) {
  if (config_path.empty()) config_path = sibling(checkpoint_path, "config.txt");
  if (vocab_path.empty()) vocab_path = sibling(checkpoint_path, "vocab.txt");

  Checkpoint ckpt = Checkpoint::load(checkpoint_path);
  RunConfig cfg = RunConfig::parse_file(config_path);
  if (ckpt.config_digest != cfg.digest() && !force) {
    throw ConfigError("config digest mismatch between " + config_path + " and " +
                      checkpoint_path + " (pass --force to load anyway)");
  }
  Vocabulary vocab = Vocabulary::load(vocab_path);

  TaganModel<float> model = TaganModel<float>::create(
      ModelConfig::from_run_config(cfg, vocab.size()), /*init_seed=*/0);
  model.load_params(ckpt);
  return LoadedModel{std::move(cfg), std::move(vocab), std::move(model)};
}

void cmd_dataset(const DatasetArgs& args, std::ostream& console) {
  if (args.out.empty()) throw ContractError("dataset: output directory required");
  synth::DatasetConfig cfg;
  cfg.seed = args.seed;
  cfg.n_train = args.n_train;
  cfg.n_test = args.n_test;
  cfg.bordered = args.bordered;
  const synth::Dataset dataset = synth::build_dataset(cfg);
  ensure_dir(args.out);
  synth::save_dataset(dataset, args.out);
  console << "manifest_hash=" << synth::manifest_hash(args.out) << '\n';
  console << "vocab_size=" << dataset.vocab.size() << '\n';
  console << "train=" << dataset.train.size() << " test=" << dataset.test.size()
          << " held_out_combos=" << dataset.held_out_combos.size() << '\n';
}

void cmd_train(const TrainArgs& args, std::ostream& console) {
  const RunConfig cfg = RunConfig::parse_file(args.config_path);
  const TrainRunResult result =
      run_training(cfg, args.resume, args.force, &console);
  console << "steps_run=" << result.steps_run
          << " final_epoch=" << result.final_epoch
          << " checkpoint=" << result.final_checkpoint << '\n';
}

void cmd_manipulate(const ManipulateArgs& args, std::ostream& console) {
  if (args.text.empty()) throw ContractError("manipulate: text must be non-empty");
  LoadedModel loaded = load_model_for_inference(args.checkpoint, args.config,
                                                args.vocab, args.force);
  const TensorF image = read_input_image(args.image, synth::kCanvas);
  const Caption caption = encode_cli_text(args.text, loaded.vocab, console);

  ad::Graph<float> graph;
  auto gen = loaded.model.generator.bind(graph, /*frozen=*/true);
  Rng rng(args.seed);
  auto result = gen.generate(graph.constant(image), caption.ids, rng);
  write_ppm(args.out, tensor_to_rgb(
                          TensorF(result.image.shape(), result.image.value())));

  // Word attention of the generator's own encoder, for transparency.
  auto words = gen.text_encoder().encode_words(caption.ids);
  auto alpha = gen.text_encoder().word_attention(words);
  for (std::size_t i = 0; i < caption.ids.size(); ++i) {
    console << "alpha " << loaded.vocab.token_of(caption.ids[i]) << ' '
            << alpha.value()[i] << '\n';
  }
  console << "wrote " << args.out << '\n';
}

void cmd_eval(const EvalArgs& args, std::ostream& console) {
  LoadedModel loaded = load_model_for_inference(args.checkpoint, args.config,
                                                args.vocab, args.force);
  const synth::Dataset dataset = synth::load_dataset(args.dataset);
  if (dataset.vocab.size() != loaded.vocab.size()) {
    throw ContractError("dataset vocabulary (" +
                        std::to_string(dataset.vocab.size()) +
                        " tokens) differs from the model's (" +
                        std::to_string(loaded.vocab.size()) + ")");
  }
  ensure_dir(args.out_dir);

  auto edit = eval::make_model_edit_fn(loaded.model, loaded.vocab);
  const auto manip = eval::manipulation_eval(
      dataset.test, edit, args.seed,
      args.border_edits ? eval::EditKind::border_color
                        : eval::EditKind::object_color);
  const auto recon =
      eval::reconstruction_eval(dataset.test, edit, args.trials, args.seed);
  auto scorer = eval::make_model_scorer(loaded.model, loaded.vocab, dataset.test);
  const auto retr = eval::retrieval_eval(dataset.test, args.retrieval_k, scorer);

  eval::EvalReport report;
  report.manipulation_accuracy = manip.accuracy;
  report.background_l2_rms = manip.background_rms;
  report.background_l2_mse = manip.background_mse;
  report.positive_text_l2_rms = recon.rms;
  report.positive_text_l2_mse = recon.mse;
  report.top1_acc = retr.top1_acc;
  report.ap_at_k = retr.ap_at_k;
  report.retrieval_k = retr.k;
  report.n_samples = static_cast<int>(dataset.test.size());
  report.save(args.out_dir + "/report.txt", args.out_dir + "/report.json");
  console << report.to_text();
}

void cmd_saliency(const SaliencyArgs& args, std::ostream& console) {
  LoadedModel loaded = load_model_for_inference(args.checkpoint, args.config,
                                                args.vocab, args.force);
  const TensorF image = read_input_image(args.image, synth::kCanvas);
  const Caption caption = encode_cli_text(args.text, loaded.vocab, console);
  ensure_dir(args.out_dir);

  const int t_len = caption.length();
  const int j_len = loaded.model.discriminator.cfg.num_scales();
  std::ofstream sidecar(args.out_dir + "/attention.txt", std::ios::trunc);
  if (!sidecar) throw IoError("cannot write " + args.out_dir + "/attention.txt");

  for (int i = 0; i < t_len; ++i) {
    SaliencyMap<float> map_for_sidecar;
    for (int j = 0; j < j_len; ++j) {
      const auto sal =
          saliency_map(loaded.model.discriminator, image, caption.ids, i, j);
      char name[64];
      std::snprintf(name, sizeof(name), "saliency_w%02d_s%d.pgm", i, j);
      write_pgm(args.out_dir + "/" + std::string(name),
                tensor_to_gray(sal.normalized));
      if (j == 0) map_for_sidecar = sal;
    }
    sidecar << "word=" << loaded.vocab.token_of(caption.ids[i])
            << " alpha=" << map_for_sidecar.alpha;
    for (int j = 0; j < j_len; ++j) {
      sidecar << " beta" << j << '=' << map_for_sidecar.beta[j];
    }
    sidecar << '\n';
  }
  console << "wrote " << t_len * j_len << " saliency maps and attention.txt to "
          << args.out_dir << '\n';
}

void cmd_interp(const InterpArgs& args, std::ostream& console) {
  if (args.steps < 2) throw ContractError("interp: steps must be >= 2");
  LoadedModel loaded = load_model_for_inference(args.checkpoint, args.config,
                                                args.vocab, args.force);
  const TensorF image = read_input_image(args.image, synth::kCanvas);
  const Caption cap_a = encode_cli_text(args.text_a, loaded.vocab, console);
  const Caption cap_b = encode_cli_text(args.text_b, loaded.vocab, console);

  const auto conds = interpolate_condition(loaded.model.generator, cap_a.ids,
                                           cap_b.ids, args.steps);
  std::vector<TensorF> frames;
  frames.reserve(conds.size());
  for (const auto& cond : conds) {
    ad::Graph<float> graph;
    auto gen = loaded.model.generator.bind(graph, /*frozen=*/true);
    auto frame = gen.generate_from(
        graph.constant(image),
        graph.constant(TensorF({static_cast<int>(cond.size())}, cond)));
    frames.emplace_back(frame.shape(), frame.value());
  }
  write_ppm(args.out, eval::make_strip(frames));
  for (std::size_t f = 0; f + 1 < frames.size(); ++f) {
    console << "frame_mad " << f << ' ' << f + 1 << ' '
            << eval::frame_mad(frames[f], frames[f + 1]) << '\n';
  }
  console << "wrote " << args.out << '\n';
}

}  // namespace tagan::cli
