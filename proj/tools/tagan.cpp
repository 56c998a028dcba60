// SPDX-License-Identifier: Apache-2.0
//
// tagan: dataset generation, training, manipulation, evaluation, saliency
// and interpolation from one binary.
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "tagan/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Text-adaptive GAN toolkit"};
  app.require_subcommand(1);

  tagan::cli::DatasetArgs dataset_args;
  auto* dataset = app.add_subcommand("dataset", "Generate a synthetic dataset");
  dataset->add_option("--seed", dataset_args.seed, "Generation seed");
  dataset->add_option("--n-train", dataset_args.n_train, "Training samples");
  dataset->add_option("--n-test", dataset_args.n_test, "Test samples");
  dataset->add_option("--out", dataset_args.out, "Output directory")->required();
  dataset->add_flag("--bordered", dataset_args.bordered,
                    "Objects carry a 2px colored border");

  tagan::cli::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", train_args.config_path, "key=value config file")
      ->required();
  train->add_flag("--resume", train_args.resume, "Resume from ckpt-latest");
  train->add_flag("--force", train_args.force,
                  "Ignore a checkpoint/config digest mismatch");

  tagan::cli::ManipulateArgs man_args;
  auto* manipulate =
      app.add_subcommand("manipulate", "Apply a text edit to one image");
  manipulate->add_option("--checkpoint", man_args.checkpoint)->required();
  manipulate->add_option("--image", man_args.image, "32x32 P6 input")->required();
  manipulate->add_option("--text", man_args.text, "Target description")->required();
  manipulate->add_option("--seed", man_args.seed);
  manipulate->add_option("--out", man_args.out, "Output P6 path")->required();
  manipulate->add_option("--config", man_args.config,
                         "Run config (default: next to checkpoint)");
  manipulate->add_option("--vocab", man_args.vocab,
                         "Vocabulary (default: next to checkpoint)");
  manipulate->add_flag("--force", man_args.force);

  tagan::cli::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", eval_args.checkpoint)->required();
  eval->add_option("--dataset", eval_args.dataset)->required();
  eval->add_option("--out", eval_args.out_dir, "Report directory")->required();
  eval->add_option("--seed", eval_args.seed);
  eval->add_option("--trials", eval_args.trials, "Reconstruction trials");
  eval->add_option("--k", eval_args.retrieval_k, "Retrieval AP@K cutoff");
  eval->add_flag("--border-edits", eval_args.border_edits,
                 "Score border-color edits instead of fill color");
  eval->add_option("--config", eval_args.config);
  eval->add_option("--vocab", eval_args.vocab);
  eval->add_flag("--force", eval_args.force);

  tagan::cli::SaliencyArgs sal_args;
  auto* saliency =
      app.add_subcommand("saliency", "Export per-word saliency maps");
  saliency->add_option("--checkpoint", sal_args.checkpoint)->required();
  saliency->add_option("--image", sal_args.image)->required();
  saliency->add_option("--text", sal_args.text)->required();
  saliency->add_option("--out", sal_args.out_dir, "Output directory")->required();
  saliency->add_option("--config", sal_args.config);
  saliency->add_option("--vocab", sal_args.vocab);
  saliency->add_flag("--force", sal_args.force);

  tagan::cli::InterpArgs interp_args;
  auto* interp =
      app.add_subcommand("interp", "Interpolate between two descriptions");
  interp->add_option("--checkpoint", interp_args.checkpoint)->required();
  interp->add_option("--image", interp_args.image)->required();
  interp->add_option("--text-a", interp_args.text_a)->required();
  interp->add_option("--text-b", interp_args.text_b)->required();
  interp->add_option("--steps", interp_args.steps);
  interp->add_option("--out", interp_args.out, "Strip P6 path")->required();
  interp->add_option("--config", interp_args.config);
  interp->add_option("--vocab", interp_args.vocab);
  interp->add_flag("--force", interp_args.force);

  CLI11_PARSE(app, argc, argv);

  try {
    if (dataset->parsed()) {
      tagan::cli::cmd_dataset(dataset_args, std::cout);
    } else if (train->parsed()) {
      tagan::cli::cmd_train(train_args, std::cout);
    } else if (manipulate->parsed()) {
      tagan::cli::cmd_manipulate(man_args, std::cout);
    } else if (eval->parsed()) {
      tagan::cli::cmd_eval(eval_args, std::cout);
    } else if (saliency->parsed()) {
      tagan::cli::cmd_saliency(sal_args, std::cout);
    } else if (interp->parsed()) {
      tagan::cli::cmd_interp(interp_args, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
