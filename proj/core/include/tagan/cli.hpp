// SPDX-License-Identifier: Apache-2.0
//
// Command implementations behind the `tagan` tool. Each command throws on
// failure and writes every declared artifact before returning, so the
// binary exits 0 exactly when the artifacts exist.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tagan/model.hpp"
#include "tagan/vocab.hpp"

namespace tagan::cli {

struct DatasetArgs {
  std::uint64_t seed = 1;
  int n_train = 2000;
  int n_test = 200;
  std::string out;
  bool bordered = false;
};
void cmd_dataset(const DatasetArgs& args, std::ostream& console);

struct TrainArgs {
  std::string config_path;
  bool resume = false;
  bool force = false;
};
void cmd_train(const TrainArgs& args, std::ostream& console);

struct ManipulateArgs {
  std::string checkpoint;
  std::string image;
  std::string text;
  std::string out;
  std::uint64_t seed = 1;
  std::string config;  // defaults to config.txt next to the checkpoint
  std::string vocab;   // defaults to vocab.txt next to the checkpoint
  bool force = false;
};
void cmd_manipulate(const ManipulateArgs& args, std::ostream& console);

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string out_dir;
  std::uint64_t seed = 1;
  int trials = 50;
  int retrieval_k = 10;
  bool border_edits = false;
  std::string config;
  std::string vocab;
  bool force = false;
};
void cmd_eval(const EvalArgs& args, std::ostream& console);

struct SaliencyArgs {
  std::string checkpoint;
  std::string image;
  std::string text;
  std::string out_dir;
  std::string config;
  std::string vocab;
  bool force = false;
};
void cmd_saliency(const SaliencyArgs& args, std::ostream& console);

struct InterpArgs {
  std::string checkpoint;
  std::string image;
  std::string text_a;
  std::string text_b;
  std::string out;
  int steps = 5;
  std::string config;
  std::string vocab;
  bool force = false;
};
void cmd_interp(const InterpArgs& args, std::ostream& console);

/// Checkpoint + config + vocabulary resolved into a ready model. The
/// config digest must match the checkpoint's unless force is set.
struct LoadedModel {
  RunConfig cfg;
  Vocabulary vocab;
  TaganModel<float> model;
};
LoadedModel load_model_for_inference(const std::string& checkpoint_path,
                                     std::string config_path,
                                     std::string vocab_path, bool force);

}  // namespace tagan::cli
