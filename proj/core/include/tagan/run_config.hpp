// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagan/sha256.hpp"

namespace tagan {

/// Flat key=value run configuration. Unknown keys are rejected with the
/// offending key and line number; `dataset` and `out` are required.
struct RunConfig {
  // Paths
  std::string dataset;
  std::string out;

  // Optimization
  std::uint64_t seed = 1;
  int epochs = 50;
  int batch = 64;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda1 = 10.0;
  double lambda2 = 2.0;
  double kl_weight = 1e-2;
  int lr_decay_epochs = 30;
  double lr_decay_factor = 0.5;
  bool literal_g_real_term = false;

  // Intervals
  int checkpoint_interval = 10;
  int eval_interval = 0;

  // Model dimensions
  int d_word = 32;
  int d_cond = 16;
  std::vector<int> pyr_channels = {32, 64, 128};
  std::vector<int> gen_channels = {16, 32};
  std::vector<int> disc_scales = {0, 1, 2};
  int res_blocks = 2;

  static RunConfig parse_file(const std::string& path);
  static RunConfig parse_string(const std::string& text,
                                const std::string& origin = "<string>");

  /// Keys in fixed order with normalized number formatting; equal configs
  /// serialize identically regardless of their source spelling.
  std::string canonical() const;
  Digest256 digest() const;

  void validate() const;
  void save(const std::string& path) const;
};

}  // namespace tagan
