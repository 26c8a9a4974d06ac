// musa/train/config.hpp

// Copyright 2026  The musa authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MUSA_TRAIN_CONFIG_HPP_
#define MUSA_TRAIN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "musa/model/config.hpp"
#include "musa/train/objective.hpp"

namespace musa::train {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainingConfig {
  LossWeights weights;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  double initial_lr = 2e-4;
  double lr_decay = 0.999;  // per epoch (one manifest pass)
  double grad_clip = 0.0;   // global-norm clip, 0 disables
  std::int64_t total_steps = 2000;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double crop_seconds = 1.0;
  double segment_min_seconds = 0.6;
  double segment_max_seconds = 1.2;
  double ema_decay = 0.99;
  int dead_code_steps = 200;
  int init_utterances = 64;  // utterances used for k-means codebook init
  std::int64_t checkpoint_every = 500;

  std::string profile = "toy";
  model::ModelConfig model = model::ModelConfig::toy();

  std::string tokenizer_path;  // empty: train one on the corpus
  int tokenizer_steps = 300;

  /// Learning rate for a given epoch: initial_lr * lr_decay^epoch.
  double lr(std::int64_t epoch) const;
  void validate() const;
};

/// Profile defaults followed by `[section] key = value` entries.
TrainingConfig parse_config(const std::string& text);
TrainingConfig read_config(const std::filesystem::path& path);
/// Applies one `section.key=value` override.
void apply_override(TrainingConfig& cfg, const std::string& assignment);
/// Canonical text form; parse_config(to_text(c)) reproduces c exactly.
std::string to_text(const TrainingConfig& cfg);

model::ModelConfig profile_config(const std::string& name);

}  // namespace musa::train

#endif  // MUSA_TRAIN_CONFIG_HPP_
