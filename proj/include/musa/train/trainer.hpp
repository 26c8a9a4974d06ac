// musa/train/trainer.hpp

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

#ifndef MUSA_TRAIN_TRAINER_HPP_
#define MUSA_TRAIN_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "musa/ad/optim.hpp"
#include "musa/model/model.hpp"
#include "musa/teacher/teacher.hpp"
#include "musa/train/config.hpp"
#include "musa/train/data.hpp"

namespace musa::train {

using Model = model::MusaModel<float>;

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Named scalar values of one step, in a fixed order.
struct StepLog {
  std::int64_t step = 0;
  std::vector<std::pair<std::string, double>> values;

  double get(const std::string& name) const;
};

/// Everything needed to resume training or run inference.
struct Checkpoint {
  std::string config_text;
  std::vector<std::string> speakers;
  std::string label_hash;
  std::int64_t step = 0;
  std::vector<std::pair<std::string, Eigen::MatrixXf>> generator;
  std::vector<std::pair<std::string, Eigen::MatrixXf>> discriminator;
  model::QuantizerBank<float> bank;
  std::int64_t g_opt_steps = 0, d_opt_steps = 0;
  std::vector<Eigen::MatrixXf> g_m, g_v, d_m, d_v;
  teacher::TokenizerState tokenizer;

  TrainingConfig config() const { return parse_config(config_text); }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<char> serialize_checkpoint(const Checkpoint& c);
Checkpoint deserialize_checkpoint(const std::vector<char>& bytes);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Builds a model from a checkpoint's configuration and copies in its
/// parameters and codebooks.
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& c);

/// Loads every manifest entry, labels speakers and computes teacher tokens.
std::vector<Utterance> load_corpus(const std::vector<ManifestEntry>& entries, const LabelTable& labels,
                                   const teacher::TokenizerState& tokenizer);

/// Synthetic-teacher features of a corpus, for tokenizer training.
std::vector<teacher::TeacherFeatureSequence> teacher_features(const std::vector<ManifestEntry>& entries);

/// Alternating generator/discriminator optimisation of the composite
/// objective. All randomness of step s is derived from (seed, s), so a run
/// resumed from a checkpoint continues exactly as the uninterrupted run.
class Trainer {
 public:
  Trainer(const TrainingConfig& config, const std::vector<ManifestEntry>& manifest);
  Trainer(const Checkpoint& checkpoint, const std::vector<ManifestEntry>& manifest);

  /// One optimisation step. Throws TrainingError on a non-finite loss.
  StepLog step();
  /// Steps until total_steps, calling `on_step` after each.
  void run(const std::function<void(const StepLog&)>& on_step = {});

  Checkpoint checkpoint() const;
  /// Moves the end of training, e.g. to extend a resumed run.
  void set_total_steps(std::int64_t steps);

  const TrainingConfig& config() const { return config_; }
  const LabelTable& labels() const { return labels_; }
  const Model& model() const { return *model_; }
  Model& model() { return *model_; }
  const std::vector<Utterance>& corpus() const { return corpus_; }
  std::int64_t steps_done() const { return step_; }
  std::int64_t steps_per_epoch() const;
  std::int64_t epoch() const { return step_ / steps_per_epoch(); }
  double learning_rate() const { return config_.lr(epoch()); }

  /// Items of step s: utterance indices and their training examples.
  std::vector<std::size_t> batch_indices(std::int64_t s) const;
  TrainingExample<float> make_example(const Utterance& u, std::uint64_t stream) const;

 private:
  void init_codebooks();
  void build(const std::vector<ManifestEntry>& manifest);

  TrainingConfig config_;
  LabelTable labels_;
  teacher::TokenizerState tokenizer_;
  std::vector<Utterance> corpus_;
  std::unique_ptr<Model> model_;
  std::unique_ptr<ad::AdamW<float>> g_opt_, d_opt_;
  std::int64_t step_ = 0;
};

/// `step,term,value` rows, appended.
class LossLog {
 public:
  explicit LossLog(const std::filesystem::path& path, bool append = false);
  void write(const StepLog& log);

 private:
  std::filesystem::path path_;
};

std::vector<StepLog> read_loss_log(const std::filesystem::path& path);

}  // namespace musa::train

#endif  // MUSA_TRAIN_TRAINER_HPP_
