// musa/harness/harness.hpp

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

#ifndef MUSA_HARNESS_HARNESS_HPP_
#define MUSA_HARNESS_HARNESS_HPP_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "musa/anon/anonymizer.hpp"
#include "musa/metrics/metrics.hpp"
#include "musa/train/trainer.hpp"

namespace musa::harness {

namespace fs = std::filesystem;

// Fixed file names inside an --out directory.
inline constexpr const char* kRunFile = "run.json";
inline constexpr const char* kCheckpointFile = "checkpoint.ckpt";
inline constexpr const char* kLossFile = "loss.csv";
inline constexpr const char* kSpeakersFile = "speakers.tsv";
inline constexpr const char* kConfigFile = "config.ini";
inline constexpr const char* kTokenizerFile = "tokenizer.tok";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kScenarioFile = "scenario.json";
inline constexpr const char* kScoresFile = "scores.tsv";
inline constexpr const char* kGvdFile = "gvd.json";

// ------------------------------------------------------------------ run record

std::string config_hash(const train::TrainingConfig& cfg);

/// Config file (if any), then MUSA_SEED, then section.key=value overrides.
train::TrainingConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides);

struct RunInfo {
  std::string command;
  std::vector<std::string> args;
  std::string config_hash;
  std::string checkpoint_hash;  // empty when no checkpoint is involved
  std::uint64_t seed = 0;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
};

void write_run_json(const fs::path& out_dir, const RunInfo& info);

// ------------------------------------------------------------------ training

struct TrainOptions {
  bool resume = false;        // continue from out_dir/checkpoint.ckpt if present
  int log_every = 50;
  std::optional<std::int64_t> total_steps;  // overrides the config, also on resume
  std::ostream* progress = nullptr;
};

/// Trains into out_dir: checkpoint.ckpt (every checkpoint_every steps and at
/// the end), loss.csv, speakers.tsv and config.ini.
train::Checkpoint train_to_dir(const train::TrainingConfig& cfg, const std::vector<train::ManifestEntry>& manifest,
                               const fs::path& out_dir, const TrainOptions& opts = {});

void write_speakers(const train::LabelTable& labels, const fs::path& path);

/// Tokenizer over precomputed teacher features (a feature directory) or, when
/// given a manifest, over synthetic-teacher features of its audio.
teacher::TokenizerState train_tokenizer_from(const std::optional<fs::path>& feature_dir,
                                             const std::optional<fs::path>& manifest,
                                             const teacher::TokenizerConfig& cfg,
                                             teacher::TokenizerReport* report = nullptr);

// ------------------------------------------------------------------ codes

/// `.codes`: u32 N, u32 K, u32 t, then N*t little-endian u16 indices, row-major.
void write_codes(const model::CodeSequence& codes, const fs::path& path);
model::CodeSequence read_codes(const fs::path& path);

/// `<utt_id>.codes` for every manifest entry.
void export_codes(const anon::Model& m, const std::vector<train::ManifestEntry>& manifest, const fs::path& out_dir);

// ------------------------------------------------------------------ scoring

/// Maps audio to a speaker embedding and scores embedding pairs. score() is
/// symmetric.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual Eigen::VectorXd embed(const dsp::Waveform& w) const = 0;
  /// Called once with every embedding that will be scored.
  virtual void fit(const std::vector<Eigen::VectorXd>& embeddings) { (void)embeddings; }
  virtual double score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const = 0;
};

/// Model-free spectral-shape features, standardised on the fitted set.
class ProbeProvider : public ScoreProvider {
 public:
  Eigen::VectorXd embed(const dsp::Waveform& w) const override { return metrics::probe_features(w); }
  void fit(const std::vector<Eigen::VectorXd>& embeddings) override { scorer_ = metrics::ProbeScorer(embeddings); }
  double score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override { return scorer_.score(a, b); }

 private:
  metrics::ProbeScorer scorer_;
};

/// Cosine between speaker-encoder embeddings, mapped to scale * cos + offset.
class EncoderProvider : public ScoreProvider {
 public:
  explicit EncoderProvider(const anon::Model& m, double scale = 10.0, double offset = 0.0)
      : model_(&m), scale_(scale), offset_(offset) {}
  Eigen::VectorXd embed(const dsp::Waveform& w) const override;
  double score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const override;

 private:
  const anon::Model* model_;
  double scale_, offset_;
};

std::unique_ptr<ScoreProvider> make_provider(const std::string& name, const anon::Model* model);

// ------------------------------------------------------------------ scenarios

enum class Scenario { kIgnorant, kLazyInformed };
Scenario parse_scenario(const std::string& name);
std::string scenario_name(Scenario s);

struct ScenarioSpec {
  Scenario scenario = Scenario::kIgnorant;
  fs::path checkpoint;             // anonymizes trial audio; empty leaves it as is
  fs::path enrollment_checkpoint;  // lazy-informed only: anonymizes enrollment audio
  double alpha = 0.0;
  std::string scorer = "probe";
};

struct TrialKey {
  std::string enroll_id;
  std::string test_id;
  bool is_target = false;
};

/// `enroll_utt<TAB>test_utt<TAB>target|nontarget`.
std::vector<TrialKey> parse_trial_list(const std::string& text);
std::vector<TrialKey> read_trial_list(const fs::path& path);

struct ScenarioResult {
  std::string scenario;
  metrics::EerResult eer;
  std::vector<metrics::TrialScore> scores;
  int num_target = 0;
  int num_nontarget = 0;
  nlohmann::ordered_json to_json() const;
};

/// Enrollment is original audio (ignorant) or audio anonymized with a second
/// checkpoint (lazy-informed); trial audio goes through the evaluated
/// checkpoint. Writes scenario.json and scores.tsv when out_dir is non-empty.
ScenarioResult run_scenario(const ScenarioSpec& spec, const std::vector<TrialKey>& trials,
                            const std::vector<train::ManifestEntry>& manifest, const fs::path& out_dir = {});

// ------------------------------------------------------------------ voice distinctiveness

struct VoiceDistinctiveness {
  metrics::SimilarityMatrix oo, oa, ao, aa;
  double gvd = 0.0;
  nlohmann::ordered_json to_json() const;
};

/// Original and anonymized utterances grouped by speaker, scored pairwise.
VoiceDistinctiveness voice_distinctiveness(const std::vector<std::string>& speakers,
                                           const std::vector<std::vector<dsp::Waveform>>& original,
                                           const std::vector<std::vector<dsp::Waveform>>& anonymized,
                                           ScoreProvider& provider);

/// Writes m_oo.csv, m_oa.csv, m_ao.csv, m_aa.csv and gvd.json.
void write_voice_distinctiveness(const VoiceDistinctiveness& vd, const fs::path& out_dir);
VoiceDistinctiveness read_voice_distinctiveness(const fs::path& dir);

// ------------------------------------------------------------------ text metrics

/// Kaldi-style text file: `utt_id word word ...` per line.
std::map<std::string, std::string> read_transcripts(const fs::path& path);

/// Errors summed over every reference utterance; a missing hypothesis counts
/// as empty.
metrics::WerResult corpus_wer(const std::map<std::string, std::string>& ref,
                              const std::map<std::string, std::string>& hyp, bool characters);

/// Pitch tracks of both files, truncated to the shorter one.
double pitch_correlation_files(const fs::path& a, const fs::path& b);

// ------------------------------------------------------------------ plots

/// Heat map of the block matrix [[O/O, O/A], [A/O, A/A]].
std::string gvd_matrix_svg(const VoiceDistinctiveness& vd);
/// One polyline per term, log-scaled values.
std::string loss_curve_svg(const std::vector<train::StepLog>& log, const std::vector<std::string>& terms);

// ------------------------------------------------------------------ CLI

/// Entry point of the `musa` tool. Returns the process exit code: 0 on
/// success or help, 2 on a command-line error, 1 on a runtime failure.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace musa::harness

#endif  // MUSA_HARNESS_HARNESS_HPP_
