// musa/metrics/metrics.hpp

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

#ifndef MUSA_METRICS_METRICS_HPP_
#define MUSA_METRICS_METRICS_HPP_

#include <cmath>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "musa/dsp/audio.hpp"

namespace musa::metrics {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ------------------------------------------------------------------ EER

struct TrialScore {
  std::string enroll_id;
  std::string test_id;
  double score = 0.0;
  bool is_target = false;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// A trial is accepted when score >= threshold. The ROC is swept over every
/// distinct score and the FPR == FNR crossing is found by linear
/// interpolation between the two adjacent operating points.
EerResult compute_eer(const std::vector<TrialScore>& trials);

/// `enroll<TAB>test<TAB>score<TAB>target|nontarget`, '#' comments allowed.
std::vector<TrialScore> parse_trials(const std::string& text);
std::vector<TrialScore> read_trials(const std::filesystem::path& path);
void write_trials(const std::vector<TrialScore>& trials, const std::filesystem::path& path);

// ------------------------------------------------------------------ WER

struct WerResult {
  double wer = 0.0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;
  int errors() const { return substitutions + deletions + insertions; }
};

/// Unit-cost Levenshtein alignment; the rate is always over |ref|. Among
/// equal-cost alignments the backtrace prefers match/substitution, then
/// deletion, then insertion.
WerResult compute_wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

std::vector<std::string> split_words(const std::string& text);
/// UTF-8 code points, whitespace dropped (character error rate).
std::vector<std::string> split_chars(const std::string& text);

// ------------------------------------------------------------------ pitch

/// Pearson r of f0 over frames voiced in both tracks.
double pitch_correlation(const dsp::PitchTrack& a, const dsp::PitchTrack& b);

// ------------------------------------------------------------------ voice distinctiveness

struct SimilarityMatrix {
  std::vector<std::string> speakers;
  Eigen::MatrixXd values;
};

template <typename Item>
using ScoreFn = std::function<double(const Item&, const Item&)>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// M(i, j) = sigmoid(mean LLR over pairs (rows[i][k], cols[j][l])), with the
/// pairs k == l left out when i == j. The mean is over the pairs actually
/// summed. Use rows == cols for an O/O or A/A matrix and aligned groups of
/// original and anonymized utterances for the cross blocks.
template <typename Item>
SimilarityMatrix similarity_matrix(const std::vector<std::string>& speakers, const std::vector<std::vector<Item>>& rows,
                                   const std::vector<std::vector<Item>>& cols, const ScoreFn<Item>& score) {
  const auto n = static_cast<Eigen::Index>(speakers.size());
  if (n == 0 || rows.size() != speakers.size() || cols.size() != speakers.size())
    throw MetricError("similarity_matrix: group count does not match the speaker list");
  SimilarityMatrix m{speakers, Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& a = rows[static_cast<std::size_t>(i)];
      const auto& b = cols[static_cast<std::size_t>(j)];
      double sum = 0.0;
      long count = 0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t l = 0; l < b.size(); ++l) {
          if (i == j && k == l) continue;
          sum += score(a[k], b[l]);
          ++count;
        }
      }
      if (count == 0) {
        throw MetricError("similarity_matrix: speaker " + speakers[static_cast<std::size_t>(i)] +
                          " has too few utterances for entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
      m.values(i, j) = sigmoid(sum / static_cast<double>(count));
    }
  }
  return m;
}

template <typename Item>
SimilarityMatrix similarity_matrix(const std::vector<std::string>& speakers, const std::vector<std::vector<Item>>& groups,
                                   const ScoreFn<Item>& score) {
  return similarity_matrix(speakers, groups, groups, score);
}

/// |mean(diag) - mean(off-diag)|
double diag_dominance(const SimilarityMatrix& m);

/// 10 log10(D(M_aa) / D(M_oo)). -inf when the anonymized matrix has no
/// dominance left.
double gvd(const SimilarityMatrix& m_oo, const SimilarityMatrix& m_aa);

/// CSV with a header row and a leading speaker column.
std::string to_csv(const SimilarityMatrix& m);
SimilarityMatrix parse_csv(const std::string& text);

// ------------------------------------------------------------------ probe scorer

/// Model-free speaker features: mean cepstral coefficients 1..12 (spectral
/// envelope, so largely independent of pitch) over frames within 40 dB of the
/// loudest one.
Eigen::VectorXd probe_features(const dsp::Waveform& w);

/// Standardises probe features with statistics of a reference set and scores
/// pairs by scaled cosine similarity. Symmetric by construction.
class ProbeScorer {
 public:
  ProbeScorer() = default;
  explicit ProbeScorer(const std::vector<Eigen::VectorXd>& reference, double scale = 10.0);

  Eigen::VectorXd embed(const Eigen::VectorXd& features) const;
  double score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

 private:
  Eigen::VectorXd mean_, inv_std_;
  double scale_ = 10.0;
};

/// Nearest-centroid speaker classifier on standardised probe embeddings.
class SpeakerProbe {
 public:
  SpeakerProbe(const ProbeScorer& scorer, const std::vector<Eigen::VectorXd>& features, const std::vector<int>& labels);
  int predict(const Eigen::VectorXd& features) const;
  double accuracy(const std::vector<Eigen::VectorXd>& features, const std::vector<int>& labels) const;

 private:
  ProbeScorer scorer_;
  std::vector<Eigen::VectorXd> centroids_;
};

}  // namespace musa::metrics

#endif  // MUSA_METRICS_METRICS_HPP_
