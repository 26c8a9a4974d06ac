// metrics/metrics.cc

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

#include "musa/metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "musa/io/files.hpp"

namespace musa::metrics {

EerResult compute_eer(const std::vector<TrialScore>& trials) {
  std::vector<const TrialScore*> order;
  long n_target = 0;
  for (const auto& t : trials) {
    if (!std::isfinite(t.score)) throw MetricError("compute_eer: non-finite score in trial " + t.enroll_id + "/" + t.test_id);
    order.push_back(&t);
    n_target += t.is_target ? 1 : 0;
  }
  const long n_nontarget = static_cast<long>(trials.size()) - n_target;
  if (n_target == 0 || n_nontarget == 0) throw MetricError("compute_eer: need at least one target and one non-target trial");
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->score > b->score; });

  // Operating points as the threshold sweeps down; the first accepts nothing.
  double prev_fpr = 0.0, prev_fnr = 1.0, prev_theta = std::numeric_limits<double>::infinity();
  long tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double theta = order[i]->score;
    for (; i < order.size() && order[i]->score == theta; ++i) (order[i]->is_target ? tp : fp) += 1;
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_nontarget);
    const double fnr = 1.0 - static_cast<double>(tp) / static_cast<double>(n_target);
    const double d = fnr - fpr;
    if (d <= 0.0) {
      const double d_prev = prev_fnr - prev_fpr;  // > 0
      const double t = d_prev / (d_prev - d);
      EerResult r;
      r.eer = prev_fpr + t * (fpr - prev_fpr);
      r.threshold = std::isfinite(prev_theta) ? prev_theta + t * (theta - prev_theta) : theta;
      return r;
    }
    prev_fpr = fpr;
    prev_fnr = fnr;
    prev_theta = theta;
  }
  throw std::logic_error("compute_eer: no crossing");  // the last point always has fnr == 0
}

std::vector<TrialScore> parse_trials(const std::string& text) {
  std::vector<TrialScore> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, '\t');) f.push_back(tok);
    auto fail = [&](const std::string& why) {
      throw MetricError("trials line " + std::to_string(line_no) + ": " + why);
    };
    if (f.size() != 4) fail("expected 4 tab-separated fields");
    TrialScore t{f[0], f[1], 0.0, false};
    try {
      std::size_t used = 0;
      t.score = std::stod(f[2], &used);
      if (used != f[2].size()) fail("bad score '" + f[2] + "'");
    } catch (const std::logic_error&) {
      fail("bad score '" + f[2] + "'");
    }
    if (!std::isfinite(t.score)) fail("non-finite score");
    if (f[3] == "target") {
      t.is_target = true;
    } else if (f[3] != "nontarget") {
      fail("label must be target or nontarget, got '" + f[3] + "'");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<TrialScore> read_trials(const std::filesystem::path& path) { return parse_trials(io::read_text(path)); }

void write_trials(const std::vector<TrialScore>& trials, const std::filesystem::path& path) {
  std::string text;
  char buf[64];
  for (const auto& t : trials) {
    std::snprintf(buf, sizeof buf, "%.17g", t.score);
    text += t.enroll_id + "\t" + t.test_id + "\t" + buf + "\t" + (t.is_target ? "target" : "nontarget") + "\n";
  }
  io::write_text_atomic(path, text);
}

WerResult compute_wer(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  if (ref.empty()) throw MetricError("compute_wer: empty reference");
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0), d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  WerResult r;
  r.ref_length = static_cast<int>(n);
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  r.wer = static_cast<double>(r.errors()) / static_cast<double>(n);
  return r;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<std::string> split_chars(const std::string& text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, text.size() - i);
    if (!(len == 1 && std::isspace(c))) out.push_back(text.substr(i, len));
    i += len;
  }
  return out;
}

double pitch_correlation(const dsp::PitchTrack& a, const dsp::PitchTrack& b) {
  if (a.size() != b.size())
    throw MetricError("pitch_correlation: frame count mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  std::vector<double> x, y;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (a.voiced[k] && b.voiced[k]) {
      x.push_back(a.f0(i));
      y.push_back(b.f0(i));
    }
  }
  if (x.size() < 2) throw MetricError("pitch_correlation: fewer than 2 frames voiced in both tracks");
  const double nx = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nx;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nx;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw MetricError("pitch_correlation: zero variance over the jointly voiced frames");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double diag_dominance(const SimilarityMatrix& m) {
  const auto n = m.values.rows();
  if (n != m.values.cols()) throw MetricError("diag_dominance: matrix is not square");
  if (n < 2) throw MetricError("diag_dominance: need at least 2 speakers");
  const double diag = m.values.diagonal().sum();
  const double off = m.values.sum() - diag;
  return std::abs(diag / static_cast<double>(n) - off / static_cast<double>(n * (n - 1)));
}

double gvd(const SimilarityMatrix& m_oo, const SimilarityMatrix& m_aa) {
  if (m_oo.speakers != m_aa.speakers) throw MetricError("gvd: matrices cover different speakers");
  const double d_oo = diag_dominance(m_oo);
  if (d_oo == 0.0) throw MetricError("gvd: original matrix has zero diagonal dominance");
  return 10.0 * std::log10(diag_dominance(m_aa) / d_oo);
}

std::string to_csv(const SimilarityMatrix& m) {
  std::string out = "speaker";
  for (const auto& s : m.speakers) out += "," + s;
  out += "\n";
  char buf[64];
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out += m.speakers[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", m.values(i, j));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

SimilarityMatrix parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string tok; std::getline(ls, tok, ',');) f.push_back(tok);
    rows.push_back(std::move(f));
  }
  if (rows.empty()) throw MetricError("similarity csv: empty");
  SimilarityMatrix m;
  m.speakers.assign(rows[0].begin() + 1, rows[0].end());
  const auto n = static_cast<Eigen::Index>(m.speakers.size());
  if (static_cast<Eigen::Index>(rows.size()) != n + 1) throw MetricError("similarity csv: expected a square matrix");
  m.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i + 1)];
    if (static_cast<Eigen::Index>(r.size()) != n + 1 || r[0] != m.speakers[static_cast<std::size_t>(i)])
      throw MetricError("similarity csv: row " + std::to_string(i + 1) + " does not match the header");
    for (Eigen::Index j = 0; j < n; ++j) {
      try {
        m.values(i, j) = std::stod(r[static_cast<std::size_t>(j + 1)]);
      } catch (const std::logic_error&) {
        throw MetricError("similarity csv: bad number in row " + std::to_string(i + 1));
      }
    }
  }
  return m;
}

Eigen::VectorXd probe_features(const dsp::Waveform& w) {
  dsp::MelConfig cfg;
  cfg.n_fft = 1024;
  cfg.hop = 160;
  cfg.n_mels = 40;
  constexpr int kCeps = 12;
  const Eigen::MatrixXd mel = dsp::log_mel(w.samples, cfg);
  Eigen::VectorXd loud(mel.cols());
  for (Eigen::Index t = 0; t < mel.cols(); ++t) loud(t) = std::log(mel.col(t).array().exp().sum());
  const double gate = loud.maxCoeff() - std::log(100.0);
  // DCT-II rows 1..12; c0 (overall level) is left out.
  Eigen::MatrixXd dct(kCeps, cfg.n_mels);
  for (int k = 0; k < kCeps; ++k)
    for (int n = 0; n < cfg.n_mels; ++n) dct(k, n) = std::cos(M_PI * (k + 1) * (n + 0.5) / cfg.n_mels);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(kCeps);
  int kept = 0;
  for (Eigen::Index t = 0; t < mel.cols(); ++t) {
    if (loud(t) < gate) continue;
    mean += dct * mel.col(t);
    ++kept;
  }
  return mean / kept;
}

ProbeScorer::ProbeScorer(const std::vector<Eigen::VectorXd>& reference, double scale) : scale_(scale) {
  if (reference.empty()) throw MetricError("ProbeScorer: empty reference set");
  const auto dim = reference[0].size();
  mean_ = Eigen::VectorXd::Zero(dim);
  for (const auto& r : reference) mean_ += r;
  mean_ /= static_cast<double>(reference.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& r : reference) var += (r - mean_).array().square().matrix();
  var /= static_cast<double>(reference.size());
  inv_std_ = (var.array() + 1e-6).rsqrt().matrix();
}

Eigen::VectorXd ProbeScorer::embed(const Eigen::VectorXd& f) const {
  if (f.size() != mean_.size()) throw MetricError("ProbeScorer: feature dimension mismatch");
  return (f - mean_).cwiseProduct(inv_std_);
}

double ProbeScorer::score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const Eigen::VectorXd ea = embed(a), eb = embed(b);
  const double na = ea.norm(), nb = eb.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return scale_ * ea.dot(eb) / (na * nb);
}

SpeakerProbe::SpeakerProbe(const ProbeScorer& scorer, const std::vector<Eigen::VectorXd>& features,
                           const std::vector<int>& labels)
    : scorer_(scorer) {
  if (features.size() != labels.size() || features.empty()) throw MetricError("SpeakerProbe: bad training set");
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> counts(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto c = static_cast<std::size_t>(labels[i]);
    auto e = scorer_.embed(features[i]);
    if (centroids_.size() <= c) centroids_.resize(static_cast<std::size_t>(classes), Eigen::VectorXd::Zero(e.size()));
    centroids_[c] += e;
    ++counts[c];
  }
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    if (counts[c] == 0) throw MetricError("SpeakerProbe: class " + std::to_string(c) + " has no examples");
    centroids_[c] /= counts[c];
  }
}

int SpeakerProbe::predict(const Eigen::VectorXd& features) const {
  const auto e = scorer_.embed(features);
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    const double d = (e - centroids_[c]).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

double SpeakerProbe::accuracy(const std::vector<Eigen::VectorXd>& features, const std::vector<int>& labels) const {
  if (features.size() != labels.size() || features.empty()) throw MetricError("SpeakerProbe: bad evaluation set");
  int hit = 0;
  for (std::size_t i = 0; i < features.size(); ++i) hit += predict(features[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(features.size());
}

}  // namespace musa::metrics
