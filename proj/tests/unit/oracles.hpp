// tests/unit/oracles.hpp

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

// Brute-force reference implementations of the evaluation metrics. They are
// written for clarity over speed and share no code with src/metrics.

#ifndef MUSA_TESTS_ORACLES_HPP_
#define MUSA_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

namespace musa::oracle {

struct Eer {
  double eer, threshold;
};

/// Counts acceptances (score >= theta) afresh at every candidate threshold.
inline Eer eer(const std::vector<double>& target, const std::vector<double>& nontarget) {
  std::set<double, std::greater<>> thresholds(target.begin(), target.end());
  thresholds.insert(nontarget.begin(), nontarget.end());
  struct Point {
    double theta, fpr, fnr;
  };
  std::vector<Point> pts{{std::numeric_limits<double>::infinity(), 0.0, 1.0}};
  for (double th : thresholds) {
    double fa = 0, miss = 0;
    for (double s : nontarget) fa += s >= th ? 1 : 0;
    for (double s : target) miss += s < th ? 1 : 0;
    pts.push_back({th, fa / nontarget.size(), miss / target.size()});
  }
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const double a = pts[k - 1].fnr - pts[k - 1].fpr, b = pts[k].fnr - pts[k].fpr;
    if (a > 0 && b <= 0) {
      const double t = a / (a - b);
      const double th = std::isinf(pts[k - 1].theta) ? pts[k].theta
                                                      : pts[k - 1].theta + t * (pts[k].theta - pts[k - 1].theta);
      return {pts[k - 1].fnr + t * (pts[k].fnr - pts[k - 1].fnr), th};
    }
  }
  return {-1, 0};
}

/// Every alignment of ref against hyp, kept when its cost is minimal.
/// Exponential; for short sequences only.
inline void alignments(const std::vector<std::string>& r, const std::vector<std::string>& h, std::size_t i,
                       std::size_t j, int s, int d, int ins, std::set<std::tuple<int, int, int>>& out) {
  if (i == r.size() && j == h.size()) {
    out.insert({s, d, ins});
    return;
  }
  if (i < r.size() && j < h.size()) alignments(r, h, i + 1, j + 1, s + (r[i] != h[j]), d, ins, out);
  if (i < r.size()) alignments(r, h, i + 1, j, s, d + 1, ins, out);
  if (j < h.size()) alignments(r, h, i, j + 1, s, d, ins + 1, out);
}

struct Wer {
  int min_errors;
  std::set<std::tuple<int, int, int>> optimal;  // (S, D, I) of every minimal alignment
};

inline Wer wer(const std::vector<std::string>& r, const std::vector<std::string>& h) {
  std::set<std::tuple<int, int, int>> all;
  alignments(r, h, 0, 0, 0, 0, 0, all);
  Wer w{std::numeric_limits<int>::max(), {}};
  for (auto [s, d, i] : all) w.min_errors = std::min(w.min_errors, s + d + i);
  for (auto t : all)
    if (std::get<0>(t) + std::get<1>(t) + std::get<2>(t) == w.min_errors) w.optimal.insert(t);
  return w;
}

/// Textbook single-pass formula over jointly voiced frames.
inline double pearson(const std::vector<double>& f0a, const std::vector<bool>& va, const std::vector<double>& f0b,
                      const std::vector<bool>& vb) {
  long double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < f0a.size(); ++i) {
    if (!va[i] || !vb[i]) continue;
    const long double x = f0a[i], y = f0b[i];
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
  const long double cov = sxy - sx * sy / n, vx = sxx - sx * sx / n, vy = syy - sy * sy / n;
  return static_cast<double>(cov / std::sqrt(vx * vy));
}

/// The similarity matrix computed from a full score table over all
/// utterances; owner[u] is the speaker index of utterance u and slot[u] its
/// position within that speaker's list.
inline Eigen::MatrixXd similarity(const Eigen::MatrixXd& llr, const std::vector<int>& owner,
                                  const std::vector<int>& slot, int speakers) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(speakers, speakers), cnt = sum;
  for (int u = 0; u < llr.rows(); ++u) {
    for (int v = 0; v < llr.cols(); ++v) {
      if (owner[u] == owner[v] && slot[u] == slot[v]) continue;
      sum(owner[u], owner[v]) += llr(u, v);
      cnt(owner[u], owner[v]) += 1;
    }
  }
  Eigen::MatrixXd m(speakers, speakers);
  for (int i = 0; i < speakers; ++i)
    for (int j = 0; j < speakers; ++j) m(i, j) = 1.0 / (1.0 + std::exp(-sum(i, j) / cnt(i, j)));
  return m;
}

inline double dominance(const Eigen::MatrixXd& m) {
  double diag = 0, off = 0;
  const auto n = m.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) (i == j ? diag : off) += m(i, j);
  return std::fabs(diag / n - off / (n * n - n));
}

inline double gvd(const Eigen::MatrixXd& oo, const Eigen::MatrixXd& aa) {
  return 10.0 * std::log10(dominance(aa) / dominance(oo));
}

}  // namespace musa::oracle

#endif  // MUSA_TESTS_ORACLES_HPP_
