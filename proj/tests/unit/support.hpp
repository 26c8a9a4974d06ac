// tests/unit/support.hpp

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

#ifndef MUSA_TESTS_SUPPORT_HPP_
#define MUSA_TESTS_SUPPORT_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "musa/ad/ops.hpp"

namespace musa::testing {

inline std::filesystem::path source_dir() { return MUSA_SOURCE_DIR; }

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("musa_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Small hand-rolled generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
  long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }
  Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c, double sd = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(0.0, sd);
    return m;
  }
  /// Values k / 1024 with |k| <= 4096: exactly representable in float.
  Eigen::MatrixXd dyadic(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(integer(-4096, 4096)) / 1024.0;
    return m;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct GradCheck {
  double relative_error = 0.0;
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
};

/// Central differences of `loss` against the reverse-mode gradient for every
/// entry of `params`. `loss` must rebuild its graph on each call. Error is
/// ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||).
template <typename F>
GradCheck check_gradient(std::vector<ad::Var<double>> params, F&& loss, double h = 1e-6) {
  for (auto& p : params) p.zero_grad();
  auto root = loss();
  ad::backward(root);
  std::vector<double> analytic, numeric;
  for (auto& p : params) {
    Eigen::MatrixXd g = p.grad().size() ? p.grad() : Eigen::MatrixXd::Zero(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) analytic.push_back(g.data()[i]);
  }
  {
    ad::NoGradGuard guard;
    for (auto& p : params) {
      for (Eigen::Index i = 0; i < p.value().size(); ++i) {
        double& v = p.mutable_value().data()[i];
        const double saved = v;
        v = saved + h;
        const double up = loss().item();
        v = saved - h;
        const double down = loss().item();
        v = saved;
        numeric.push_back((up - down) / (2.0 * h));
      }
    }
  }
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  GradCheck r;
  r.analytic_norm = std::sqrt(na);
  r.numeric_norm = std::sqrt(nn);
  const double denom = std::max({r.analytic_norm, r.numeric_norm, 1e-300});
  r.relative_error = std::sqrt(diff) / denom;
  return r;
}

}  // namespace musa::testing

#endif  // MUSA_TESTS_SUPPORT_HPP_
