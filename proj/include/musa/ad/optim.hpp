// musa/ad/optim.hpp

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

#ifndef MUSA_AD_OPTIM_HPP_
#define MUSA_AD_OPTIM_HPP_

#include <cmath>
#include <cstdint>
#include <vector>

#include "musa/ad/layers.hpp"

namespace musa::ad {

struct AdamWOptions {
  double beta1 = 0.8;
  double beta2 = 0.99;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

/// Decoupled weight decay Adam over every tensor of a ParameterStore.
template <typename T>
class AdamW {
 public:
  AdamW(const ParameterStore<T>& store, AdamWOptions options) : options_(options), params_(store.vars()) {
    for (const auto& p : params_) {
      m_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
      v_.push_back(Matrix<T>::Zero(p.rows(), p.cols()));
    }
  }

  /// Returns the global gradient norm before clipping.
  double step(double lr) {
    ++step_;
    double norm_sq = 0.0;
    for (const auto& p : params_) {
      if (p.grad().size() != 0) norm_sq += static_cast<double>(p.grad().squaredNorm());
    }
    const double norm = std::sqrt(norm_sq);
    double clip = 1.0;
    if (options_.clip_norm > 0.0 && norm > options_.clip_norm) clip = options_.clip_norm / (norm + 1e-12);
    const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(options_.beta1, static_cast<double>(step_)));
    const T bc2 = static_cast<T>(1.0 - std::pow(options_.beta2, static_cast<double>(step_)));
    const T decay = static_cast<T>(1.0 - lr * options_.weight_decay);
    const T rate = static_cast<T>(lr);
    const T eps = static_cast<T>(options_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto p = params_[i];
      auto& w = p.mutable_value();
      w *= decay;
      if (p.grad().size() == 0) continue;
      const Matrix<T> g = p.grad() * static_cast<T>(clip);
      m_[i] = b1 * m_[i] + (T(1) - b1) * g;
      v_[i] = b2 * v_[i] + (T(1) - b2) * g.cwiseAbs2();
      w.array() -= rate * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps);
    }
    return norm;
  }

  std::int64_t steps() const { return step_; }
  void set_steps(std::int64_t s) { step_ = s; }
  std::vector<Matrix<T>>& first_moments() { return m_; }
  std::vector<Matrix<T>>& second_moments() { return v_; }
  const std::vector<Matrix<T>>& first_moments() const { return m_; }
  const std::vector<Matrix<T>>& second_moments() const { return v_; }

 private:
  AdamWOptions options_;
  std::vector<Var<T>> params_;
  std::vector<Matrix<T>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace musa::ad

#endif  // MUSA_AD_OPTIM_HPP_
