// musa/ad/layers.hpp

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

#ifndef MUSA_AD_LAYERS_HPP_
#define MUSA_AD_LAYERS_HPP_

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "musa/ad/conv.hpp"
#include "musa/ad/lstm.hpp"
#include "musa/ad/ops.hpp"

namespace musa::ad {

/// Named, ordered collection of trainable tensors. Order of creation is the
/// serialization order.
template <typename T>
class ParameterStore {
 public:
  Var<T> create(const std::string& name, Index rows, Index cols, T bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
    Matrix<T> v(rows, cols);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<T>(dist(rng));
    return add(name, std::move(v));
  }

  Var<T> add(const std::string& name, Matrix<T> value) {
    for (const auto& [n, _] : params_) {
      if (n == name) throw std::logic_error("duplicate parameter name: " + name);
    }
    Var<T> v(std::move(value), true);
    params_.emplace_back(name, v);
    return v;
  }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return params_; }
  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    out.reserve(params_.size());
    for (const auto& [_, v] : params_) out.push_back(v);
    return out;
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += static_cast<std::size_t>(v.value().size());
    return n;
  }
  void zero_grad() {
    for (auto& [_, v] : params_) v.zero_grad();
  }
  /// Freezes (false) or unfreezes every tensor; frozen tensors are treated
  /// as constants by the graph.
  void set_trainable(bool on) {
    for (auto& [_, v] : params_) v.node()->requires_grad = on;
  }
  Var<T> find(const std::string& name) const {
    for (const auto& [n, v] : params_) {
      if (n == name) return v;
    }
    throw std::out_of_range("no parameter named " + name);
  }

 private:
  std::vector<std::pair<std::string, Var<T>>> params_;
};

inline double fan_in_bound(Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

/// 2-D convolution; Conv with kernel_h == 1 on a height-1 input is a 1-D conv.
template <typename T>
class Conv {
 public:
  Conv() = default;
  Conv(ParameterStore<T>& store, const std::string& name, Index in_channels, Index out_channels,
       const ConvGeometry& geo, std::mt19937_64& rng)
      : geo_(geo) {
    const Index fan_in = in_channels * geo.kernel_h * geo.kernel_w;
    const T bound = static_cast<T>(fan_in_bound(fan_in));
    weight_ = store.create(name + ".weight", out_channels, fan_in, bound, rng);
    bias_ = store.create(name + ".bias", out_channels, 1, bound, rng);
  }
  Var<T> operator()(const Var<T>& x) const { return conv2d(x, weight_, bias_, geo_); }
  const ConvGeometry& geometry() const { return geo_; }

 private:
  ConvGeometry geo_;
  Var<T> weight_, bias_;
};

/// 1-D convolution that keeps length for stride 1 ("same" padding, extra
/// sample on the left for even kernels).
template <typename T>
Conv<T> same_conv1d(ParameterStore<T>& store, const std::string& name, Index in_ch, Index out_ch, Index kernel,
                    std::mt19937_64& rng, Index dilation = 1) {
  const Index span = dilation * (kernel - 1);
  return Conv<T>(store, name, in_ch, out_ch, ConvGeometry::conv1d(kernel, 1, span - span / 2, span / 2, dilation),
                 rng);
}

template <typename T>
class ConvTranspose1d {
 public:
  ConvTranspose1d() = default;
  ConvTranspose1d(ParameterStore<T>& store, const std::string& name, Index in_channels, Index out_channels,
                  Index kernel, Index stride, Index crop_left, Index crop_right, std::mt19937_64& rng)
      : kernel_(kernel), stride_(stride), crop_left_(crop_left), crop_right_(crop_right) {
    const T bound = static_cast<T>(fan_in_bound(in_channels * kernel / stride));
    weight_ = store.create(name + ".weight", kernel * out_channels, in_channels, bound, rng);
    bias_ = store.create(name + ".bias", out_channels, 1, bound, rng);
  }
  Var<T> operator()(const Var<T>& x) const {
    return conv_transpose1d(x, weight_, bias_, kernel_, stride_, crop_left_, crop_right_);
  }

 private:
  Index kernel_ = 1, stride_ = 1, crop_left_ = 0, crop_right_ = 0;
  Var<T> weight_, bias_;
};

/// y = W x + b applied to every column.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, Index in, Index out, std::mt19937_64& rng) {
    const T bound = static_cast<T>(fan_in_bound(in));
    weight_ = store.create(name + ".weight", out, in, bound, rng);
    bias_ = store.create(name + ".bias", out, 1, bound, rng);
  }
  Var<T> operator()(const Var<T>& x) const { return add_colwise(matmul(weight_, x), bias_); }
  Index in_features() const { return weight_.cols(); }
  Index out_features() const { return weight_.rows(); }

 private:
  Var<T> weight_, bias_;
};

/// Stacked LSTM with a residual connection around the whole stack.
template <typename T>
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterStore<T>& store, const std::string& name, Index dim, int layers, std::mt19937_64& rng) {
    const T bound = static_cast<T>(fan_in_bound(dim));
    for (int l = 0; l < layers; ++l) {
      const std::string p = name + ".l" + std::to_string(l);
      Layer layer;
      layer.w_ih = store.create(p + ".w_ih", 4 * dim, dim, bound, rng);
      layer.w_hh = store.create(p + ".w_hh", 4 * dim, dim, bound, rng);
      layer.bias = store.create(p + ".bias", 4 * dim, 1, bound, rng);
      layers_.push_back(layer);
    }
  }
  Var<T> operator()(const Var<T>& x) const {
    Var<T> h = x;
    for (const auto& l : layers_) h = lstm(h, l.w_ih, l.w_hh, l.bias);
    return layers_.empty() ? x : add(x, h);
  }

 private:
  struct Layer {
    Var<T> w_ih, w_hh, bias;
  };
  std::vector<Layer> layers_;
};

}  // namespace musa::ad

#endif  // MUSA_AD_LAYERS_HPP_
