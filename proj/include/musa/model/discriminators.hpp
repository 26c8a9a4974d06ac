// musa/model/discriminators.hpp

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

#ifndef MUSA_MODEL_DISCRIMINATORS_HPP_
#define MUSA_MODEL_DISCRIMINATORS_HPP_

#include <memory>
#include <string>
#include <vector>

#include "musa/ad/spectral.hpp"
#include "musa/model/encoders.hpp"

namespace musa::model {

/// Score map plus the intermediate activations used for feature matching.
template <typename T>
struct DiscriminatorOutput {
  Var<T> score;
  std::vector<Var<T>> features;
};

namespace detail {

template <typename T>
DiscriminatorOutput<T> run_stack(const std::vector<ad::Conv<T>>& layers, const ad::Conv<T>& post, Var<T> h) {
  DiscriminatorOutput<T> out;
  for (const auto& l : layers) {
    h = ad::leaky_relu(l(h), T(0.1));
    out.features.push_back(h);
  }
  out.score = post(h);
  out.features.push_back(out.score);
  return out;
}

}  // namespace detail

/// 2-D convolutions over the log-magnitude STFT (frequency x time), with
/// stride 2 along frequency.
template <typename T>
class StftDiscriminator {
 public:
  StftDiscriminator(ad::ParameterStore<T>& store, const std::string& name, Index n_fft, Index channels,
                    std::mt19937_64& rng)
      : n_fft_(n_fft) {
    ad::ConvGeometry g;
    g.kernel_h = 5;
    g.kernel_w = 3;
    g.stride_h = 2;
    g.pad_top = g.pad_bottom = 2;
    g.pad_left = g.pad_right = 1;
    layers_.emplace_back(store, name + ".conv0", 1, channels, g, rng);
    layers_.emplace_back(store, name + ".conv1", channels, channels, g, rng);
    layers_.emplace_back(store, name + ".conv2", channels, channels, g, rng);
    ad::ConvGeometry p;
    p.kernel_h = p.kernel_w = 3;
    p.pad_top = p.pad_bottom = p.pad_left = p.pad_right = 1;
    post_ = ad::Conv<T>(store, name + ".post", channels, 1, p, rng);
  }

  DiscriminatorOutput<T> operator()(const Var<T>& x) const {
    Var<T> mag = ad::clamp_log(ad::stft_magnitude(x, n_fft_, n_fft_ / 4), T(1e-5));
    const Index bins = mag.rows();
    return detail::run_stack(layers_, post_, ad::reshape(mag, 1, mag.value().size(), bins));
  }

 private:
  Index n_fft_;
  std::vector<ad::Conv<T>> layers_;
  ad::Conv<T> post_;
};

/// Folds the signal into (L/p) x p and convolves along the first axis only.
template <typename T>
class PeriodDiscriminator {
 public:
  PeriodDiscriminator(ad::ParameterStore<T>& store, const std::string& name, Index period, Index channels,
                      std::mt19937_64& rng)
      : period_(period) {
    ad::ConvGeometry g;
    g.kernel_h = 5;
    g.stride_h = 3;
    g.pad_top = g.pad_bottom = 2;
    layers_.emplace_back(store, name + ".conv0", 1, channels, g, rng);
    layers_.emplace_back(store, name + ".conv1", channels, channels, g, rng);
    layers_.emplace_back(store, name + ".conv2", channels, channels, g, rng);
    g.stride_h = 1;
    layers_.emplace_back(store, name + ".conv3", channels, channels, g, rng);
    ad::ConvGeometry p;
    p.kernel_h = 3;
    p.pad_top = p.pad_bottom = 1;
    post_ = ad::Conv<T>(store, name + ".post", channels, 1, p, rng);
  }

  DiscriminatorOutput<T> operator()(const Var<T>& x) const {
    const Index len = x.cols();
    const Index padded = (len + period_ - 1) / period_ * period_;
    Var<T> h = padded > len ? ad::pad_cols(x, 0, padded - len) : x;
    const Index rows = padded / period_;
    std::vector<Index> index(static_cast<std::size_t>(padded));
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < period_; ++j) index[static_cast<std::size_t>(i + rows * j)] = i * period_ + j;
    }
    return detail::run_stack(layers_, post_, ad::gather_cols(h, std::move(index), rows));
  }

 private:
  Index period_;
  std::vector<ad::Conv<T>> layers_;
  ad::Conv<T> post_;
};

/// 1-D convolutions on the waveform after `pools` rounds of 2x average
/// pooling (kernel 4, stride 2, padding 2).
template <typename T>
class ScaleDiscriminator {
 public:
  ScaleDiscriminator(ad::ParameterStore<T>& store, const std::string& name, int pools, Index channels,
                     std::mt19937_64& rng)
      : pools_(pools), pool_weight_(Matrix<T>::Constant(1, 4, T(0.25))) {
    layers_.emplace_back(store, name + ".conv0", 1, channels, ad::ConvGeometry::conv1d(15, 1, 7, 7), rng);
    layers_.emplace_back(store, name + ".conv1", channels, channels, ad::ConvGeometry::conv1d(11, 4, 5, 5), rng);
    layers_.emplace_back(store, name + ".conv2", channels, channels, ad::ConvGeometry::conv1d(11, 4, 5, 5), rng);
    layers_.emplace_back(store, name + ".conv3", channels, channels, ad::ConvGeometry::conv1d(5, 1, 2, 2), rng);
    post_ = ad::Conv<T>(store, name + ".post", channels, 1, ad::ConvGeometry::conv1d(3, 1, 1, 1), rng);
  }

  DiscriminatorOutput<T> operator()(const Var<T>& x) const {
    Var<T> h = x;
    for (int i = 0; i < pools_; ++i) h = ad::conv2d(h, pool_weight_, Var<T>(), ad::ConvGeometry::conv1d(4, 2, 2, 2));
    return detail::run_stack(layers_, post_, h);
  }

 private:
  int pools_;
  Var<T> pool_weight_;
  std::vector<ad::Conv<T>> layers_;
  ad::Conv<T> post_;
};

/// Multi-scale STFT, multi-period and multi-scale waveform discriminators.
template <typename T>
class DiscriminatorSet {
 public:
  DiscriminatorSet() = default;
  DiscriminatorSet(ad::ParameterStore<T>& store, const ModelConfig& cfg, std::mt19937_64& rng) {
    for (int n : cfg.stft_scales) stft_.emplace_back(store, "disc.stft" + std::to_string(n), n, cfg.disc_channels, rng);
    for (int p : cfg.periods) mpd_.emplace_back(store, "disc.mpd" + std::to_string(p), p, cfg.disc_channels, rng);
    for (int s = 0; s < cfg.msd_scales; ++s)
      msd_.emplace_back(store, "disc.msd" + std::to_string(s), s, cfg.disc_channels, rng);
  }

  std::vector<DiscriminatorOutput<T>> operator()(const Var<T>& x) const {
    std::vector<DiscriminatorOutput<T>> out;
    for (const auto& d : stft_) out.push_back(d(x));
    for (const auto& d : mpd_) out.push_back(d(x));
    for (const auto& d : msd_) out.push_back(d(x));
    return out;
  }

  std::size_t size() const { return stft_.size() + mpd_.size() + msd_.size(); }

 private:
  std::vector<StftDiscriminator<T>> stft_;
  std::vector<PeriodDiscriminator<T>> mpd_;
  std::vector<ScaleDiscriminator<T>> msd_;
};

}  // namespace musa::model

#endif  // MUSA_MODEL_DISCRIMINATORS_HPP_
