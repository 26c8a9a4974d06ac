// musa/model/encoders.hpp

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

#ifndef MUSA_MODEL_ENCODERS_HPP_
#define MUSA_MODEL_ENCODERS_HPP_

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "musa/ad/layers.hpp"
#include "musa/model/config.hpp"

namespace musa::model {

using ad::Index;
using ad::Matrix;
using ad::Var;
using ad::Vector;

/// d x t latent frames of an utterance.
template <typename T>
struct FrameRepresentation {
  Matrix<T> values;
  Index source_length = 0;

  Index dim() const { return values.rows(); }
  Index frames() const { return values.cols(); }
};

/// Global speaker vector. The empty embedding is all zeros with is_empty set.
template <typename T>
struct SpeakerEmbedding {
  Vector<T> values;
  bool is_empty = false;

  static SpeakerEmbedding empty(Index dim) { return {Vector<T>::Zero(dim), true}; }
  Index dim() const { return values.size(); }
};

/// x + conv1x1(elu(conv3(elu(x)))), hidden width max(1, C/2).
template <typename T>
class ResidualUnit {
 public:
  ResidualUnit() = default;
  ResidualUnit(ad::ParameterStore<T>& store, const std::string& name, Index channels, std::mt19937_64& rng) {
    const Index hidden = std::max<Index>(1, channels / 2);
    conv1_ = ad::same_conv1d(store, name + ".conv1", channels, hidden, 3, rng);
    conv2_ = ad::same_conv1d(store, name + ".conv2", hidden, channels, 1, rng);
  }
  Var<T> operator()(const Var<T>& x) const { return ad::add(x, conv2_(ad::elu(conv1_(ad::elu(x))))); }

 private:
  ad::Conv<T> conv1_, conv2_;
};

/// Strided convolutional encoder followed by an LSTM. Every block halves the
/// frame rate by its stride with kernel 2s and s samples of total padding,
/// so the output length is floor(L / prod(strides)).
template <typename T>
class SpeechEncoder {
 public:
  SpeechEncoder() = default;
  SpeechEncoder(ad::ParameterStore<T>& store, const ModelConfig& cfg, std::mt19937_64& rng) : hop_(cfg.hop()) {
    Index ch = cfg.base_channels;
    input_ = ad::same_conv1d(store, "enc.input", 1, ch, 7, rng);
    for (std::size_t b = 0; b < cfg.strides.size(); ++b) {
      const Index s = cfg.strides[b];
      const std::string p = "enc.block" + std::to_string(b);
      Block blk;
      blk.res = ResidualUnit<T>(store, p + ".res", ch, rng);
      blk.down = ad::Conv<T>(store, p + ".down", ch, 2 * ch,
                             ad::ConvGeometry::conv1d(2 * s, s, (s + 1) / 2, s / 2), rng);
      blocks_.push_back(std::move(blk));
      ch *= 2;
    }
    lstm_ = ad::Lstm<T>(store, "enc.lstm", ch, cfg.lstm_layers, rng);
    output_ = ad::same_conv1d(store, "enc.output", ch, cfg.latent_dim, 7, rng);
  }

  /// signal: 1 x L. Returns d x floor(L / hop).
  Var<T> operator()(const Var<T>& signal) const {
    if (signal.rows() != 1) throw std::invalid_argument("encode_speech: expects a mono 1 x L signal");
    if (signal.cols() < hop_) {
      throw std::invalid_argument("encode_speech: input of " + std::to_string(signal.cols()) +
                                  " samples is shorter than one total stride (" + std::to_string(hop_) + ")");
    }
    Var<T> h = input_(signal);
    for (const auto& b : blocks_) h = b.down(ad::elu(b.res(h)));
    h = lstm_(h);
    return output_(ad::elu(h));
  }

  int hop() const { return hop_; }

 private:
  struct Block {
    ResidualUnit<T> res;
    ad::Conv<T> down;
  };
  int hop_ = 1;
  ad::Conv<T> input_, output_;
  std::vector<Block> blocks_;
  ad::Lstm<T> lstm_;
};

/// Two 2-D conv layers over the log-mel image (stride 2 along frequency),
/// a per-frame projection, temporal average pooling and a final linear map.
template <typename T>
class SpeakerEncoder {
 public:
  SpeakerEncoder() = default;
  SpeakerEncoder(ad::ParameterStore<T>& store, const ModelConfig& cfg, std::mt19937_64& rng)
      : n_mels_(cfg.mel.n_mels) {
    const Index c = cfg.speaker_channels;
    ad::ConvGeometry g;
    g.kernel_h = g.kernel_w = 3;
    g.stride_h = 2;
    g.pad_top = g.pad_bottom = g.pad_left = g.pad_right = 1;
    conv1_ = ad::Conv<T>(store, "spk.conv1", 1, c, g, rng);
    conv2_ = ad::Conv<T>(store, "spk.conv2", c, c, g, rng);
    reduced_ = g.out_height(g.out_height(n_mels_));
    frame_ = ad::Linear<T>(store, "spk.frame", c * reduced_, cfg.latent_dim, rng);
    out_ = ad::Linear<T>(store, "spk.out", cfg.latent_dim, cfg.latent_dim, rng);
  }

  /// mel: n_mels x F log-mel frames. Returns d x 1.
  Var<T> operator()(const Var<T>& mel) const {
    if (mel.rows() != n_mels_ || mel.cols() < 1)
      throw std::invalid_argument("encode_speaker: expects an n_mels x F spectrogram with F >= 1");
    const Index frames = mel.cols();
    // One input channel laid out as an (n_mels x F) grid.
    Var<T> img = ad::reshape(mel, 1, n_mels_ * frames, n_mels_);
    Var<T> h = ad::leaky_relu(conv1_(img), T(0.2));
    h = ad::leaky_relu(conv2_(h), T(0.2));
    // Column-major storage of (C x reduced*F) is (C*reduced x F).
    h = ad::reshape(h, h.rows() * reduced_, frames);
    h = ad::leaky_relu(frame_(h), T(0.2));
    return out_(ad::mean_cols(h));
  }

 private:
  Index n_mels_ = 80;
  Index reduced_ = 20;
  ad::Conv<T> conv1_, conv2_;
  ad::Linear<T> frame_, out_;
};

/// r1 = x - s broadcast over frames.
template <typename T>
FrameRepresentation<T> subtract_speaker(const FrameRepresentation<T>& x, const SpeakerEmbedding<T>& s) {
  if (x.dim() != s.dim()) throw std::invalid_argument("subtract_speaker: dimension mismatch");
  return {x.values.colwise() - s.values, x.source_length};
}

/// Inverse of subtract_speaker.
template <typename T>
FrameRepresentation<T> add_speaker(const FrameRepresentation<T>& r, const SpeakerEmbedding<T>& s) {
  if (r.dim() != s.dim()) throw std::invalid_argument("add_speaker: dimension mismatch");
  return {r.values.colwise() + s.values, r.source_length};
}

template <typename T>
struct SpeakerDistillation {
  Var<T> loss;     // mean CE over both segments minus cos(s1, s2)
  Var<T> ce;
  Var<T> cosine;
  Var<T> s1, s2;
};

/// Speaker distillation on two segments of one utterance. `encoder` maps a
/// segment input to a d x 1 embedding; `classifier` maps it to logits.
template <typename T, typename Encoder, typename Classifier>
SpeakerDistillation<T> speaker_distillation(const Encoder& encoder, const Classifier& classifier,
                                            const Var<T>& seg1, const Var<T>& seg2, int label,
                                            int num_speakers) {
  if (label < 0 || label >= num_speakers) {
    throw std::out_of_range("speaker_distillation_loss: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(num_speakers) + ")");
  }
  SpeakerDistillation<T> out;
  out.s1 = encoder(seg1);
  out.s2 = encoder(seg2);
  const int target[1] = {label};
  auto ce1 = ad::cross_entropy(classifier(out.s1), std::span<const int>(target, 1));
  auto ce2 = ad::cross_entropy(classifier(out.s2), std::span<const int>(target, 1));
  out.ce = ad::scale(ad::add(ce1, ce2), T(0.5));
  out.cosine = ad::cosine_similarity(out.s1, out.s2);
  out.loss = ad::sub(out.ce, out.cosine);
  return out;
}

}  // namespace musa::model

#endif  // MUSA_MODEL_ENCODERS_HPP_
