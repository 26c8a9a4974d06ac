// musa/model/decoder.hpp

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

#ifndef MUSA_MODEL_DECODER_HPP_
#define MUSA_MODEL_DECODER_HPP_

#include "musa/model/encoders.hpp"

namespace musa::model {

/// Mirror of SpeechEncoder: transposed convolutions with the strides in
/// reverse order and channel widths halving. d x t in, 1 x (t * hop) out.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(ad::ParameterStore<T>& store, const ModelConfig& cfg, std::mt19937_64& rng) : dim_(cfg.latent_dim) {
    Index ch = cfg.top_channels();
    input_ = ad::same_conv1d(store, "dec.input", cfg.latent_dim, ch, 7, rng);
    lstm_ = ad::Lstm<T>(store, "dec.lstm", ch, cfg.lstm_layers, rng);
    for (std::size_t b = 0; b < cfg.strides.size(); ++b) {
      const Index s = cfg.strides[cfg.strides.size() - 1 - b];
      const std::string p = "dec.block" + std::to_string(b);
      Block blk;
      blk.up = ad::ConvTranspose1d<T>(store, p + ".up", ch, ch / 2, 2 * s, s, (s + 1) / 2, s / 2, rng);
      ch /= 2;
      blk.res = ResidualUnit<T>(store, p + ".res", ch, rng);
      blocks_.push_back(std::move(blk));
    }
    output_ = ad::same_conv1d(store, "dec.output", ch, 1, 7, rng);
  }

  Var<T> operator()(const Var<T>& z) const {
    if (z.rows() != dim_) {
      throw std::invalid_argument("decode: input has " + std::to_string(z.rows()) + " channels, decoder expects " +
                                  std::to_string(dim_));
    }
    Var<T> h = lstm_(input_(z));
    for (const auto& b : blocks_) h = b.res(b.up(ad::elu(h)));
    return ad::tanh(output_(ad::elu(h)));
  }

 private:
  struct Block {
    ad::ConvTranspose1d<T> up;
    ResidualUnit<T> res;
  };
  Index dim_ = 0;
  ad::Conv<T> input_, output_;
  ad::Lstm<T> lstm_;
  std::vector<Block> blocks_;
};

}  // namespace musa::model

#endif  // MUSA_MODEL_DECODER_HPP_
