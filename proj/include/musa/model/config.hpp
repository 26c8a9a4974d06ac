// musa/model/config.hpp

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

#ifndef MUSA_MODEL_CONFIG_HPP_
#define MUSA_MODEL_CONFIG_HPP_

#include <string>
#include <vector>

#include "musa/dsp/audio.hpp"

namespace musa::model {

/// Architecture hyper-parameters. The default values are the full-size
/// model; toy() and tiny() are the desk-scale and gradient-check profiles.
struct ModelConfig {
  int base_channels = 32;             // doubled at every encoder block
  int latent_dim = 512;               // d
  std::vector<int> strides{2, 4, 5, 8};
  int lstm_layers = 2;
  int num_quantizers = 8;             // N
  int codebook_size = 1024;           // K
  int speaker_channels = 32;          // 2-D conv width of the speaker encoder
  int num_speakers = 2;
  int disc_channels = 32;
  std::vector<int> stft_scales{512, 1024, 2048};
  std::vector<int> periods{2, 3, 5, 7, 11};
  int msd_scales = 3;
  dsp::MelConfig mel;                 // front-end for losses and speaker encoder

  int hop() const {
    int h = 1;
    for (int s : strides) h *= s;
    return h;
  }
  int top_channels() const { return base_channels << strides.size(); }

  static ModelConfig paper() { return ModelConfig{}; }

  static ModelConfig toy() {
    ModelConfig c;
    c.base_channels = 4;
    c.latent_dim = 64;
    c.codebook_size = 64;
    c.speaker_channels = 8;
    c.disc_channels = 8;
    return c;
  }

  /// Few hundred parameters; used for finite-difference checks.
  static ModelConfig tiny() {
    ModelConfig c;
    c.base_channels = 1;
    c.latent_dim = 3;
    c.strides = {2, 2};
    c.lstm_layers = 0;
    c.num_quantizers = 2;
    c.codebook_size = 4;
    c.speaker_channels = 1;
    c.num_speakers = 2;
    c.disc_channels = 1;
    c.stft_scales = {16};
    c.periods = {2};
    c.msd_scales = 1;
    c.mel.n_fft = 16;
    c.mel.hop = 8;
    c.mel.n_mels = 4;
    return c;
  }
};

}  // namespace musa::model

#endif  // MUSA_MODEL_CONFIG_HPP_
