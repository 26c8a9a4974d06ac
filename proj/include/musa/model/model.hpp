// musa/model/model.hpp

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

#ifndef MUSA_MODEL_MODEL_HPP_
#define MUSA_MODEL_MODEL_HPP_

#include <cstdint>
#include <random>

#include "musa/dsp/audio.hpp"
#include "musa/model/decoder.hpp"
#include "musa/model/discriminators.hpp"
#include "musa/model/encoders.hpp"
#include "musa/model/rvq.hpp"

namespace musa::model {

/// Every trainable part of the system plus the quantizer bank. Generator-side
/// tensors (both encoders, classifier, decoder) and discriminator tensors
/// live in separate stores so they can have separate optimisers.
template <typename T>
class MusaModel {
 public:
  explicit MusaModel(const ModelConfig& cfg, std::uint64_t seed = 0)
      : config(cfg), bank(cfg.num_quantizers, cfg.codebook_size, cfg.latent_dim) {
    std::mt19937_64 rng(seed);
    encoder = SpeechEncoder<T>(generator, cfg, rng);
    speaker_encoder = SpeakerEncoder<T>(generator, cfg, rng);
    classifier = ad::Linear<T>(generator, "classifier", cfg.latent_dim, cfg.num_speakers, rng);
    decoder = Decoder<T>(generator, cfg, rng);
    discriminators = DiscriminatorSet<T>(discriminator, cfg, rng);
  }
  MusaModel(const MusaModel&) = delete;
  MusaModel& operator=(const MusaModel&) = delete;

  ModelConfig config;
  ad::ParameterStore<T> generator;
  ad::ParameterStore<T> discriminator;
  SpeechEncoder<T> encoder;
  SpeakerEncoder<T> speaker_encoder;
  ad::Linear<T> classifier;
  Decoder<T> decoder;
  DiscriminatorSet<T> discriminators;
  QuantizerBank<T> bank;
};

/// Log-mel frames of a waveform in the model's front-end configuration.
template <typename T>
Matrix<T> mel_frames(const Eigen::VectorXd& samples, const dsp::MelConfig& cfg) {
  return dsp::log_mel(samples, cfg).cast<T>();
}

template <typename T>
Var<T> signal_var(const Eigen::VectorXd& samples) {
  return ad::constant<T>(samples.transpose().cast<T>());
}

template <typename T>
FrameRepresentation<T> encode_speech(const MusaModel<T>& m, const dsp::Waveform& w) {
  ad::NoGradGuard guard;
  return {m.encoder(signal_var<T>(w.samples)).value(), w.size()};
}

template <typename T>
SpeakerEmbedding<T> encode_speaker(const MusaModel<T>& m, const dsp::Waveform& w) {
  ad::NoGradGuard guard;
  if (w.size() < m.config.mel.n_fft) throw dsp::AudioError("encode_speaker: audio shorter than one spectrogram frame");
  auto s = m.speaker_encoder(ad::constant<T>(mel_frames<T>(w.samples, m.config.mel)));
  return {s.value().col(0), false};
}

/// Decoder input: summed quantizer outputs plus the broadcast speaker vector.
template <typename T>
struct DecoderInput {
  Matrix<T> content_prosody;
  SpeakerEmbedding<T> speaker;
};

template <typename T>
dsp::Waveform decode(const MusaModel<T>& m, const DecoderInput<T>& in) {
  if (in.content_prosody.rows() != m.config.latent_dim || in.speaker.dim() != m.config.latent_dim)
    throw std::invalid_argument("decode: dimension mismatch");
  ad::NoGradGuard guard;
  Matrix<T> z = in.content_prosody.colwise() + in.speaker.values;
  auto y = m.decoder(ad::constant<T>(std::move(z)));
  return dsp::Waveform::from_samples(y.value().row(0).transpose().template cast<double>());
}

/// Codes of an utterance after speaker subtraction.
template <typename T>
struct Analysis {
  FrameRepresentation<T> frames;
  SpeakerEmbedding<T> speaker;
  CodeSequence codes;
  Matrix<T> content_prosody;
};

template <typename T>
Analysis<T> analyze(const MusaModel<T>& m, const dsp::Waveform& w) {
  Analysis<T> a;
  a.frames = encode_speech(m, w);
  a.speaker = encode_speaker(m, w);
  auto r1 = subtract_speaker(a.frames, a.speaker);
  auto [codes, q] = quantize(r1.values, m.bank);
  a.codes = std::move(codes);
  a.content_prosody = std::move(q.total);
  return a;
}

}  // namespace musa::model

#endif  // MUSA_MODEL_MODEL_HPP_
