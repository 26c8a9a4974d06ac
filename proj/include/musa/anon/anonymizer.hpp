// musa/anon/anonymizer.hpp

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

#ifndef MUSA_ANON_ANONYMIZER_HPP_
#define MUSA_ANON_ANONYMIZER_HPP_

#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "musa/model/model.hpp"
#include "musa/train/data.hpp"

namespace musa::anon {

using Model = model::MusaModel<float>;

/// alpha * s + (1 - alpha) * empty. alpha = 0 gives the empty (all-zero)
/// embedding.
template <typename T>
model::SpeakerEmbedding<T> conceal(const model::SpeakerEmbedding<T>& s, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("conceal: alpha must be in [0, 1]");
  if (alpha == 0.0) return model::SpeakerEmbedding<T>::empty(s.dim());
  return {s.values * static_cast<T>(alpha), false};
}

/// Decodes a code sequence with a concealed speaker vector. The original
/// embedding reaches the decoder only through conceal().
template <typename T>
dsp::Waveform anonymize_from_codes(const model::MusaModel<T>& m, const model::CodeSequence& codes,
                                   const model::SpeakerEmbedding<T>& s, double alpha) {
  return model::decode(m, {model::dequantize(codes, m.bank), conceal(s, alpha)});
}

/// Encode, split off the speaker, quantize, conceal, decode. Output length is
/// the input length truncated to a multiple of the total stride.
template <typename T>
dsp::Waveform anonymize(const model::MusaModel<T>& m, const dsp::Waveform& w, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("anonymize: alpha must be in [0, 1]");
  auto a = model::analyze(m, w);
  return anonymize_from_codes(m, a.codes, a.speaker, alpha);
}

/// Plain resynthesis: quantized content plus the utterance's own speaker
/// vector, decoded without any blending.
template <typename T>
dsp::Waveform reconstruct(const model::MusaModel<T>& m, const dsp::Waveform& w) {
  auto a = model::analyze(m, w);
  return model::decode(m, {a.content_prosody, a.speaker});
}

struct AnonymizationRequest {
  std::filesystem::path input;
  double alpha = 0.0;
  std::filesystem::path output;
};

/// Reads, anonymizes and writes one file.
void anonymize_file(const Model& m, const AnonymizationRequest& req);

struct FileResult {
  std::string utt_id;
  std::string status;  // "ok" or "failed"
  std::filesystem::path out_path;
  double alpha = 0.0;
  std::string error;
};

struct CorpusReport {
  std::vector<FileResult> files;  // manifest order
  std::size_t succeeded() const;
  std::size_t failed() const;
  std::string to_json() const;
};

/// One `<utt_id>.wav` per manifest entry under out_dir, plus report.json.
/// A failing entry is recorded and does not stop the others. Entries are
/// spread over `jobs` threads; the model is only read.
CorpusReport anonymize_corpus(const Model& m, const std::vector<train::ManifestEntry>& manifest, double alpha,
                              const std::filesystem::path& out_dir, int jobs = 1);

}  // namespace musa::anon

#endif  // MUSA_ANON_ANONYMIZER_HPP_
