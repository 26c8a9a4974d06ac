// musa/dsp/audio.hpp

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

#ifndef MUSA_DSP_AUDIO_HPP_
#define MUSA_DSP_AUDIO_HPP_

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace musa::dsp {

inline constexpr int kSampleRate = 16000;

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mono PCM at 16 kHz. Construct through from_samples() to get the
/// invariants checked (non-empty, finite).
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = kSampleRate;

  static Waveform from_samples(Eigen::VectorXd samples);
  Eigen::Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Raw decoded RIFF/WAVE contents, channels x frames in [-1, 1].
struct WavData {
  int sample_rate = 0;
  int bits_per_sample = 0;
  Eigen::MatrixXd channels;
};

WavData read_wav(const std::filesystem::path& path);
WavData parse_wav(const std::vector<char>& bytes);

/// Loads a PCM WAV, averages channels, resamples to 16 kHz and
/// peak-normalises to 0.95. Throws AudioError.
Waveform load_waveform(const std::filesystem::path& path);

/// Mono mix + resample + peak normalisation of already decoded data.
Waveform ingest(const WavData& wav);

/// Writes 16-bit PCM mono at the waveform's rate (always 16 kHz here).
void save_waveform(const Waveform& w, const std::filesystem::path& path);
std::vector<char> encode_wav16(const Eigen::VectorXd& samples, int sample_rate);

/// Band-limited (Hann-windowed sinc) resampling; output length is
/// round(n * to / from).
Eigen::VectorXd resample(const Eigen::VectorXd& x, int from_rate, int to_rate);

void peak_normalize(Eigen::VectorXd& x, double peak = 0.95);

// ------------------------------------------------------------------ mel

struct MelConfig {
  int n_fft = 1024;
  int hop = 256;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double floor = 1e-5;
};

struct MelSpectrogram {
  Eigen::MatrixXd values;  // n_mels x frames, natural log
  MelConfig config;
  Eigen::Index bins() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

/// Shared filterbank for a config (cached per thread).
const Eigen::MatrixXd& cached_filterbank(const MelConfig& config);

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& config = {});
Eigen::MatrixXd log_mel(const Eigen::VectorXd& samples, const MelConfig& config = {});

// ------------------------------------------------------------------ pitch

struct PitchConfig {
  int frame_length = 1024;     // 64 ms analysis frame
  int hop = 160;               // 10 ms
  int integration_window = 512;
  double fmin = 60.0;
  double fmax = 500.0;
  double threshold = 0.15;     // CMNDF voicing threshold
  double silence_rms = 1e-4;
};

struct PitchTrack {
  Eigen::VectorXd f0;               // Hz, 0 where unvoiced
  std::vector<bool> voiced;
  double hop_seconds = 0.01;

  Eigen::Index size() const { return f0.size(); }
};

/// YIN-style autocorrelation pitch tracker.
PitchTrack extract_pitch(const Waveform& w, const PitchConfig& config = {});

void write_pitch_csv(const PitchTrack& track, std::ostream& os);
PitchTrack read_pitch_csv(std::istream& is, double hop_seconds = 0.01);

}  // namespace musa::dsp

#endif  // MUSA_DSP_AUDIO_HPP_
