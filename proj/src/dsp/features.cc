// dsp/features.cc

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

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>

#include "musa/dsp/audio.hpp"
#include "musa/dsp/stft.hpp"

namespace musa::dsp {

const Eigen::MatrixXd& cached_filterbank(const MelConfig& c) {
  thread_local std::map<std::tuple<int, int, double, double>, Eigen::MatrixXd> cache;
  const auto key = std::make_tuple(c.n_mels, c.n_fft, c.fmin, c.fmax);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, mel_filterbank(c.n_mels, c.n_fft, kSampleRate, c.fmin, c.fmax)).first;
  }
  return it->second;
}

Eigen::MatrixXd log_mel(const Eigen::VectorXd& samples, const MelConfig& config) {
  if (samples.size() < config.n_fft) {
    throw AudioError("waveform shorter than one analysis window (" + std::to_string(samples.size()) +
                     " < " + std::to_string(config.n_fft) + " samples)");
  }
  const auto spectra = stft<double>(samples.data(), samples.size(), config.n_fft, config.hop);
  Eigen::MatrixXd mel = cached_filterbank(config) * magnitude(spectra);
  const double floor = config.floor;
  return mel.unaryExpr([floor](double v) { return std::log(std::max(v, floor)); });
}

MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& config) {
  MelSpectrogram m;
  m.values = log_mel(w.samples, config);
  m.config = config;
  return m;
}

PitchTrack extract_pitch(const Waveform& w, const PitchConfig& c) {
  const Eigen::Index n = w.samples.size();
  if (n < c.frame_length) {
    throw AudioError("audio too short for pitch analysis (need " + std::to_string(c.frame_length) + " samples)");
  }
  const int tau_min = static_cast<int>(std::floor(kSampleRate / c.fmax));
  const int tau_max = static_cast<int>(std::ceil(kSampleRate / c.fmin));
  const int win = std::min(c.integration_window, c.frame_length - tau_max - 2);
  const Eigen::Index frames = (n - c.frame_length) / c.hop + 1;

  PitchTrack track;
  track.hop_seconds = static_cast<double>(c.hop) / kSampleRate;
  track.f0 = Eigen::VectorXd::Zero(frames);
  track.voiced.assign(static_cast<std::size_t>(frames), false);

  std::vector<double> diff(static_cast<std::size_t>(tau_max) + 2, 0.0);
  std::vector<double> cmnd(static_cast<std::size_t>(tau_max) + 2, 1.0);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const double* x = w.samples.data() + f * c.hop;
    double energy = 0.0;
    for (int j = 0; j < c.frame_length; ++j) energy += x[j] * x[j];
    if (std::sqrt(energy / c.frame_length) < c.silence_rms) continue;

    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      double d = 0.0;
      for (int j = 0; j < win; ++j) {
        const double e = x[j] - x[j + tau];
        d += e * e;
      }
      diff[tau] = d;
    }
    double running = 0.0;
    for (int tau = 1; tau <= tau_max + 1; ++tau) {
      running += diff[tau];
      cmnd[tau] = running > 0.0 ? diff[tau] * tau / running : 1.0;
    }
    int best = -1;
    for (int tau = tau_min; tau <= tau_max; ++tau) {
      if (cmnd[tau] < c.threshold) {
        while (tau + 1 <= tau_max && cmnd[tau + 1] < cmnd[tau]) ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) continue;
    double period = best;
    if (best > 1 && best < tau_max + 1) {
      const double a = cmnd[best - 1], b = cmnd[best], cc = cmnd[best + 1];
      const double denom = a - 2.0 * b + cc;
      if (std::abs(denom) > 1e-12) period += 0.5 * (a - cc) / denom;
    }
    track.f0(f) = kSampleRate / period;
    track.voiced[static_cast<std::size_t>(f)] = true;
  }
  return track;
}

void write_pitch_csv(const PitchTrack& track, std::ostream& os) {
  os << "frame_index,f0_hz,voiced\n";
  std::ostringstream line;
  line.precision(17);
  for (Eigen::Index i = 0; i < track.size(); ++i) {
    line.str("");
    line << i << ',' << track.f0(i) << ',' << (track.voiced[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    os << line.str();
  }
}

PitchTrack read_pitch_csv(std::istream& is, double hop_seconds) {
  std::string line;
  std::vector<double> f0;
  std::vector<bool> voiced;
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("frame_index", 0) == 0) continue;
    }
    std::istringstream ss(line);
    std::string idx, hz, v;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, hz, ',') || !std::getline(ss, v, ',')) {
      throw std::runtime_error("malformed pitch CSV line: " + line);
    }
    const double value = std::stod(hz);
    const bool is_voiced = std::stoi(v) != 0;
    if (is_voiced ? !(value > 0.0) : value != 0.0) {
      throw std::runtime_error("pitch CSV violates f0/voicing invariant: " + line);
    }
    f0.push_back(value);
    voiced.push_back(is_voiced);
  }
  PitchTrack t;
  t.f0 = Eigen::Map<Eigen::VectorXd>(f0.data(), static_cast<Eigen::Index>(f0.size()));
  t.voiced = std::move(voiced);
  t.hop_seconds = hop_seconds;
  return t;
}

}  // namespace musa::dsp
