// musa/dsp/stft.hpp

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

#ifndef MUSA_DSP_STFT_HPP_
#define MUSA_DSP_STFT_HPP_

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace musa::dsp {

inline constexpr double kPi = 3.14159265358979323846;

/// Periodic Hann window.
template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, 1> hann_window(Eigen::Index n) {
  Eigen::Matrix<T, Eigen::Dynamic, 1> w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = static_cast<T>(0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return w;
}

/// Number of frames without centre padding; 0 if the signal is shorter than
/// one window.
inline Eigen::Index num_frames(Eigen::Index length, Eigen::Index n_fft, Eigen::Index hop) {
  if (length < n_fft) return 0;
  return (length - n_fft) / hop + 1;
}

/// Complex half spectrum of every windowed frame. Result holds
/// (n_fft/2 + 1) x frames real and imaginary parts.
template <typename T>
struct FrameSpectra {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> re;
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> im;
};

template <typename T>
FrameSpectra<T> stft(const T* signal, Eigen::Index length, Eigen::Index n_fft, Eigen::Index hop) {
  const Eigen::Index frames = num_frames(length, n_fft, hop);
  if (frames == 0) throw std::invalid_argument("stft: signal shorter than one window");
  const Eigen::Index bins = n_fft / 2 + 1;
  const auto window = hann_window<T>(n_fft);
  FrameSpectra<T> out{decltype(out.re)(bins, frames), decltype(out.im)(bins, frames)};
  Eigen::FFT<T> fft;
  std::vector<T> buf(static_cast<std::size_t>(n_fft));
  std::vector<std::complex<T>> spec;
  for (Eigen::Index f = 0; f < frames; ++f) {
    const T* frame = signal + f * hop;
    for (Eigen::Index n = 0; n < n_fft; ++n) buf[n] = frame[n] * window(n);
    fft.fwd(spec, buf);
    for (Eigen::Index k = 0; k < bins; ++k) {
      out.re(k, f) = spec[k].real();
      out.im(k, f) = spec[k].imag();
    }
  }
  return out;
}

/// Floor inside the magnitude square root; keeps the gradient finite at
/// silent bins.
template <typename T>
inline constexpr T kMagnitudeEps = T(1e-9);

template <typename T>
Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> magnitude(const FrameSpectra<T>& s) {
  return (s.re.array().square() + s.im.array().square() + kMagnitudeEps<T>).sqrt().matrix();
}

/// Slaney-style mel scale (linear below 1 kHz, logarithmic above).
inline double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return hz >= min_log_hz ? min_log_mel + std::log(hz / min_log_hz) / logstep : hz / f_sp;
}

inline double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  return mel >= min_log_mel ? min_log_hz * std::exp(logstep * (mel - min_log_mel)) : f_sp * mel;
}

/// Triangular, area-normalised filters: n_mels x (n_fft/2 + 1).
inline Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate, double fmin, double fmax) {
  const int bins = n_fft / 2 + 1;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(n_mels, bins);
  const double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(n_mels + 1));
  }
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double norm = 2.0 / (hi - lo);
    for (int k = 0; k < bins; ++k) {
      const double f = k * sample_rate / n_fft;
      const double up = (f - lo) / (mid - lo);
      const double down = (hi - f) / (hi - mid);
      fb(m, k) = std::max(0.0, std::min(up, down)) * norm;
    }
  }
  return fb;
}

}  // namespace musa::dsp

#endif  // MUSA_DSP_STFT_HPP_
