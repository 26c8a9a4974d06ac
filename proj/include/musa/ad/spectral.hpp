// musa/ad/spectral.hpp

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

#ifndef MUSA_AD_SPECTRAL_HPP_
#define MUSA_AD_SPECTRAL_HPP_

#include "musa/ad/ops.hpp"
#include "musa/dsp/stft.hpp"

namespace musa::ad {

/// |STFT| of a 1 x L signal: (n_fft/2 + 1) x frames. Uses the same framing
/// and window as dsp::stft so the differentiable and plain paths agree.
template <typename T>
Var<T> stft_magnitude(const Var<T>& signal, Index n_fft, Index hop) {
  if (signal.rows() != 1) throw std::invalid_argument("stft_magnitude: expects a 1 x L signal");
  auto spectra = dsp::stft<T>(signal.value().data(), signal.cols(), n_fft, hop);
  Matrix<T> mag = dsp::magnitude(spectra);
  auto ns = signal.node();
  return make_result<T>(
      mag, {signal},
      [ns, n_fft, hop, spectra = std::move(spectra), mag](const Matrix<T>& g) {
        const Index bins = n_fft / 2 + 1;
        const auto window = dsp::hann_window<T>(n_fft);
        Eigen::FFT<T> fft;
        std::vector<std::complex<T>> freq(static_cast<std::size_t>(n_fft)), time;
        auto& gs = ns->grad_buffer();
        for (Index f = 0; f < mag.cols(); ++f) {
          std::fill(freq.begin(), freq.end(), std::complex<T>(0, 0));
          for (Index k = 0; k < bins; ++k) {
            const T s = g(k, f) / mag(k, f);
            freq[k] = std::complex<T>(s * spectra.re(k, f), s * spectra.im(k, f));
          }
          // d/du_n = Re(sum_k c_k e^{+2 pi i k n / N}) = N * Re(ifft(c))_n
          fft.inv(time, freq);
          for (Index n = 0; n < n_fft; ++n) {
            gs(0, f * hop + n) += static_cast<T>(n_fft) * time[n].real() * window(n);
          }
        }
      });
}

/// Natural-log mel spectrogram: log(max(fb * |STFT|, floor)).
template <typename T>
Var<T> log_mel(const Var<T>& signal, const Matrix<T>& filterbank, Index n_fft, Index hop, T floor) {
  return clamp_log(matmul(constant<T>(filterbank), stft_magnitude(signal, n_fft, hop)), floor);
}

}  // namespace musa::ad

#endif  // MUSA_AD_SPECTRAL_HPP_
