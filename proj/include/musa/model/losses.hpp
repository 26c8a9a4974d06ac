// musa/model/losses.hpp

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

#ifndef MUSA_MODEL_LOSSES_HPP_
#define MUSA_MODEL_LOSSES_HPP_

#include <stdexcept>
#include <vector>

#include "musa/ad/spectral.hpp"
#include "musa/model/discriminators.hpp"

namespace musa::model {

template <typename T>
struct ReconstructionLoss {
  Var<T> time;    // mean |x - x_hat|
  Var<T> mel_l1;  // mean |mel(x) - mel(x_hat)|
  Var<T> mel_l2;  // mean (mel(x) - mel(x_hat))^2
  Var<T> total;
};

/// Time-domain L1 plus L1 and L2 distances between log-mel spectrograms, all
/// mean-reduced. Both inputs are 1 x L.
template <typename T>
ReconstructionLoss<T> reconstruction_loss(const Var<T>& x, const Var<T>& x_hat, const dsp::MelConfig& mel) {
  if (x.rows() != 1 || x_hat.rows() != 1 || x.cols() != x_hat.cols()) {
    throw std::invalid_argument("reconstruction_loss: length mismatch (" + std::to_string(x.cols()) + " vs " +
                                std::to_string(x_hat.cols()) + ")");
  }
  const Matrix<T> fb = dsp::cached_filterbank(mel).cast<T>();
  ReconstructionLoss<T> out;
  out.time = ad::l1_mean(x, x_hat);
  auto m = ad::log_mel(x, fb, mel.n_fft, mel.hop, static_cast<T>(mel.floor));
  auto m_hat = ad::log_mel(x_hat, fb, mel.n_fft, mel.hop, static_cast<T>(mel.floor));
  out.mel_l1 = ad::l1_mean(m, m_hat);
  out.mel_l2 = ad::mse(m, m_hat);
  out.total = ad::add(ad::add(out.time, out.mel_l1), out.mel_l2);
  return out;
}

/// sum_k mean((D_k(x) - 1)^2) + mean(D_k(x_hat)^2)
template <typename T>
Var<T> discriminator_loss(const std::vector<DiscriminatorOutput<T>>& real,
                          const std::vector<DiscriminatorOutput<T>>& fake) {
  if (real.size() != fake.size() || real.empty()) throw std::invalid_argument("discriminator_loss: output count mismatch");
  Var<T> total;
  for (std::size_t k = 0; k < real.size(); ++k) {
    auto term = ad::add(ad::mean(ad::square(ad::add_scalar(real[k].score, T(-1)))), ad::mean(ad::square(fake[k].score)));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

/// sum_k mean((D_k(x_hat) - 1)^2)
template <typename T>
Var<T> generator_adversarial_loss(const std::vector<DiscriminatorOutput<T>>& fake) {
  if (fake.empty()) throw std::invalid_argument("generator_adversarial_loss: no outputs");
  Var<T> total;
  for (const auto& f : fake) {
    auto term = ad::mean(ad::square(ad::add_scalar(f.score, T(-1))));
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

/// sum_k sum_l mean |D_k^l(x) - D_k^l(x_hat)|
template <typename T>
Var<T> feature_matching_loss(const std::vector<DiscriminatorOutput<T>>& real,
                             const std::vector<DiscriminatorOutput<T>>& fake) {
  if (real.size() != fake.size() || real.empty()) throw std::invalid_argument("feature_matching_loss: output count mismatch");
  Var<T> total;
  for (std::size_t k = 0; k < real.size(); ++k) {
    if (real[k].features.size() != fake[k].features.size())
      throw std::invalid_argument("feature_matching_loss: layer count mismatch");
    for (std::size_t l = 0; l < real[k].features.size(); ++l) {
      auto term = ad::l1_mean(ad::detach(real[k].features[l]), fake[k].features[l]);
      total = total.defined() ? ad::add(total, term) : term;
    }
  }
  return total;
}

template <typename T>
struct AdversarialLosses {
  Var<T> d, g, fm;
};

/// All three adversarial terms for one pair. loss_D sees a detached x_hat.
template <typename T, typename Discriminators>
AdversarialLosses<T> adversarial_losses(const Discriminators& dset, const Var<T>& x, const Var<T>& x_hat) {
  AdversarialLosses<T> out;
  const auto real = dset(x);
  const auto fake = dset(x_hat);
  out.d = discriminator_loss(real, dset(ad::detach(x_hat)));
  out.g = generator_adversarial_loss(fake);
  out.fm = feature_matching_loss(real, fake);
  return out;
}

}  // namespace musa::model

#endif  // MUSA_MODEL_LOSSES_HPP_
