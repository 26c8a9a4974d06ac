// musa/train/objective.hpp

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

#ifndef MUSA_TRAIN_OBJECTIVE_HPP_
#define MUSA_TRAIN_OBJECTIVE_HPP_

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "musa/model/losses.hpp"
#include "musa/model/model.hpp"

namespace musa::train {

using model::Var;
using ad::Matrix;

/// Mixture weights of the generator objective.
struct LossWeights {
  double rec = 45.0;
  double adv = 1.0;
  double fm = 1.0;
  double com = 0.1;
  double spk = 1.0;
  double sem = 1.0;
};

enum class Term { kRec, kAdv, kFm, kCom, kSpk, kSem };
inline constexpr std::array<Term, 6> kAllTerms{Term::kRec, Term::kAdv, Term::kFm, Term::kCom, Term::kSpk, Term::kSem};

inline const char* term_name(Term t) {
  switch (t) {
    case Term::kRec: return "rec";
    case Term::kAdv: return "adv";
    case Term::kFm: return "fm";
    case Term::kCom: return "com";
    case Term::kSpk: return "spk";
    case Term::kSem: return "sem";
  }
  return "?";
}

inline double weight(const LossWeights& w, Term t) {
  switch (t) {
    case Term::kRec: return w.rec;
    case Term::kAdv: return w.adv;
    case Term::kFm: return w.fm;
    case Term::kCom: return w.com;
    case Term::kSpk: return w.spk;
    case Term::kSem: return w.sem;
  }
  return 0.0;
}

/// One value slot per term; a term with zero weight may be left empty.
template <typename V>
struct LossTerms {
  std::array<std::optional<V>, 6> values;

  std::optional<V>& operator[](Term t) { return values[static_cast<std::size_t>(t)]; }
  const std::optional<V>& operator[](Term t) const { return values[static_cast<std::size_t>(t)]; }
};

/// lambda_r L_rec + lambda_a L_adv + lambda_f L_fm + lambda_c L_com +
/// lambda_s L_spk + lambda_m L_sem. A term whose weight is zero is left out
/// of the sum entirely; a missing term with a nonzero weight is an error.
inline double total_generator_loss(const LossWeights& w, const LossTerms<double>& terms) {
  double total = 0.0;
  for (Term t : kAllTerms) {
    const double lambda = weight(w, t);
    if (lambda == 0.0) continue;
    if (!terms[t]) throw std::invalid_argument(std::string("total_generator_loss: missing term ") + term_name(t));
    total += lambda * *terms[t];
  }
  return total;
}

template <typename T>
Var<T> total_generator_loss(const LossWeights& w, const LossTerms<Var<T>>& terms) {
  Var<T> total;
  for (Term t : kAllTerms) {
    const double lambda = weight(w, t);
    if (lambda == 0.0) continue;
    if (!terms[t] || !terms[t]->defined())
      throw std::invalid_argument(std::string("total_generator_loss: missing term ") + term_name(t));
    auto term = ad::scale(*terms[t], static_cast<T>(lambda));
    total = total.defined() ? ad::add(total, term) : term;
  }
  if (!total.defined()) total = Var<T>::scalar(T(0));
  return total;
}

/// One training item: a crop, two speaker segments of the same utterance,
/// the speaker label and teacher tokens aligned to the crop's frames.
template <typename T>
struct TrainingExample {
  Matrix<T> audio;  // 1 x L, L a multiple of the hop
  Matrix<T> mel1;   // log-mel of segment 1
  Matrix<T> mel2;   // log-mel of segment 2
  int label = 0;
  std::vector<int> tokens;
};

/// Frozen quantizer choice, used to evaluate the straight-through path at
/// perturbed parameters: the decoder sees r1 + offset with the offset taken
/// at the base point.
template <typename T>
struct QuantizerReplay {
  model::CodeSequence codes;
  model::QuantizedRepresentation<T> q;
  Matrix<T> offset;  // q.total - r1 at the base point
};

template <typename T>
struct GeneratorForward {
  LossTerms<Var<T>> terms;
  Var<T> total;
  Var<T> x_hat;
  Matrix<T> r1;
  model::CodeSequence codes;
  model::QuantizedRepresentation<T> q;
  // Components of the reconstruction and speaker terms, for logging.
  Var<T> rec_time, mel_l1, mel_l2, spk_ce, spk_cos;
};

/// Builds every generator-side term for one example. Terms with zero weight
/// are skipped. Adversarial terms use the current discriminators, whose
/// parameters should be frozen by the caller.
template <typename T>
GeneratorForward<T> generator_forward(const model::MusaModel<T>& m, const TrainingExample<T>& ex,
                                      const LossWeights& w, const QuantizerReplay<T>* replay = nullptr) {
  if (!m.bank.initialized) throw std::logic_error("generator_forward: quantizer bank not initialised");
  GeneratorForward<T> out;
  const auto& cfg = m.config;
  auto x = ad::constant<T>(ex.audio);
  auto frames = m.encoder(x);

  auto spk = model::speaker_distillation<T>(m.speaker_encoder, m.classifier, ad::constant<T>(ex.mel1),
                                            ad::constant<T>(ex.mel2), ex.label, cfg.num_speakers);
  auto r1 = ad::sub_colwise(frames, spk.s1);
  out.r1 = r1.value();

  Var<T> zq;
  if (replay != nullptr) {
    out.codes = replay->codes;
    out.q = replay->q;
    zq = ad::add(r1, ad::constant<T>(replay->offset));
  } else {
    auto [codes, q] = model::quantize(r1.value(), m.bank);
    out.codes = std::move(codes);
    out.q = std::move(q);
    zq = model::straight_through_total(r1, out.q);
  }
  out.x_hat = m.decoder(ad::add_colwise(zq, spk.s1));

  if (w.rec != 0.0) {
    auto rec = model::reconstruction_loss(x, out.x_hat, cfg.mel);
    out.terms[Term::kRec] = rec.total;
    out.rec_time = rec.time;
    out.mel_l1 = rec.mel_l1;
    out.mel_l2 = rec.mel_l2;
  }
  if (w.adv != 0.0 || w.fm != 0.0) {
    auto fake = m.discriminators(out.x_hat);
    if (w.adv != 0.0) out.terms[Term::kAdv] = model::generator_adversarial_loss(fake);
    if (w.fm != 0.0) {
      std::vector<model::DiscriminatorOutput<T>> real;
      {
        ad::NoGradGuard guard;
        real = m.discriminators(x);
      }
      out.terms[Term::kFm] = model::feature_matching_loss(real, fake);
    }
  }
  if (w.com != 0.0) out.terms[Term::kCom] = model::commitment_loss(r1, out.q);
  if (w.spk != 0.0) {
    out.terms[Term::kSpk] = spk.loss;
    out.spk_ce = spk.ce;
    out.spk_cos = spk.cosine;
  }
  if (w.sem != 0.0) {
    out.terms[Term::kSem] =
        model::semantic_distillation_loss(model::layer1_logits(r1, m.bank), std::span<const int>(ex.tokens));
  }
  out.total = total_generator_loss<T>(w, out.terms);
  return out;
}

/// Replay record for the current quantizer choice of a forward pass.
template <typename T>
QuantizerReplay<T> make_replay(const GeneratorForward<T>& f) {
  return {f.codes, f.q, f.q.total - f.r1};
}

/// Least-squares discriminator loss on one real/generated pair.
template <typename T>
Var<T> discriminator_forward(const model::MusaModel<T>& m, const Matrix<T>& real, const Matrix<T>& fake) {
  return model::discriminator_loss(m.discriminators(ad::constant<T>(real)), m.discriminators(ad::constant<T>(fake)));
}

}  // namespace musa::train

#endif  // MUSA_TRAIN_OBJECTIVE_HPP_
