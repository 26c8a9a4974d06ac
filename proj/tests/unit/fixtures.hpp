// tests/unit/fixtures.hpp

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

// Small models and reference procedures shared by the unit tests and the
// acceptance checks.

#ifndef MUSA_TESTS_FIXTURES_HPP_
#define MUSA_TESTS_FIXTURES_HPP_

#include <cmath>
#include <random>
#include <vector>

#include "musa/teacher/teacher.hpp"
#include "musa/train/objective.hpp"
#include "support.hpp"

namespace musa::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Tiny model with an initialised bank and one training example.
struct TinySetup {
  model::MusaModel<double> m;
  train::TrainingExample<double> ex;

  explicit TinySetup(std::uint64_t seed) : m(model::ModelConfig::tiny(), seed) {
    testing::Gen g(seed);
    const Eigen::VectorXd audio = g.matrix(64, 1, 0.3).col(0);
    ex.audio = audio.transpose();
    ex.mel1 = dsp::log_mel(audio.head(40), m.config.mel);
    ex.mel2 = dsp::log_mel(audio.tail(40), m.config.mel);
    ex.label = 1;
    for (int i = 0; i < 16; ++i) ex.tokens.push_back(static_cast<int>(g.integer(0, 3)));
    std::mt19937_64 rng(seed);
    model::kmeans_init(m.bank, MatrixXd(g.matrix(3, 40, 0.5)), rng);
    m.discriminator.set_trainable(false);
  }
};

inline train::LossWeights only(train::Term t) {
  train::LossWeights w{0, 0, 0, 0, 0, 0};
  switch (t) {
    case train::Term::kRec: w.rec = 1; break;
    case train::Term::kAdv: w.adv = 1; break;
    case train::Term::kFm: w.fm = 1; break;
    case train::Term::kCom: w.com = 1; break;
    case train::Term::kSpk: w.spk = 1; break;
    case train::Term::kSem: w.sem = 1; break;
  }
  return w;
}

// Plain Lloyd iterations from random data points, best of several restarts.
struct KmeansOracle {
  MatrixXd centres;

  KmeansOracle(const MatrixXd& x, int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double best = INFINITY;
    for (int restart = 0; restart < 4; ++restart) {
      std::uniform_int_distribution<Eigen::Index> pick(0, x.cols() - 1);
      MatrixXd c(x.rows(), k);
      for (int j = 0; j < k; ++j) c.col(j) = x.col(pick(rng));
      for (int it = 0; it < 60; ++it) {
        MatrixXd sum = MatrixXd::Zero(x.rows(), k);
        VectorXd count = VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < x.cols(); ++i) {
          const int a = nearest(c, x.col(i));
          sum.col(a) += x.col(i);
          count(a) += 1;
        }
        for (int j = 0; j < k; ++j) {
          if (count(j) > 0) c.col(j) = sum.col(j) / count(j);
        }
      }
      const double e = error(c, x);
      if (e < best) {
        best = e;
        centres = c;
      }
    }
  }
  static int nearest(const MatrixXd& c, const VectorXd& v) {
    int best = 0;
    double bd = INFINITY;
    for (int j = 0; j < c.cols(); ++j) {
      const double d = (c.col(j) - v).squaredNorm();
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    return best;
  }
  static double error(const MatrixXd& c, const MatrixXd& x) {
    double s = 0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) s += (c.col(nearest(c, x.col(i))) - x.col(i)).squaredNorm();
    return s / static_cast<double>(x.size());
  }
};

// Gaussian mixture with `components` anisotropic clusters in `dim` dimensions.
struct Mixture {
  std::vector<VectorXd> means;
  std::vector<MatrixXd> scales;

  Mixture(int components, int dim, testing::Gen& g) {
    for (int c = 0; c < components; ++c) {
      means.push_back(g.matrix(dim, 1, 3.0).col(0));
      scales.push_back(g.matrix(dim, dim, 0.35));
    }
  }
  teacher::TeacherFeatureSequence sample(Eigen::Index frames, testing::Gen& g) const {
    teacher::TeacherFeatureSequence f;
    f.features.resize(means.front().size(), frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
      const auto c = static_cast<std::size_t>(g.integer(0, static_cast<long>(means.size()) - 1));
      f.features.col(t) = means[c] + scales[c] * g.matrix(means.front().size(), 1).col(0);
    }
    return f;
  }
};

}  // namespace musa::testing

#endif  // MUSA_TESTS_FIXTURES_HPP_
