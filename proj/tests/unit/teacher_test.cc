// tests/unit/teacher_test.cc

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
#include <map>

#include "doctest.h"
#include "musa/io/matrix_io.hpp"
#include "musa/dsp/stft.hpp"
#include "musa/teacher/teacher.hpp"
#include "fixtures.hpp"
#include "support.hpp"

using namespace musa;
using teacher::TeacherFeatureSequence;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using testing::KmeansOracle;
using testing::Mixture;

namespace {

dsp::Waveform tone(double hz, Eigen::Index n, double amp = 0.5) {
  VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = amp * std::sin(2.0 * dsp::kPi * hz * static_cast<double>(i) / 16000.0);
  return dsp::Waveform::from_samples(x);
}

}  // namespace

TEST_CASE("synthetic teacher examples") {
  auto a = tone(300, 16000);
  auto f = teacher::synthetic_teacher(a);
  CHECK(f.frames() == 50);
  CHECK(f.dim() == teacher::kSyntheticDim);
  CHECK(f.frame_rate == 50.0);
  CHECK(f.features.allFinite());
  CHECK(teacher::synthetic_teacher(a).features == f.features);
  auto silence = teacher::synthetic_teacher(dsp::Waveform::from_samples(VectorXd::Zero(16000)));
  CHECK((silence.features - f.features).norm() > 1.0);
  CHECK(teacher::synthetic_teacher(tone(300, 3200 + 319)).frames() == 10);
  CHECK_THROWS_AS(teacher::synthetic_teacher(tone(300, 319)), dsp::AudioError);
}

TEST_CASE("tokenize examples") {
  testing::Gen g(31);
  const MatrixXd book = g.matrix(6, 10);
  auto state = teacher::TokenizerState::identity(book);
  SUBCASE("frame equal to a codebook entry gives its index") {
    for (int k = 0; k < 10; ++k) {
      TeacherFeatureSequence f{book.col(k), 50.0};
      CHECK(teacher::tokenize(f, state).tokens == std::vector<int>{k});
    }
  }
  SUBCASE("constant sequence gives a constant token sequence") {
    TeacherFeatureSequence f{g.matrix(6, 1).replicate(1, 12), 50.0};
    auto t = teacher::tokenize(f, state).tokens;
    CHECK(t.size() == 12);
    CHECK(std::all_of(t.begin(), t.end(), [&](int v) { return v == t.front(); }));
  }
  SUBCASE("random features match exhaustive search through random projections") {
    state.down = g.matrix(6, 6);
    state.down_bias = g.matrix(6, 1).col(0);
    for (int trial = 0; trial < 20; ++trial) {
      TeacherFeatureSequence f{g.matrix(6, 30), 50.0};
      auto tok = teacher::tokenize(f, state).tokens;
      for (Eigen::Index t = 0; t < 30; ++t) {
        const VectorXd z = state.down * f.features.col(t) + state.down_bias;
        int best = 0;
        double bd = INFINITY;
        for (int k = 0; k < 10; ++k) {
          const double d = (z - book.col(k)).squaredNorm();
          if (d < bd) {
            bd = d;
            best = k;
          }
        }
        CHECK(tok[static_cast<std::size_t>(t)] == best);
      }
    }
  }
  SUBCASE("dimension mismatch") {
    TeacherFeatureSequence f{g.matrix(5, 3), 50.0};
    CHECK_THROWS_AS(teacher::tokenize(f, state), std::invalid_argument);
  }
}

TEST_CASE("train_tokenizer examples") {
  testing::Gen g(32);
  SUBCASE("K distinct constant sequences are reconstructed exactly") {
    std::vector<TeacherFeatureSequence> corpus;
    for (int k = 0; k < 8; ++k) corpus.push_back({g.matrix(4, 1).replicate(1, 20), 50.0});
    teacher::TokenizerConfig cfg;
    cfg.codebook_size = 8;
    cfg.steps = 50;
    auto s = teacher::train_tokenizer(corpus, cfg);
    CHECK(teacher::reconstruction_mse(corpus, s) < 1e-20);
  }
  SUBCASE("K = 1 maps everything to token 0") {
    std::vector<TeacherFeatureSequence> corpus{{g.matrix(4, 30), 50.0}, {g.matrix(4, 30), 50.0}};
    teacher::TokenizerConfig cfg;
    cfg.codebook_size = 1;
    cfg.steps = 20;
    auto s = teacher::train_tokenizer(corpus, cfg);
    for (const auto& f : corpus) {
      for (int t : teacher::tokenize(f, s).tokens) CHECK(t == 0);
    }
  }
  SUBCASE("errors") {
    teacher::TokenizerConfig cfg;
    cfg.codebook_size = 64;
    CHECK_THROWS_AS(teacher::train_tokenizer({}, cfg), std::invalid_argument);
    std::vector<TeacherFeatureSequence> small{{g.matrix(4, 50), 50.0}};
    CHECK_THROWS_WITH(teacher::train_tokenizer(small, cfg), doctest::Contains("too few"));
  }
}

TEST_CASE("tokenizer beats k-means on held-out mixture features") {
  testing::Gen g(33);
  Mixture mix(32, 16, g);
  std::vector<TeacherFeatureSequence> train, test;
  for (int i = 0; i < 40; ++i) train.push_back(mix.sample(100, g));
  for (int i = 0; i < 10; ++i) test.push_back(mix.sample(100, g));
  teacher::TokenizerConfig cfg;
  cfg.codebook_size = 16;
  cfg.seed = 7;
  teacher::TokenizerReport report;
  auto s = teacher::train_tokenizer(train, cfg, &report);
  MatrixXd all_train(16, 4000), all_test(16, 1000);
  for (int i = 0; i < 40; ++i) all_train.middleCols(i * 100, 100) = train[static_cast<std::size_t>(i)].features;
  for (int i = 0; i < 10; ++i) all_test.middleCols(i * 100, 100) = test[static_cast<std::size_t>(i)].features;
  KmeansOracle km(all_train, 16, 99);
  const double codec = teacher::reconstruction_mse(test, s);
  const double baseline = KmeansOracle::error(km.centres, all_test);
  CAPTURE(codec);
  CAPTURE(baseline);
  CAPTURE(report.initial_validation_mse);
  CAPTURE(report.best_validation_mse);
  CAPTURE(report.best_step);
  CHECK(codec <= baseline);
  CHECK(report.best_validation_mse <= report.initial_validation_mse);
  // dead-codebook guard: no token dominates
  std::map<int, int> counts;
  int n = 0;
  for (const auto& f : test) {
    for (int t : teacher::tokenize(f, s).tokens) {
      ++counts[t];
      ++n;
    }
  }
  for (const auto& [t, c] : counts) CHECK(c <= 0.9 * n);
}

TEST_CASE("token occupancy on synthetic teacher features of varied audio") {
  testing::Gen g(34);
  std::vector<TeacherFeatureSequence> corpus;
  for (int i = 0; i < 12; ++i) {
    VectorXd x(16000);
    const double f0 = g.uniform(100, 400);
    for (Eigen::Index n = 0; n < x.size(); ++n) {
      const double env = std::sin(dsp::kPi * static_cast<double>(n) / 16000.0 * g.uniform(1.0, 1.0001) * (1 + i % 4));
      x(n) = 0.3 * env * std::sin(2.0 * dsp::kPi * f0 * static_cast<double>(n) / 16000.0) + g.normal(0, 0.01);
    }
    corpus.push_back(teacher::synthetic_teacher(dsp::Waveform::from_samples(x)));
  }
  teacher::TokenizerConfig cfg;
  cfg.codebook_size = 32;
  cfg.steps = 100;
  auto s = teacher::train_tokenizer(corpus, cfg);
  std::map<int, int> counts;
  int n = 0;
  for (const auto& f : corpus) {
    for (int t : teacher::tokenize(f, s).tokens) {
      ++counts[t];
      ++n;
    }
  }
  for (const auto& [t, c] : counts) CHECK(c <= 0.9 * n);
  CHECK(counts.size() > 4);
}

TEST_CASE("tokenizer file round trip and guards") {
  testing::Gen g(35);
  auto s = teacher::TokenizerState::identity(g.matrix(5, 7));
  s.down = g.matrix(5, 5);
  auto dir = testing::temp_dir("tokenizer");
  teacher::save_tokenizer(s, dir / "tok.bin");
  auto r = teacher::load_tokenizer(dir / "tok.bin");
  CHECK(r.down == s.down);
  CHECK(r.codebook == s.codebook);
  CHECK(r.up_bias == s.up_bias);
  auto bytes = io::read_file(dir / "tok.bin");
  CHECK(teacher::serialize_tokenizer(r) == bytes);
  auto bad = bytes;
  bad[bad.size() / 2] ^= 0x10;
  CHECK_THROWS_WITH(teacher::deserialize_tokenizer(bad), doctest::Contains("checksum"));
  auto version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(teacher::deserialize_tokenizer(version), io::VersionError);
}

TEST_CASE("feature directory round trip") {
  testing::Gen g(36);
  std::vector<teacher::FeatureEntry> entries{{"a", {g.dyadic(4, 9), 50.0}}, {"b", {g.dyadic(4, 3), 49.5}}};
  auto dir = testing::temp_dir("features");
  teacher::write_feature_dir(dir, entries);
  auto back = teacher::read_feature_dir(dir);
  REQUIRE(back.size() == 2);
  CHECK(back[0].utt_id == "a");
  CHECK(back[0].features.features == entries[0].features.features);
  CHECK(back[1].features.frame_rate == 49.5);
  std::filesystem::resize_file(dir / "b.f32", 8);
  CHECK_THROWS_AS(teacher::read_feature_dir(dir), io::FormatError);
}
