// tests/unit/trainer_test.cc

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
#include <fstream>

#include "doctest.h"
#include "musa/io/matrix_io.hpp"
#include "musa/train/trainer.hpp"
#include "support.hpp"

using namespace musa;
using train::TrainingConfig;

namespace {

std::vector<train::ManifestEntry> toy_manifest() {
  return train::read_manifest(testing::source_dir() / "data" / "toy" / "manifest.tsv");
}

// Tiny model, short crops: a few steps run in well under a second.
TrainingConfig tiny_config() {
  TrainingConfig c;
  train::apply_override(c, "model.profile=tiny");
  c.crop_seconds = 0.05;
  c.segment_min_seconds = 0.05;
  c.segment_max_seconds = 0.1;
  c.batch_size = 2;
  c.total_steps = 6;
  c.tokenizer_steps = 20;
  c.seed = 11;
  return c;
}

}  // namespace

TEST_CASE("config defaults match the published training setup") {
  TrainingConfig c;
  CHECK(c.weights.rec == 45.0);
  CHECK(c.weights.adv == 1.0);
  CHECK(c.weights.fm == 1.0);
  CHECK(c.weights.com == 0.1);
  CHECK(c.weights.spk == 1.0);
  CHECK(c.weights.sem == 1.0);
  CHECK(c.beta1 == 0.8);
  CHECK(c.beta2 == 0.99);
  CHECK(c.weight_decay == 0.01);
  CHECK(c.initial_lr == 2e-4);
  CHECK(c.lr_decay == 0.999);
  CHECK(c.batch_size == 4);
  CHECK(c.total_steps == 2000);
  CHECK(c.crop_seconds == 1.0);
}

TEST_CASE("learning-rate schedule") {
  TrainingConfig c;
  for (int e : {0, 1, 7, 100, 2500}) CHECK(c.lr(e) == doctest::Approx(2e-4 * std::pow(0.999, e)).epsilon(1e-15));
  CHECK(c.lr(0) == 2e-4);
}

TEST_CASE("config text round trip, overrides and errors") {
  const std::string text =
      "[model]\nprofile = tiny\nlatent_dim = 5\n\n[train]\nlambda_sem = 0\nseed = 42\ntotal_steps = 10\n";
  auto c = train::parse_config(text);
  CHECK(c.profile == "tiny");
  CHECK(c.model.latent_dim == 5);
  CHECK(c.model.strides == std::vector<int>{2, 2});
  CHECK(c.weights.sem == 0.0);
  CHECK(c.seed == 42);
  auto again = train::parse_config(train::to_text(c));
  CHECK(train::to_text(again) == train::to_text(c));
  testing::Gen g(1);
  for (int trial = 0; trial < 50; ++trial) {
    TrainingConfig r;
    r.weights.rec = g.uniform(0, 100);
    r.initial_lr = g.uniform(1e-6, 1e-2);
    r.lr_decay = g.uniform(0.5, 1.0);
    r.crop_seconds = g.uniform(0.1, 3.0);
    auto back = train::parse_config(train::to_text(r));
    CHECK(back.weights.rec == r.weights.rec);
    CHECK(back.initial_lr == r.initial_lr);
    CHECK(back.lr_decay == r.lr_decay);
    CHECK(back.crop_seconds == r.crop_seconds);
  }
  train::apply_override(c, "train.lambda_spk=0");
  CHECK(c.weights.spk == 0.0);
  CHECK_THROWS_AS(train::apply_override(c, "train.nope=1"), train::ConfigError);
  CHECK_THROWS_AS(train::apply_override(c, "train.lambda_rec=-1"), train::ConfigError);
  CHECK_THROWS_AS(train::apply_override(c, "train.lr_decay=1.5"), train::ConfigError);
  CHECK_THROWS_AS(train::apply_override(c, "model.profile=huge"), train::ConfigError);
  CHECK_THROWS_AS(train::apply_override(c, "garbage"), train::ConfigError);
  CHECK_THROWS_AS(train::parse_config("[train]\nbatch_size = four\n"), train::ConfigError);
}

TEST_CASE("manifest parsing") {
  auto entries = train::parse_manifest("a\tspk1\tx.wav\n# comment\n\nb\tspk2\t/abs/y.wav\r\n", "/data");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].wav_path == std::filesystem::path("/data/x.wav"));
  CHECK(entries[1].wav_path == std::filesystem::path("/abs/y.wav"));
  CHECK_THROWS_WITH(train::parse_manifest("a\tspk1\n", "/"), doctest::Contains("line 1"));
  auto dir = testing::temp_dir("manifest");
  { std::ofstream(dir / "empty.tsv") << "# nothing\n"; }
  CHECK_THROWS_AS(train::read_manifest(dir / "empty.tsv"), train::ManifestError);
  CHECK_THROWS_AS(train::read_manifest(dir / "missing.tsv"), train::ManifestError);
  train::LabelTable t({"b", "a", "b"});
  CHECK(t.size() == 2);
  CHECK(t.label("a") == 0);
  CHECK(t.label("b") == 1);
  CHECK(t.hash() == train::LabelTable({"a", "b"}).hash());
  CHECK(t.hash() != train::LabelTable({"a", "c"}).hash());
}

TEST_CASE("toy corpus is present and loadable") {
  auto m = toy_manifest();
  CHECK(m.size() == 10);
  auto labels = train::LabelTable::from_manifest(m);
  CHECK(labels.size() == 2);
  for (const auto& e : m) {
    auto w = dsp::load_waveform(e.wav_path);
    CHECK(w.size() == 40000);
  }
}

TEST_CASE("training examples respect crop, hop and token alignment") {
  auto cfg = tiny_config();
  cfg.crop_seconds = 0.3;
  train::Trainer t(cfg, toy_manifest());
  const auto idx = t.batch_indices(0);
  CHECK(idx.size() == 2);
  for (int s = 0; s < 5; ++s) {
    for (auto i : idx) CHECK(i < t.corpus().size());
  }
  // one epoch visits every utterance exactly once
  std::vector<int> seen(t.corpus().size(), 0);
  for (std::int64_t s = 0; s < t.steps_per_epoch(); ++s) {
    for (auto i : t.batch_indices(s)) ++seen[i];
  }
  for (int v : seen) CHECK(v == 1);
  auto ex = t.make_example(t.corpus()[0], 0);
  CHECK(ex.audio.cols() == 4800);
  CHECK(ex.tokens.size() == 4800 / 4);
  CHECK(ex.mel1.rows() == 4);
}

TEST_CASE("seeded runs are identical; different seeds differ") {
  auto cfg = tiny_config();
  train::Trainer a(cfg, toy_manifest()), b(cfg, toy_manifest());
  for (int s = 0; s < 4; ++s) {
    auto la = a.step(), lb = b.step();
    CHECK(la.step == s + 1);
    REQUIRE(la.values.size() == lb.values.size());
    for (std::size_t i = 0; i < la.values.size(); ++i) {
      CAPTURE(la.values[i].first);
      CHECK(la.values[i].second == lb.values[i].second);
    }
  }
  cfg.seed = 12;
  train::Trainer c(cfg, toy_manifest());
  CHECK(c.step().get("total") != train::Trainer(tiny_config(), toy_manifest()).step().get("total"));
}

TEST_CASE("ablated terms are not logged or optimised") {
  auto cfg = tiny_config();
  cfg.weights.sem = 0.0;
  cfg.weights.adv = 0.0;
  cfg.weights.fm = 0.0;
  train::Trainer t(cfg, toy_manifest());
  auto log = t.step();
  CHECK_THROWS_AS(log.get("sem"), std::out_of_range);
  CHECK_THROWS_AS(log.get("disc"), std::out_of_range);
  CHECK(std::isfinite(log.get("rec")));
  CHECK(log.get("d_grad_norm") == 0.0);
}

TEST_CASE("checkpoint round trip, resume and guards") {
  auto cfg = tiny_config();
  auto manifest = toy_manifest();
  train::Trainer a(cfg, manifest);
  a.step();
  a.step();
  auto dir = testing::temp_dir("checkpoint");
  train::save_checkpoint(a.checkpoint(), dir / "a.ckpt");
  auto loaded = train::load_checkpoint(dir / "a.ckpt");
  CHECK(loaded.step == 2);
  CHECK(train::serialize_checkpoint(loaded) == io::read_file(dir / "a.ckpt"));
  auto m = train::model_from_checkpoint(loaded);
  for (std::size_t i = 0; i < m->generator.entries().size(); ++i)
    CHECK(m->generator.entries()[i].second.value() == a.model().generator.entries()[i].second.value());
  CHECK(m->bank.codebook(0) == a.model().bank.codebook(0));

  SUBCASE("resume continues exactly") {
    train::Trainer b(loaded, manifest);
    CHECK(b.steps_done() == 2);
    auto la = a.step();
    auto lb = b.step();
    CHECK(lb.step == 3);
    for (std::size_t i = 0; i < la.values.size(); ++i) CHECK(la.values[i].second == lb.values[i].second);
  }
  SUBCASE("version and checksum guards") {
    auto bytes = io::read_file(dir / "a.ckpt");
    auto v = bytes;
    v[8] = 7;
    CHECK_THROWS_AS(train::deserialize_checkpoint(v), io::VersionError);
    auto c = bytes;
    c[c.size() / 3] ^= 0x01;
    CHECK_THROWS_WITH(train::deserialize_checkpoint(c), doctest::Contains("checksum"));
    auto t = bytes;
    t.resize(t.size() - 10);
    CHECK_THROWS_AS(train::deserialize_checkpoint(t), io::FormatError);
  }
  SUBCASE("speaker table must match on resume") {
    auto other = manifest;
    other[0].speaker = "someone_else";
    CHECK_THROWS_AS(train::Trainer(loaded, other), train::TrainingError);
  }
}

TEST_CASE("non-finite loss aborts naming the term") {
  auto cfg = tiny_config();
  train::Trainer t(cfg, toy_manifest());
  auto w = t.model().generator.find("classifier.weight");
  w.mutable_value()(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH(t.step(), doctest::Contains("'spk'"));
}

TEST_CASE("empty manifest and short audio are errors") {
  CHECK_THROWS_AS(train::Trainer(tiny_config(), {}), train::ManifestError);
  auto dir = testing::temp_dir("short_audio");
  dsp::save_waveform(dsp::Waveform::from_samples(Eigen::VectorXd::Constant(100, 0.1)), dir / "s.wav");
  std::vector<train::ManifestEntry> m{{"s", "x", dir / "s.wav"}};
  CHECK_THROWS_AS(train::Trainer(tiny_config(), m), std::exception);
}

TEST_CASE("loss log round trip") {
  auto dir = testing::temp_dir("losslog");
  train::LossLog log(dir / "loss.csv");
  log.write({1, {{"rec", 0.5}, {"total", 1.0 / 3.0}}});
  log.write({2, {{"rec", 0.25}, {"total", 0.125}}});
  auto back = train::read_loss_log(dir / "loss.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].get("total") == 1.0 / 3.0);
  CHECK(back[1].get("rec") == 0.25);
  train::LossLog more(dir / "loss.csv", true);
  more.write({3, {{"rec", 0.1}}});
  CHECK(train::read_loss_log(dir / "loss.csv").size() == 3);
}
