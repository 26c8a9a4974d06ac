// tests/unit/harness_test.cc

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

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "musa/harness/harness.hpp"
#include "musa/io/files.hpp"
#include "musa/io/matrix_io.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace musa;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out, err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "musa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = harness::cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path toy(const std::string& file) { return testing::source_dir() / "data" / "toy" / file; }

// A tiny-profile model trained for one step, saved as a checkpoint.
fs::path tiny_checkpoint(const std::string& name, std::uint64_t seed) {
  auto dir = testing::temp_dir(name);
  train::TrainingConfig c;
  train::apply_override(c, "model.profile=tiny");
  c.crop_seconds = 0.05;
  c.segment_min_seconds = 0.05;
  c.segment_max_seconds = 0.1;
  c.batch_size = 2;
  c.total_steps = 1;
  c.tokenizer_steps = 10;
  c.seed = seed;
  harness::train_to_dir(c, train::read_manifest(toy("manifest.tsv")), dir);
  return dir / harness::kCheckpointFile;
}

}  // namespace

TEST_CASE("cli help, unknown commands and flags") {
  auto h = run({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("anonymize") != std::string::npos);
  CHECK(h.out.find("run-scenario") != std::string::npos);
  CHECK(run({"eval", "--help"}).code == 0);
  auto u = run({"frobnicate"});
  CHECK(u.code == 2);
  CHECK(!u.err.empty());
  CHECK(run({}).code == 2);
  CHECK(run({"eval", "eer", "--trials", "x.tsv", "--bogus"}).code == 2);
  CHECK(run({"anonymize", "--alpha", "2", "--ckpt", "x", "--manifest", "m", "--out", "o"}).code == 2);
  CHECK(run({"eval"}).code == 2);
}

TEST_CASE("cli eval eer on the committed fixture") {
  // The fixture's expected value was produced by the brute-force oracle;
  // recompute it here so a stale fixture is caught as well.
  std::ifstream expected_file(testing::source_dir() / "data" / "fixtures" / "eer_expected.txt");
  double expected = 0, expected_threshold = 0;
  expected_file >> expected >> expected_threshold;
  auto trials = metrics::read_trials(testing::source_dir() / "data" / "fixtures" / "eer_trials.tsv");
  std::vector<double> t, n;
  for (const auto& x : trials) (x.is_target ? t : n).push_back(x.score);
  CHECK(oracle::eer(t, n).eer == expected);

  auto out = testing::temp_dir("cli_eer");
  auto r = run({"eval", "eer", "--trials", (testing::source_dir() / "data/fixtures/eer_trials.tsv").string(), "--out",
                out.string()});
  REQUIRE(r.code == 0);
  double printed = 0;
  std::sscanf(r.out.c_str(), "EER %lf", &printed);
  CHECK(printed == doctest::Approx(expected).epsilon(1e-5));
  auto j = nlohmann::json::parse(io::read_text(out / "run.json"));
  CHECK(j["command"] == "eval eer");
  CHECK(std::abs(j["results"]["eer"].get<double>() - expected) <= 1e-12);
  CHECK(j.contains("config_hash"));
  CHECK(j.contains("checkpoint_hash"));
  CHECK(j.contains("seed"));

  auto missing = run({"eval", "eer", "--trials", (out / "nope.tsv").string(), "--out", out.string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("musa: error:") == 0);
}

TEST_CASE("cli eval wer and pitch") {
  auto dir = testing::temp_dir("cli_wer");
  { std::ofstream(dir / "ref.txt") << "u1 the cat sat\nu2 on the mat\n"; }
  { std::ofstream(dir / "hyp.txt") << "u1 the bat sat\n"; }
  auto r = run({"eval", "wer", "--ref", (dir / "ref.txt").string(), "--hyp", (dir / "hyp.txt").string(), "--out",
                dir.string()});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(io::read_text(dir / "run.json"));
  CHECK(j["results"]["substitutions"] == 1);
  CHECK(j["results"]["deletions"] == 3);
  CHECK(j["results"]["wer"].get<double>() == doctest::Approx(4.0 / 6.0));
  auto c = harness::corpus_wer({{"a", "ab c"}}, {{"a", "abd"}}, true);
  CHECK(c.ref_length == 3);
  CHECK(c.errors() == 1);
  CHECK(run({"eval", "wer", "--ref", "a", "--hyp", "b", "--unit", "syllable"}).code == 2);

  auto wav = toy("spk_a_0.wav").string();
  auto p = run({"eval", "pitch", "--a", wav, "--b", wav, "--out", dir.string()});
  REQUIRE(p.code == 0);
  CHECK(nlohmann::json::parse(io::read_text(dir / "run.json"))["results"]["pitch_correlation"] == 1.0);
}

TEST_CASE("codes file round trip and guards") {
  model::CodeSequence c;
  c.codebook_size = 1024;
  c.codes.resize(8, 5);
  testing::Gen g(2);
  for (Eigen::Index i = 0; i < c.codes.size(); ++i) c.codes.data()[i] = static_cast<int>(g.integer(0, 1023));
  auto dir = testing::temp_dir("codes");
  harness::write_codes(c, dir / "x.codes");
  auto bytes = io::read_file(dir / "x.codes");
  CHECK(bytes.size() == 12 + 2 * 8 * 5);
  // row-major: second value is layer 0, frame 1
  CHECK((static_cast<unsigned char>(bytes[14]) | (static_cast<unsigned char>(bytes[15]) << 8)) == c.codes(0, 1));
  auto back = harness::read_codes(dir / "x.codes");
  CHECK(back.codebook_size == 1024);
  CHECK(back.codes == c.codes);
  bytes.pop_back();
  io::write_file_atomic(dir / "y.codes", bytes);
  CHECK_THROWS_AS(harness::read_codes(dir / "y.codes"), io::FormatError);
}

TEST_CASE("config loading honours MUSA_SEED and overrides") {
  ::setenv("MUSA_SEED", "77", 1);
  CHECK(harness::load_config(std::nullopt, {}).seed == 77);
  CHECK(harness::load_config(std::nullopt, {"train.seed=5"}).seed == 5);
  ::unsetenv("MUSA_SEED");
  CHECK(harness::load_config(std::nullopt, {}).seed == 0);
  CHECK(harness::config_hash(harness::load_config(std::nullopt, {})) ==
        harness::config_hash(train::TrainingConfig{}));
  CHECK(harness::config_hash(harness::load_config(std::nullopt, {"train.lambda_sem=0"})) !=
        harness::config_hash(train::TrainingConfig{}));
}

TEST_CASE("train through the cli, resume and extend") {
  auto base = testing::temp_dir("cli_train");
  std::vector<std::string> common{"--manifest", toy("manifest.tsv").string(), "--set", "model.profile=tiny",
                                  "--set", "train.crop_seconds=0.05", "--set", "train.segment_min_seconds=0.05",
                                  "--set", "train.segment_max_seconds=0.1", "--set", "train.batch_size=2",
                                  "--set", "teacher.tokenizer_steps=10", "--set", "train.seed=3"};
  auto args = [&](const fs::path& out, std::vector<std::string> extra) {
    std::vector<std::string> a{"train", "--out", out.string()};
    a.insert(a.end(), common.begin(), common.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  REQUIRE(run(args(base / "straight", {"--steps", "4"})).code == 0);
  REQUIRE(run(args(base / "resumed", {"--steps", "2"})).code == 0);
  auto r = run(args(base / "resumed", {"--steps", "4", "--resume"}));
  REQUIRE(r.code == 0);
  CHECK(r.err.find("resuming from step 2") != std::string::npos);
  CHECK(io::read_file(base / "straight" / "checkpoint.ckpt") == io::read_file(base / "resumed" / "checkpoint.ckpt"));
  CHECK(io::read_text(base / "straight" / "loss.csv") == io::read_text(base / "resumed" / "loss.csv"));
  CHECK(io::read_text(base / "straight" / "speakers.tsv") == "0\tspk_a\n1\tspk_b\n");
  auto j = nlohmann::json::parse(io::read_text(base / "straight" / "run.json"));
  CHECK(j["seed"] == 3);
  CHECK(j["checkpoint_hash"] == io::file_hash(base / "straight" / "checkpoint.ckpt"));
  CHECK(train::read_config(base / "straight" / "config.ini").total_steps == 4);

  auto plot = run({"plot", "loss", "--log", (base / "straight" / "loss.csv").string(), "--out", (base / "plot").string()});
  REQUIRE(plot.code == 0);
  CHECK(io::read_text(base / "plot" / "loss.svg").find("<polyline") != std::string::npos);
}

TEST_CASE("anonymize and export codes through the cli") {
  auto ckpt = tiny_checkpoint("cli_anon_ckpt", 1);
  auto dir = testing::temp_dir("cli_anon");
  auto a1 = run({"anonymize", "--ckpt", ckpt.string(), "--manifest", toy("manifest.tsv").string(), "--out",
                 (dir / "a").string()});
  REQUIRE(a1.code == 0);
  auto a2 = run({"anonymize", "--ckpt", ckpt.string(), "--manifest", toy("manifest.tsv").string(), "--out",
                 (dir / "b").string(), "--jobs", "4"});
  REQUIRE(a2.code == 0);
  for (const auto& e : train::read_manifest(toy("manifest.tsv")))
    CHECK(io::read_file(dir / "a" / (e.utt_id + ".wav")) == io::read_file(dir / "b" / (e.utt_id + ".wav")));
  auto ja = nlohmann::json::parse(io::read_text(dir / "a" / "run.json"));
  auto jb = nlohmann::json::parse(io::read_text(dir / "b" / "run.json"));
  CHECK(ja["checkpoint_hash"] == jb["checkpoint_hash"]);
  CHECK(ja["config_hash"] == jb["config_hash"]);
  CHECK(nlohmann::json::parse(io::read_text(dir / "a" / "report.json")).size() == 10);

  auto ex = run({"export-codes", "--ckpt", ckpt.string(), "--manifest", toy("manifest.tsv").string(), "--out",
                 (dir / "codes").string()});
  REQUIRE(ex.code == 0);
  auto codes = harness::read_codes(dir / "codes" / "spk_a_0.codes");
  CHECK(codes.layers() == 2);
  CHECK(codes.frames() == 40000 / 4);
}

TEST_CASE("scenarios") {
  const auto manifest = train::read_manifest(toy("manifest.tsv"));
  const auto trials = harness::read_trial_list(toy("trials.tsv"));
  CHECK(trials.size() == 45);
  CHECK_THROWS_AS(harness::run_scenario({}, {}, manifest), std::invalid_argument);
  harness::ScenarioSpec lazy;
  lazy.scenario = harness::Scenario::kLazyInformed;
  CHECK_THROWS_WITH(harness::run_scenario(lazy, trials, manifest), doctest::Contains("second checkpoint"));
  CHECK_THROWS_AS(harness::parse_trial_list("a\tb\tyes\n"), std::invalid_argument);
  CHECK_THROWS_AS(harness::parse_scenario("semi-informed"), std::invalid_argument);

  SUBCASE("ignorant on unprocessed audio separates the toy speakers") {
    auto out = testing::temp_dir("scenario_plain");
    auto r = harness::run_scenario({}, trials, manifest, out);
    CHECK(r.num_target == 20);
    CHECK(r.num_nontarget == 25);
    CHECK(r.eer.eer <= 0.05);
    auto j = nlohmann::json::parse(io::read_text(out / "scenario.json"));
    CHECK(j["scenario"] == "ignorant");
    CHECK(j["eer"].is_number());
    CHECK(j["threshold"].is_number());
    CHECK(metrics::read_trials(out / "scores.tsv").size() == 45);
  }
  SUBCASE("lazy-informed with the evaluated checkpoint is the matched condition") {
    auto ckpt = tiny_checkpoint("scenario_ckpt", 2);
    lazy.checkpoint = ckpt;
    lazy.enrollment_checkpoint = ckpt;
    auto r = harness::run_scenario(lazy, trials, manifest);
    // score both sides by hand: same model, same alpha
    auto m = train::model_from_checkpoint(train::load_checkpoint(ckpt));
    harness::ProbeProvider p;
    std::map<std::string, Eigen::VectorXd> emb;
    std::vector<Eigen::VectorXd> all;
    for (const auto& e : manifest) {
      emb[e.utt_id] = p.embed(anon::anonymize(*m, dsp::load_waveform(e.wav_path), 0.0));
    }
    // the scorer is fitted on enrollment and test embeddings, each utterance once per side
    std::set<std::string> enroll_ids, test_ids;
    for (const auto& t : trials) {
      enroll_ids.insert(t.enroll_id);
      test_ids.insert(t.test_id);
    }
    for (const auto& id : enroll_ids) all.push_back(emb[id]);
    for (const auto& id : test_ids) all.push_back(emb[id]);
    p.fit(all);
    for (std::size_t i = 0; i < trials.size(); ++i)
      CHECK(r.scores[i].score == p.score(emb[trials[i].enroll_id], emb[trials[i].test_id]));
  }
  SUBCASE("cli writes the result files") {
    auto out = testing::temp_dir("scenario_cli");
    auto c = run({"run-scenario", "--trials", toy("trials.tsv").string(), "--manifest", toy("manifest.tsv").string(),
                  "--out", out.string()});
    REQUIRE(c.code == 0);
    auto j = nlohmann::json::parse(io::read_text(out / "run.json"));
    CHECK(j["results"]["scenario"] == "ignorant");
    CHECK(run({"run-scenario", "--scenario", "lazy-informed", "--trials", toy("trials.tsv").string(), "--manifest",
               toy("manifest.tsv").string(), "--out", out.string()})
              .code == 1);
  }
}

TEST_CASE("voice distinctiveness pipeline") {
  std::vector<std::string> spk{"spk_a", "spk_b"};
  std::vector<std::vector<dsp::Waveform>> orig(2);
  for (const auto& e : train::read_manifest(toy("manifest.tsv")))
    orig[e.speaker == "spk_a" ? 0 : 1].push_back(dsp::load_waveform(e.wav_path));
  harness::ProbeProvider p;
  auto same = harness::voice_distinctiveness(spk, orig, orig, p);
  CHECK(same.gvd == 0.0);
  CHECK(same.oo.values == same.aa.values);
  CHECK(same.oo.values(0, 0) > same.oo.values(0, 1));

  auto dir = testing::temp_dir("gvd");
  harness::write_voice_distinctiveness(same, dir);
  auto back = harness::read_voice_distinctiveness(dir);
  CHECK(back.oo.values == same.oo.values);
  auto r = run({"eval", "gvd", "--oo", (dir / "m_oo.csv").string(), "--aa", (dir / "m_aa.csv").string(), "--out",
                dir.string()});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(io::read_text(dir / "run.json"))["results"]["gvd"] == 0.0);
  auto plot = run({"plot", "gvd-matrix", "--dir", dir.string(), "--out", dir.string()});
  REQUIRE(plot.code == 0);
  const auto svg = io::read_text(dir / "gvd_matrix.svg");
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("A:spk_b") != std::string::npos);
}
