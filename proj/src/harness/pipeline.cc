// harness/pipeline.cc

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
#include <ostream>

#include "musa/harness/harness.hpp"
#include "musa/io/files.hpp"
#include "musa/io/matrix_io.hpp"

namespace musa::harness {

std::string config_hash(const train::TrainingConfig& cfg) {
  const auto text = train::to_text(cfg);
  return io::hex32(io::crc32(std::span<const char>(text.data(), text.size())));
}

train::TrainingConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  train::TrainingConfig cfg = file ? train::read_config(*file) : train::TrainingConfig{};
  if (const char* env = std::getenv("MUSA_SEED"); env != nullptr && *env != '\0') {
    train::apply_override(cfg, std::string("train.seed=") + env);
  }
  for (const auto& o : overrides) train::apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

void write_run_json(const fs::path& out_dir, const RunInfo& info) {
  nlohmann::ordered_json j;
  j["command"] = info.command;
  j["args"] = info.args;
  j["config_hash"] = info.config_hash;
  j["checkpoint_hash"] = info.checkpoint_hash;
  j["seed"] = info.seed;
  j["results"] = info.results;
  fs::create_directories(out_dir);
  io::write_text_atomic(out_dir / kRunFile, j.dump(2) + "\n");
}

void write_speakers(const train::LabelTable& labels, const fs::path& path) {
  std::string text;
  for (int i = 0; i < labels.size(); ++i) text += std::to_string(i) + "\t" + labels.speakers()[static_cast<std::size_t>(i)] + "\n";
  io::write_text_atomic(path, text);
}

train::Checkpoint train_to_dir(const train::TrainingConfig& cfg, const std::vector<train::ManifestEntry>& manifest,
                               const fs::path& out_dir, const TrainOptions& opts) {
  fs::create_directories(out_dir);
  const auto ckpt_path = out_dir / kCheckpointFile;
  std::unique_ptr<train::Trainer> trainer;
  const bool resuming = opts.resume && fs::exists(ckpt_path);
  if (resuming) {
    auto c = train::load_checkpoint(ckpt_path);
    if (opts.progress) *opts.progress << "resuming from step " << c.step << "\n";
    trainer = std::make_unique<train::Trainer>(c, manifest);
  } else {
    trainer = std::make_unique<train::Trainer>(cfg, manifest);
  }
  if (opts.total_steps) trainer->set_total_steps(*opts.total_steps);
  io::write_text_atomic(out_dir / kConfigFile, train::to_text(trainer->config()));
  write_speakers(trainer->labels(), out_dir / kSpeakersFile);
  train::LossLog log(out_dir / kLossFile, resuming);
  const auto every = trainer->config().checkpoint_every;
  trainer->run([&](const train::StepLog& s) {
    log.write(s);
    if (opts.progress && opts.log_every > 0 && s.step % opts.log_every == 0) {
      *opts.progress << "step " << s.step;
      for (const char* k : {"total", "rec", "mel"}) {
        try {
          *opts.progress << " " << k << "=" << s.get(k);
        } catch (const std::out_of_range&) {
        }
      }
      *opts.progress << "\n";
    }
    if (every > 0 && s.step % every == 0) train::save_checkpoint(trainer->checkpoint(), ckpt_path);
  });
  auto c = trainer->checkpoint();
  train::save_checkpoint(c, ckpt_path);
  return c;
}

teacher::TokenizerState train_tokenizer_from(const std::optional<fs::path>& feature_dir,
                                             const std::optional<fs::path>& manifest,
                                             const teacher::TokenizerConfig& cfg, teacher::TokenizerReport* report) {
  if (feature_dir.has_value() == manifest.has_value())
    throw std::invalid_argument("tokenizer training needs exactly one of a feature directory or a manifest");
  std::vector<teacher::TeacherFeatureSequence> corpus;
  if (feature_dir) {
    for (auto& e : teacher::read_feature_dir(*feature_dir)) corpus.push_back(std::move(e.features));
  } else {
    corpus = train::teacher_features(train::read_manifest(*manifest));
  }
  return teacher::train_tokenizer(corpus, cfg, report);
}

// ------------------------------------------------------------------ codes

void write_codes(const model::CodeSequence& codes, const fs::path& path) {
  if (codes.codebook_size > 65536) throw std::invalid_argument("write_codes: codebook too large for 16-bit indices");
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(codes.layers()));
  w.u32(static_cast<std::uint32_t>(codes.codebook_size));
  w.u32(static_cast<std::uint32_t>(codes.frames()));
  for (int i = 0; i < codes.layers(); ++i)
    for (Eigen::Index t = 0; t < codes.frames(); ++t) w.u16(static_cast<std::uint16_t>(codes.codes(i, t)));
  io::write_file_atomic(path, w.buffer());
}

model::CodeSequence read_codes(const fs::path& path) {
  const auto bytes = io::read_file(path);
  io::ByteReader r(bytes);
  model::CodeSequence c;
  const auto n = r.u32();
  c.codebook_size = static_cast<int>(r.u32());
  const auto t = r.u32();
  if (r.remaining() != 2ull * n * t) throw io::FormatError(path.string() + ": code payload has the wrong size");
  c.codes.resize(n, t);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < t; ++j) {
      const int v = r.u16();
      if (v >= c.codebook_size) throw io::FormatError(path.string() + ": code index out of range");
      c.codes(i, j) = v;
    }
  }
  return c;
}

void export_codes(const anon::Model& m, const std::vector<train::ManifestEntry>& manifest, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  for (const auto& e : manifest) {
    auto a = model::analyze(m, dsp::load_waveform(e.wav_path));
    write_codes(a.codes, out_dir / (e.utt_id + ".codes"));
  }
}

// ------------------------------------------------------------------ providers

Eigen::VectorXd EncoderProvider::embed(const dsp::Waveform& w) const {
  return model::encode_speaker(*model_, w).values.cast<double>();
}

double EncoderProvider::score(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  const double na = a.norm(), nb = b.norm();
  const double cos = na == 0.0 || nb == 0.0 ? 0.0 : a.dot(b) / (na * nb);
  return scale_ * cos + offset_;
}

std::unique_ptr<ScoreProvider> make_provider(const std::string& name, const anon::Model* model) {
  if (name == "probe") return std::make_unique<ProbeProvider>();
  if (name == "encoder") {
    if (model == nullptr) throw std::invalid_argument("the encoder scorer needs a checkpoint");
    return std::make_unique<EncoderProvider>(*model);
  }
  throw std::invalid_argument("unknown scorer '" + name + "' (expected probe or encoder)");
}

}  // namespace musa::harness
