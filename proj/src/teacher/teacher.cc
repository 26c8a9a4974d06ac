// teacher/teacher.cc

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

#include "musa/teacher/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "musa/ad/layers.hpp"
#include "musa/ad/optim.hpp"
#include "musa/io/matrix_io.hpp"
#include "musa/model/rvq.hpp"

namespace musa::teacher {

namespace {

constexpr int kHop = 320;
constexpr int kWindow = 512;
constexpr int kBands = 16;
constexpr int kMelsPerBand = 5;
constexpr std::string_view kTokenizerMagic = "MUSATOKN";
constexpr std::uint32_t kTokenizerVersion = 1;

void check_dim(const TeacherFeatureSequence& f, const TokenizerState& s) {
  if (f.dim() != s.feature_dim()) {
    throw std::invalid_argument("tokenizer expects " + std::to_string(s.feature_dim()) + "-dim features, got " +
                                std::to_string(f.dim()));
  }
}

Eigen::MatrixXd bottleneck(const Eigen::MatrixXd& x, const TokenizerState& s) {
  return (s.down * x).colwise() + s.down_bias;
}

}  // namespace

TeacherFeatureSequence synthetic_teacher(const dsp::Waveform& w) {
  const Eigen::Index frames = w.size() / kHop;
  if (frames == 0) throw dsp::AudioError("synthetic_teacher: audio shorter than one 20 ms frame");
  // Windows of 512 samples centred on each 320-sample frame.
  const Eigen::Index offset = (kWindow - kHop) / 2;
  Eigen::VectorXd padded = Eigen::VectorXd::Zero((frames - 1) * kHop + kWindow);
  const Eigen::Index n = std::min<Eigen::Index>(w.size(), padded.size() - offset);
  padded.segment(offset, n) = w.samples.head(n);
  dsp::MelConfig mel;
  mel.n_fft = kWindow;
  mel.hop = kHop;
  mel.n_mels = kBands * kMelsPerBand;
  const Eigen::MatrixXd lm = dsp::log_mel(padded, mel);

  TeacherFeatureSequence out;
  out.features.resize(kSyntheticDim, frames);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int b = 0; b < kBands; ++b) out.features(b, t) = lm.col(t).segment(b * kMelsPerBand, kMelsPerBand).mean();
  }
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index prev = std::max<Eigen::Index>(0, t - 1), next = std::min(frames - 1, t + 1);
    out.features.col(t).tail(kBands) =
        0.5 * (out.features.col(next).head(kBands) - out.features.col(prev).head(kBands));
  }
  return out;
}

TokenizerState TokenizerState::identity(const Eigen::MatrixXd& codebook) {
  const Eigen::Index d = codebook.rows();
  TokenizerState s;
  s.down = Eigen::MatrixXd::Identity(d, d);
  s.down_bias = Eigen::VectorXd::Zero(d);
  s.codebook = codebook;
  s.up = Eigen::MatrixXd::Identity(d, d);
  s.up_bias = Eigen::VectorXd::Zero(d);
  return s;
}

TokenSequence tokenize(const TeacherFeatureSequence& f, const TokenizerState& state) {
  check_dim(f, state);
  return {model::nearest_codes<double>(state.codebook, bottleneck(f.features, state)), state.frame_rate};
}

Eigen::MatrixXd reconstruct(const TeacherFeatureSequence& f, const TokenizerState& state) {
  const auto tok = tokenize(f, state);
  Eigen::MatrixXd q(state.codebook.rows(), f.frames());
  for (Eigen::Index t = 0; t < f.frames(); ++t) q.col(t) = state.codebook.col(tok.tokens[static_cast<std::size_t>(t)]);
  return (state.up * q).colwise() + state.up_bias;
}

double reconstruction_mse(const std::vector<TeacherFeatureSequence>& corpus, const TokenizerState& state) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto& f : corpus) {
    sum += (reconstruct(f, state) - f.features).squaredNorm();
    count += static_cast<double>(f.features.size());
  }
  if (count == 0.0) throw std::invalid_argument("reconstruction_mse: empty corpus");
  return sum / count;
}

TokenizerState train_tokenizer(const std::vector<TeacherFeatureSequence>& corpus, const TokenizerConfig& config,
                               TokenizerReport* report) {
  if (corpus.empty()) throw std::invalid_argument("train_tokenizer: empty corpus");
  if (config.codebook_size <= 0) throw std::invalid_argument("train_tokenizer: codebook size must be positive");
  const Eigen::Index dim = corpus.front().dim();
  Eigen::Index total = 0;
  for (const auto& f : corpus) {
    if (f.dim() != dim) throw std::invalid_argument("train_tokenizer: inconsistent feature dimensions");
    if (!f.features.allFinite()) throw std::invalid_argument("train_tokenizer: non-finite features");
    total += f.frames();
  }
  Eigen::MatrixXd all(dim, total);
  Eigen::Index at = 0;
  for (const auto& f : corpus) {
    all.middleCols(at, f.frames()) = f.features;
    at += f.frames();
  }

  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(total));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<Eigen::Index>(std::floor(config.validation_fraction * static_cast<double>(total)));
  const Eigen::Index n_train = total - n_val;
  if (n_train < config.codebook_size) {
    throw std::invalid_argument("train_tokenizer: " + std::to_string(n_train) +
                                " training frames is too few for a codebook of " +
                                std::to_string(config.codebook_size));
  }
  Eigen::MatrixXd train(dim, n_train), val(dim, n_val);
  for (Eigen::Index i = 0; i < n_train; ++i) train.col(i) = all.col(order[static_cast<std::size_t>(i)]);
  for (Eigen::Index i = 0; i < n_val; ++i) val.col(i) = all.col(order[static_cast<std::size_t>(n_train + i)]);
  const std::vector<TeacherFeatureSequence> held_out{{n_val > 0 ? val : train, corpus.front().frame_rate}};

  // Best of several k-means++ restarts by training error.
  Eigen::MatrixXd centres;
  double centres_mse = INFINITY;
  for (int r = 0; r < std::max(1, config.kmeans_restarts); ++r) {
    auto c = model::kmeans<double>(train, config.codebook_size, config.kmeans_iterations, rng);
    const double mse = reconstruction_mse({{train, 50.0}}, TokenizerState::identity(c));
    if (mse < centres_mse) {
      centres_mse = mse;
      centres = std::move(c);
    }
  }
  TokenizerState state = TokenizerState::identity(centres);
  state.frame_rate = corpus.front().frame_rate;
  TokenizerState best = state;
  double best_mse = reconstruction_mse(held_out, state);
  int best_step = 0;
  if (report != nullptr) report->initial_validation_mse = best_mse;

  ad::ParameterStore<double> store;
  auto down = store.add("down", state.down);
  auto down_bias = store.add("down_bias", state.down_bias);
  auto up = store.add("up", state.up);
  auto up_bias = store.add("up_bias", state.up_bias);
  ad::AdamW<double> opt(store, {0.9, 0.999, 1e-8, 0.0, 0.0});
  model::QuantizerBank<double> bank(1, config.codebook_size, static_cast<int>(dim));
  bank.set_codebook(0, state.codebook);
  bank.initialized = true;
  model::EmaOptions ema;
  ema.decay = config.ema_decay;

  const Eigen::Index batch = std::min<Eigen::Index>(config.batch_frames, n_train);
  std::uniform_int_distribution<Eigen::Index> pick(0, n_train - 1);
  auto snapshot = [&] {
    state.down = down.value();
    state.down_bias = down_bias.value().col(0);
    state.up = up.value();
    state.up_bias = up_bias.value().col(0);
    state.codebook = bank.codebook(0);
  };
  for (int step = 1; step <= config.steps; ++step) {
    Eigen::MatrixXd xb(dim, batch);
    for (Eigen::Index j = 0; j < batch; ++j) xb.col(j) = train.col(pick(rng));
    auto x = ad::constant<double>(xb);
    auto z = ad::add_colwise(ad::matmul(down, x), down_bias);
    const auto codes = model::nearest_codes<double>(bank.codebook(0), z.value());
    Eigen::MatrixXd q(dim, batch);
    model::IndexMatrix assign(1, batch);
    for (Eigen::Index j = 0; j < batch; ++j) {
      assign(0, j) = codes[static_cast<std::size_t>(j)];
      q.col(j) = bank.codebook(0).col(codes[static_cast<std::size_t>(j)]);
    }
    auto x_hat = ad::add_colwise(ad::matmul(up, ad::straight_through(z, q)), up_bias);
    auto loss = ad::add(ad::mse(x_hat, x), ad::scale(ad::mse(z, ad::constant<double>(q)), config.commitment));
    store.zero_grad();
    ad::backward(loss);
    opt.step(config.learning_rate);
    model::ema_update(bank, assign, {z.value()}, ema, step, &rng);
    if (step % config.eval_every == 0 || step == config.steps) {
      snapshot();
      const double mse = reconstruction_mse(held_out, state);
      if (mse < best_mse) {
        best_mse = mse;
        best = state;
        best_step = step;
      }
    }
  }
  if (report != nullptr) {
    report->best_validation_mse = best_mse;
    report->best_step = best_step;
  }
  return best;
}

std::vector<char> serialize_tokenizer(const TokenizerState& s) {
  io::ByteWriter w;
  w.f64(s.frame_rate);
  io::write_matrix(w, s.down);
  io::write_matrix(w, s.down_bias);
  io::write_matrix(w, s.codebook);
  io::write_matrix(w, s.up);
  io::write_matrix(w, s.up_bias);
  return io::seal(kTokenizerMagic, kTokenizerVersion, w.buffer());
}

TokenizerState deserialize_tokenizer(const std::vector<char>& bytes) {
  const auto payload = io::unseal(kTokenizerMagic, kTokenizerVersion, bytes, "tokenizer");
  io::ByteReader r(payload);
  TokenizerState s;
  s.frame_rate = r.f64();
  s.down = io::read_matrix<double>(r);
  s.down_bias = io::read_matrix<double>(r);
  s.codebook = io::read_matrix<double>(r);
  s.up = io::read_matrix<double>(r);
  s.up_bias = io::read_matrix<double>(r);
  const Eigen::Index m = s.codebook.rows(), d = s.down.cols();
  if (s.down.rows() != m || s.down_bias.size() != m || s.up.rows() != d || s.up.cols() != m || s.up_bias.size() != d)
    throw io::FormatError("tokenizer: inconsistent matrix shapes");
  return s;
}

void save_tokenizer(const TokenizerState& state, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_tokenizer(state));
}

TokenizerState load_tokenizer(const std::filesystem::path& path) { return deserialize_tokenizer(io::read_file(path)); }

void write_feature_dir(const std::filesystem::path& dir, const std::vector<FeatureEntry>& entries) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& e : entries) {
    const auto& f = e.features.features;
    io::ByteWriter w;
    for (Eigen::Index t = 0; t < f.cols(); ++t) {
      for (Eigen::Index k = 0; k < f.rows(); ++k) w.f32(static_cast<float>(f(k, t)));
    }
    const std::string name = e.utt_id + ".f32";
    io::write_file_atomic(dir / name, w.buffer());
    manifest.push_back({{"utt_id", e.utt_id},
                        {"dim", f.rows()},
                        {"frames", f.cols()},
                        {"frame_rate", e.features.frame_rate},
                        {"path", name}});
  }
  io::write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<FeatureEntry> read_feature_dir(const std::filesystem::path& dir) {
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  if (!manifest.is_array()) throw io::FormatError("feature manifest must be a JSON array");
  std::vector<FeatureEntry> out;
  for (const auto& item : manifest) {
    FeatureEntry e;
    e.utt_id = item.at("utt_id").get<std::string>();
    const auto dim = item.at("dim").get<Eigen::Index>();
    const auto frames = item.at("frames").get<Eigen::Index>();
    e.features.frame_rate = item.at("frame_rate").get<double>();
    const std::string rel = item.contains("path") ? item.at("path").get<std::string>() : e.utt_id + ".f32";
    const auto bytes = io::read_file(dir / rel);
    if (dim <= 0 || frames <= 0 || bytes.size() != static_cast<std::size_t>(dim * frames) * 4) {
      throw io::FormatError("feature file " + rel + " does not hold " + std::to_string(frames) + " x " +
                            std::to_string(dim) + " float32 values");
    }
    io::ByteReader r(bytes);
    e.features.features.resize(dim, frames);
    for (Eigen::Index t = 0; t < frames; ++t) {
      for (Eigen::Index k = 0; k < dim; ++k) e.features.features(k, t) = r.f32();
    }
    if (!e.features.features.allFinite()) throw io::FormatError("feature file " + rel + " holds non-finite values");
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace musa::teacher
