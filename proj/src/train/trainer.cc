// train/trainer.cc

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

#include "musa/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "musa/io/matrix_io.hpp"

namespace musa::train {

namespace {

constexpr std::string_view kCheckpointMagic = "MUSACKPT";

// Independent stream for (seed, a, b, purpose).
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint32_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32), purpose};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint32_t { kPermutation = 1, kExample = 2, kReseed = 3, kInit = 4 };

void write_tensors(io::ByteWriter& w, const std::vector<std::pair<std::string, Eigen::MatrixXf>>& t) {
  w.u32(static_cast<std::uint32_t>(t.size()));
  for (const auto& [name, m] : t) {
    w.str(name);
    io::write_matrix(w, m);
  }
}

std::vector<std::pair<std::string, Eigen::MatrixXf>> read_tensors(io::ByteReader& r) {
  std::vector<std::pair<std::string, Eigen::MatrixXf>> t(r.u32());
  for (auto& [name, m] : t) {
    name = r.str();
    m = io::read_matrix<float>(r);
  }
  return t;
}

void write_list(io::ByteWriter& w, const std::vector<Eigen::MatrixXf>& v) {
  w.u32(static_cast<std::uint32_t>(v.size()));
  for (const auto& m : v) io::write_matrix(w, m);
}

std::vector<Eigen::MatrixXf> read_list(io::ByteReader& r) {
  std::vector<Eigen::MatrixXf> v(r.u32());
  for (auto& m : v) m = io::read_matrix<float>(r);
  return v;
}

std::vector<std::pair<std::string, Eigen::MatrixXf>> capture(const ad::ParameterStore<float>& store) {
  std::vector<std::pair<std::string, Eigen::MatrixXf>> out;
  for (const auto& [name, v] : store.entries()) out.emplace_back(name, v.value());
  return out;
}

void restore(ad::ParameterStore<float>& store, const std::vector<std::pair<std::string, Eigen::MatrixXf>>& saved,
             const char* what) {
  const auto& entries = store.entries();
  if (entries.size() != saved.size()) {
    throw io::FormatError(std::string("checkpoint: ") + what + " has " + std::to_string(saved.size()) +
                          " tensors, the configured model has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < saved.size(); ++i) {
    auto v = entries[i].second;
    if (entries[i].first != saved[i].first || v.rows() != saved[i].second.rows() ||
        v.cols() != saved[i].second.cols()) {
      throw io::FormatError(std::string("checkpoint: tensor ") + saved[i].first + " does not match the model");
    }
    v.mutable_value() = saved[i].second;
  }
}

void restore_moments(ad::AdamW<float>& opt, std::int64_t steps, const std::vector<Eigen::MatrixXf>& m,
                     const std::vector<Eigen::MatrixXf>& v) {
  if (m.size() != opt.first_moments().size() || v.size() != opt.second_moments().size())
    throw io::FormatError("checkpoint: optimiser state does not match the model");
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m[i].rows() != opt.first_moments()[i].rows() || m[i].cols() != opt.first_moments()[i].cols() ||
        v[i].rows() != m[i].rows() || v[i].cols() != m[i].cols())
      throw io::FormatError("checkpoint: optimiser moment shape mismatch");
    opt.first_moments()[i] = m[i];
    opt.second_moments()[i] = v[i];
  }
  opt.set_steps(steps);
}

ad::AdamWOptions adam_options(const TrainingConfig& c) { return {c.beta1, c.beta2, 1e-8, c.weight_decay, c.grad_clip}; }

}  // namespace

double StepLog::get(const std::string& name) const {
  for (const auto& [n, v] : values) {
    if (n == name) return v;
  }
  throw std::out_of_range("step log has no value " + name);
}

// ------------------------------------------------------------ checkpoints

std::vector<char> serialize_checkpoint(const Checkpoint& c) {
  io::ByteWriter w;
  w.str(c.config_text);
  w.u32(static_cast<std::uint32_t>(c.speakers.size()));
  for (const auto& s : c.speakers) w.str(s);
  w.str(c.label_hash);
  w.i64(c.step);
  write_tensors(w, c.generator);
  write_tensors(w, c.discriminator);
  const auto& b = c.bank;
  w.u32(static_cast<std::uint32_t>(b.num_layers));
  w.u32(static_cast<std::uint32_t>(b.codebook_size));
  w.u32(static_cast<std::uint32_t>(b.dim));
  w.u8(b.initialized ? 1 : 0);
  for (const auto& book : b.books) {
    io::write_matrix(w, book.vectors);
    io::write_matrix(w, book.ema_count);
    io::write_matrix(w, book.ema_sum);
    w.u64(book.last_used.size());
    for (auto t : book.last_used) w.i64(t);
  }
  w.i64(c.g_opt_steps);
  w.i64(c.d_opt_steps);
  write_list(w, c.g_m);
  write_list(w, c.g_v);
  write_list(w, c.d_m);
  write_list(w, c.d_v);
  const auto tok = teacher::serialize_tokenizer(c.tokenizer);
  w.u64(tok.size());
  w.raw(tok);
  return io::seal(kCheckpointMagic, kCheckpointVersion, w.buffer());
}

Checkpoint deserialize_checkpoint(const std::vector<char>& bytes) {
  const auto payload = io::unseal(kCheckpointMagic, kCheckpointVersion, bytes, "checkpoint");
  io::ByteReader r(payload);
  Checkpoint c;
  c.config_text = r.str();
  c.speakers.resize(r.u32());
  for (auto& s : c.speakers) s = r.str();
  c.label_hash = r.str();
  c.step = r.i64();
  c.generator = read_tensors(r);
  c.discriminator = read_tensors(r);
  const int layers = static_cast<int>(r.u32());
  const int k = static_cast<int>(r.u32());
  const int d = static_cast<int>(r.u32());
  c.bank = model::QuantizerBank<float>(layers, k, d);
  c.bank.initialized = r.u8() != 0;
  for (auto& book : c.bank.books) {
    book.vectors = io::read_matrix<float>(r);
    book.ema_count = io::read_matrix<float>(r);
    book.ema_sum = io::read_matrix<float>(r);
    book.last_used.resize(r.u64());
    for (auto& t : book.last_used) t = r.i64();
    if (book.vectors.rows() != d || book.vectors.cols() != k || book.ema_count.size() != k ||
        book.ema_sum.rows() != d || book.ema_sum.cols() != k || static_cast<int>(book.last_used.size()) != k)
      throw io::FormatError("checkpoint: codebook shape mismatch");
  }
  c.g_opt_steps = r.i64();
  c.d_opt_steps = r.i64();
  c.g_m = read_list(r);
  c.g_v = read_list(r);
  c.d_m = read_list(r);
  c.d_v = read_list(r);
  const auto n = r.u64();
  auto tok = r.raw(n);
  c.tokenizer = teacher::deserialize_tokenizer(std::vector<char>(tok.begin(), tok.end()));
  if (r.remaining() != 0) throw io::FormatError("checkpoint: trailing bytes");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(io::read_file(path)); }

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& c) {
  auto cfg = c.config();
  cfg.model.num_speakers = std::max<int>(1, static_cast<int>(c.speakers.size()));
  auto m = std::make_unique<Model>(cfg.model, cfg.seed);
  restore(m->generator, c.generator, "generator");
  restore(m->discriminator, c.discriminator, "discriminator");
  if (c.bank.num_layers != m->bank.num_layers || c.bank.codebook_size != m->bank.codebook_size ||
      c.bank.dim != m->bank.dim)
    throw io::FormatError("checkpoint: quantizer bank does not match the model");
  m->bank = c.bank;
  return m;
}

// ------------------------------------------------------------------ data

std::vector<teacher::TeacherFeatureSequence> teacher_features(const std::vector<ManifestEntry>& entries) {
  std::vector<teacher::TeacherFeatureSequence> out;
  for (const auto& e : entries) out.push_back(teacher::synthetic_teacher(dsp::load_waveform(e.wav_path)));
  return out;
}

std::vector<Utterance> load_corpus(const std::vector<ManifestEntry>& entries, const LabelTable& labels,
                                   const teacher::TokenizerState& tokenizer) {
  std::vector<Utterance> out;
  for (const auto& e : entries) {
    Utterance u;
    u.utt_id = e.utt_id;
    u.label = labels.label(e.speaker);
    try {
      u.audio = dsp::load_waveform(e.wav_path);
      u.tokens = teacher::tokenize(teacher::synthetic_teacher(u.audio), tokenizer).tokens;
    } catch (const std::exception& ex) {
      throw dsp::AudioError("utterance " + e.utt_id + ": " + ex.what());
    }
    out.push_back(std::move(u));
  }
  return out;
}

// --------------------------------------------------------------- trainer

Trainer::Trainer(const TrainingConfig& config, const std::vector<ManifestEntry>& manifest) : config_(config) {
  config_.validate();
  if (manifest.empty()) throw ManifestError("training manifest is empty");
  labels_ = LabelTable::from_manifest(manifest);
  if (config_.tokenizer_path.empty()) {
    teacher::TokenizerConfig tc;
    tc.codebook_size = config_.model.codebook_size;
    tc.steps = config_.tokenizer_steps;
    tc.seed = config_.seed;
    tokenizer_ = teacher::train_tokenizer(teacher_features(manifest), tc);
  } else {
    tokenizer_ = teacher::load_tokenizer(config_.tokenizer_path);
  }
  build(manifest);
  init_codebooks();
}

Trainer::Trainer(const Checkpoint& checkpoint, const std::vector<ManifestEntry>& manifest)
    : config_(checkpoint.config()) {
  if (manifest.empty()) throw ManifestError("training manifest is empty");
  labels_ = LabelTable(checkpoint.speakers);
  if (LabelTable::from_manifest(manifest).hash() != checkpoint.label_hash) {
    throw TrainingError("manifest speakers do not match the checkpoint's label table (hash " +
                        LabelTable::from_manifest(manifest).hash() + " vs " + checkpoint.label_hash + ")");
  }
  tokenizer_ = checkpoint.tokenizer;
  build(manifest);
  restore(model_->generator, checkpoint.generator, "generator");
  restore(model_->discriminator, checkpoint.discriminator, "discriminator");
  model_->bank = checkpoint.bank;
  restore_moments(*g_opt_, checkpoint.g_opt_steps, checkpoint.g_m, checkpoint.g_v);
  restore_moments(*d_opt_, checkpoint.d_opt_steps, checkpoint.d_m, checkpoint.d_v);
  step_ = checkpoint.step;
}

void Trainer::build(const std::vector<ManifestEntry>& manifest) {
  if (tokenizer_.codebook_size() != config_.model.codebook_size) {
    throw TrainingError("tokenizer has " + std::to_string(tokenizer_.codebook_size()) +
                        " codes but the first quantizer has " + std::to_string(config_.model.codebook_size));
  }
  config_.model.num_speakers = labels_.size();
  corpus_ = load_corpus(manifest, labels_, tokenizer_);
  const auto min_len = std::max<Eigen::Index>(config_.model.hop(), config_.model.mel.n_fft);
  for (const auto& u : corpus_) {
    if (u.audio.size() < min_len)
      throw dsp::AudioError("utterance " + u.utt_id + " is shorter than " + std::to_string(min_len) + " samples");
  }
  model_ = std::make_unique<Model>(config_.model, config_.seed);
  g_opt_ = std::make_unique<ad::AdamW<float>>(model_->generator, adam_options(config_));
  d_opt_ = std::make_unique<ad::AdamW<float>>(model_->discriminator, adam_options(config_));
}

void Trainer::init_codebooks() {
  ad::NoGradGuard guard;
  const std::size_t n = std::min(corpus_.size(), static_cast<std::size_t>(std::max(1, config_.init_utterances)));
  std::vector<Eigen::MatrixXf> parts;
  Eigen::Index cols = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = corpus_[i];
    auto frames = model_->encoder(model::signal_var<float>(u.audio.samples));
    auto s = model_->speaker_encoder(ad::constant<float>(model::mel_frames<float>(u.audio.samples, config_.model.mel)));
    parts.push_back(frames.value().colwise() - s.value().col(0));
    cols += parts.back().cols();
  }
  Eigen::MatrixXf r1(config_.model.latent_dim, cols);
  cols = 0;
  for (const auto& p : parts) {
    r1.middleCols(cols, p.cols()) = p;
    cols += p.cols();
  }
  auto rng = stream_rng(config_.seed, 0, 0, kInit);
  model::kmeans_init(model_->bank, r1, rng);
}

std::int64_t Trainer::steps_per_epoch() const {
  const auto n = static_cast<std::int64_t>(corpus_.size());
  return (n + config_.batch_size - 1) / config_.batch_size;
}

std::vector<std::size_t> Trainer::batch_indices(std::int64_t s) const {
  const std::int64_t spe = steps_per_epoch();
  const auto epoch = static_cast<std::uint64_t>(s / spe);
  const std::int64_t pos = s % spe;
  std::vector<std::size_t> perm(corpus_.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = stream_rng(config_.seed, epoch, 0, kPermutation);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::size_t> out;
  for (int j = 0; j < config_.batch_size; ++j)
    out.push_back(perm[static_cast<std::size_t>(pos * config_.batch_size + j) % perm.size()]);
  return out;
}

TrainingExample<float> Trainer::make_example(const Utterance& u, std::uint64_t stream) const {
  auto rng = stream_rng(config_.seed, static_cast<std::uint64_t>(step_), stream, kExample);
  const Eigen::Index hop = config_.model.hop();
  const Eigen::Index len = u.audio.size();
  const Eigen::Index usable = len / hop * hop;
  const auto wanted = static_cast<Eigen::Index>(std::llround(config_.crop_seconds * dsp::kSampleRate)) / hop * hop;
  const Eigen::Index crop = std::clamp<Eigen::Index>(wanted, hop, usable);
  const Eigen::Index start = hop * std::uniform_int_distribution<Eigen::Index>(0, (usable - crop) / hop)(rng);

  TrainingExample<float> ex;
  ex.audio = u.audio.samples.segment(start, crop).transpose().cast<float>();
  ex.label = u.label;
  std::uniform_real_distribution<double> seconds(config_.segment_min_seconds, config_.segment_max_seconds);
  for (auto* mel : {&ex.mel1, &ex.mel2}) {
    const auto want = static_cast<Eigen::Index>(std::llround(seconds(rng) * dsp::kSampleRate));
    const Eigen::Index seg = std::clamp<Eigen::Index>(want, config_.model.mel.n_fft, len);
    const Eigen::Index s0 = std::uniform_int_distribution<Eigen::Index>(0, len - seg)(rng);
    *mel = model::mel_frames<float>(u.audio.samples.segment(s0, seg), config_.model.mel);
  }
  // Teacher token at the centre of each model frame (teacher rate 50 Hz).
  const Eigen::Index frames = crop / hop;
  const auto teacher_hop = static_cast<Eigen::Index>(std::llround(dsp::kSampleRate / tokenizer_.frame_rate));
  for (Eigen::Index j = 0; j < frames; ++j) {
    const Eigen::Index centre = start + j * hop + hop / 2;
    const auto t = std::min<std::size_t>(static_cast<std::size_t>(centre / teacher_hop), u.tokens.size() - 1);
    ex.tokens.push_back(u.tokens[t]);
  }
  return ex;
}

StepLog Trainer::step() {
  auto& m = *model_;
  const auto& w = config_.weights;
  const int batch = config_.batch_size;
  const float inv = 1.0f / static_cast<float>(batch);
  const double lr = learning_rate();
  const auto items = batch_indices(step_);

  std::vector<TrainingExample<float>> examples;
  for (std::size_t j = 0; j < items.size(); ++j) examples.push_back(make_example(corpus_[items[j]], j));

  // Generator step with the discriminators frozen.
  std::array<double, 6> terms{};
  double rec_time = 0, mel_l1 = 0, mel_l2 = 0, spk_ce = 0, spk_cos = 0, total = 0;
  std::vector<Eigen::MatrixXf> fakes;
  std::vector<model::CodeSequence> codes;
  std::vector<std::vector<Eigen::MatrixXf>> inputs;
  m.discriminator.set_trainable(false);
  m.generator.zero_grad();
  for (const auto& ex : examples) {
    auto f = generator_forward(m, ex, w);
    for (Term t : kAllTerms) {
      if (!f.terms[t]) continue;
      const double v = f.terms[t]->item();
      if (!std::isfinite(v)) {
        m.discriminator.set_trainable(true);
        throw TrainingError(std::string("non-finite loss in term '") + term_name(t) + "' at step " +
                            std::to_string(step_));
      }
      terms[static_cast<std::size_t>(t)] += v / batch;
    }
    total += f.total.item() / batch;
    if (f.rec_time.defined()) {
      rec_time += f.rec_time.item() / batch;
      mel_l1 += f.mel_l1.item() / batch;
      mel_l2 += f.mel_l2.item() / batch;
    }
    if (f.spk_ce.defined()) {
      spk_ce += f.spk_ce.item() / batch;
      spk_cos += f.spk_cos.item() / batch;
    }
    ad::backward(ad::scale(f.total, inv));
    fakes.push_back(f.x_hat.value());
    codes.push_back(std::move(f.codes));
    inputs.push_back(std::move(f.q.inputs));
  }
  m.discriminator.set_trainable(true);
  const double g_norm = g_opt_->step(lr);

  // Discriminator step on the detached generator outputs.
  double d_loss = 0.0, d_norm = 0.0;
  if (w.adv != 0.0 || w.fm != 0.0) {
    m.discriminator.zero_grad();
    for (std::size_t j = 0; j < examples.size(); ++j) {
      auto d = discriminator_forward(m, examples[j].audio, fakes[j]);
      const double v = d.item();
      if (!std::isfinite(v))
        throw TrainingError("non-finite loss in term 'disc' at step " + std::to_string(step_));
      d_loss += v / batch;
      ad::backward(ad::scale(d, inv));
    }
    d_norm = d_opt_->step(lr);
  }

  // EMA codebook update from the residuals seen in this step.
  const int layers = m.bank.num_layers;
  Eigen::Index n = 0;
  for (const auto& c : codes) n += c.frames();
  model::IndexMatrix assign(layers, n);
  std::vector<Eigen::MatrixXf> layer_inputs(static_cast<std::size_t>(layers), Eigen::MatrixXf(m.bank.dim, n));
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < codes.size(); ++j) {
    const Eigen::Index t = codes[j].frames();
    assign.middleCols(at, t) = codes[j].codes;
    for (int i = 0; i < layers; ++i) layer_inputs[static_cast<std::size_t>(i)].middleCols(at, t) = inputs[j][static_cast<std::size_t>(i)];
    at += t;
  }
  model::EmaOptions ema;
  ema.decay = config_.ema_decay;
  ema.dead_code_steps = config_.dead_code_steps;
  auto rng = stream_rng(config_.seed, static_cast<std::uint64_t>(step_), 0, kReseed);
  const int reseeded = model::ema_update(m.bank, assign, layer_inputs, ema, step_ + 1, &rng);

  ++step_;
  StepLog log;
  log.step = step_;
  for (Term t : kAllTerms) {
    if (weight(w, t) != 0.0) log.values.emplace_back(term_name(t), terms[static_cast<std::size_t>(t)]);
  }
  log.values.emplace_back("total", total);
  if (w.adv != 0.0 || w.fm != 0.0) log.values.emplace_back("disc", d_loss);
  if (w.rec != 0.0) {
    log.values.emplace_back("rec_time", rec_time);
    log.values.emplace_back("mel_l1", mel_l1);
    log.values.emplace_back("mel_l2", mel_l2);
    log.values.emplace_back("mel", mel_l1 + mel_l2);
  }
  if (w.spk != 0.0) {
    log.values.emplace_back("spk_ce", spk_ce);
    log.values.emplace_back("spk_cos", spk_cos);
  }
  log.values.emplace_back("lr", lr);
  log.values.emplace_back("g_grad_norm", g_norm);
  log.values.emplace_back("d_grad_norm", d_norm);
  log.values.emplace_back("reseeded", reseeded);
  return log;
}

void Trainer::run(const std::function<void(const StepLog&)>& on_step) {
  while (step_ < config_.total_steps) {
    auto log = step();
    if (on_step) on_step(log);
  }
}

void Trainer::set_total_steps(std::int64_t steps) {
  if (steps < 0) throw std::invalid_argument("total_steps must be non-negative");
  config_.total_steps = steps;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_text = to_text(config_);
  c.speakers = labels_.speakers();
  c.label_hash = labels_.hash();
  c.step = step_;
  c.generator = capture(model_->generator);
  c.discriminator = capture(model_->discriminator);
  c.bank = model_->bank;
  c.g_opt_steps = g_opt_->steps();
  c.d_opt_steps = d_opt_->steps();
  c.g_m = g_opt_->first_moments();
  c.g_v = g_opt_->second_moments();
  c.d_m = d_opt_->first_moments();
  c.d_v = d_opt_->second_moments();
  c.tokenizer = tokenizer_;
  return c;
}

// -------------------------------------------------------------- loss log

LossLog::LossLog(const std::filesystem::path& path, bool append) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!append || !std::filesystem::exists(path)) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,term,value\n";
  }
}

void LossLog::write(const StepLog& log) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path_.string());
  out.precision(17);
  for (const auto& [name, v] : log.values) out << log.step << ',' << name << ',' << v << '\n';
}

std::vector<StepLog> read_loss_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "step,term,value") throw std::runtime_error(path.string() + ": not a loss log");
  std::vector<StepLog> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || a == b) throw std::runtime_error(path.string() + ": malformed row " + line);
    const std::int64_t s = std::stoll(line.substr(0, a));
    if (out.empty() || out.back().step != s) out.push_back({s, {}});
    out.back().values.emplace_back(line.substr(a + 1, b - a - 1), std::stod(line.substr(b + 1)));
  }
  return out;
}

}  // namespace musa::train
