// train/config.cc

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

#include "musa/train/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "musa/io/files.hpp"

namespace musa::train {

namespace {

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
  return out;
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(to_int(key, item)));
  if (out.empty()) throw ConfigError("config: " + key + " expects a comma-separated list");
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

struct Field {
  std::function<void(TrainingConfig&, const std::string&)> set;
  std::function<std::string(const TrainingConfig&)> get;
};

#define MUSA_DOUBLE(key, member)                                                           \
  {                                                                                        \
    key, {                                                                                 \
      [](TrainingConfig& c, const std::string& v) { c.member = to_double(key, v); },      \
          [](const TrainingConfig& c) { return format_double(c.member); }                  \
    }                                                                                      \
  }
#define MUSA_INT(key, member, type)                                                            \
  {                                                                                            \
    key, {                                                                                     \
      [](TrainingConfig& c, const std::string& v) { c.member = static_cast<type>(to_int(key, v)); }, \
          [](const TrainingConfig& c) { return std::to_string(c.member); }                     \
    }                                                                                          \
  }

// Every key except model.profile, which is handled first.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      MUSA_DOUBLE("train.lambda_rec", weights.rec),
      MUSA_DOUBLE("train.lambda_adv", weights.adv),
      MUSA_DOUBLE("train.lambda_fm", weights.fm),
      MUSA_DOUBLE("train.lambda_com", weights.com),
      MUSA_DOUBLE("train.lambda_spk", weights.spk),
      MUSA_DOUBLE("train.lambda_sem", weights.sem),
      MUSA_DOUBLE("train.beta1", beta1),
      MUSA_DOUBLE("train.beta2", beta2),
      MUSA_DOUBLE("train.weight_decay", weight_decay),
      MUSA_DOUBLE("train.initial_lr", initial_lr),
      MUSA_DOUBLE("train.lr_decay", lr_decay),
      MUSA_DOUBLE("train.grad_clip", grad_clip),
      MUSA_INT("train.total_steps", total_steps, std::int64_t),
      MUSA_INT("train.batch_size", batch_size, int),
      {"train.seed",
       {[](TrainingConfig& c, const std::string& v) {
          std::uint64_t s = 0;
          auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), s);
          if (ec != std::errc() || p != v.data() + v.size())
            throw ConfigError("config: train.seed expects a non-negative integer, got '" + v + "'");
          c.seed = s;
        },
        [](const TrainingConfig& c) { return std::to_string(c.seed); }}},
      MUSA_DOUBLE("train.crop_seconds", crop_seconds),
      MUSA_DOUBLE("train.segment_min_seconds", segment_min_seconds),
      MUSA_DOUBLE("train.segment_max_seconds", segment_max_seconds),
      MUSA_DOUBLE("train.ema_decay", ema_decay),
      MUSA_INT("train.dead_code_steps", dead_code_steps, int),
      MUSA_INT("train.init_utterances", init_utterances, int),
      MUSA_INT("train.checkpoint_every", checkpoint_every, std::int64_t),
      MUSA_INT("model.base_channels", model.base_channels, int),
      MUSA_INT("model.latent_dim", model.latent_dim, int),
      {"model.strides",
       {[](TrainingConfig& c, const std::string& v) { c.model.strides = to_int_list("model.strides", v); },
        [](const TrainingConfig& c) { return join(c.model.strides); }}},
      MUSA_INT("model.lstm_layers", model.lstm_layers, int),
      MUSA_INT("model.num_quantizers", model.num_quantizers, int),
      MUSA_INT("model.codebook_size", model.codebook_size, int),
      MUSA_INT("model.speaker_channels", model.speaker_channels, int),
      MUSA_INT("model.disc_channels", model.disc_channels, int),
      {"model.stft_scales",
       {[](TrainingConfig& c, const std::string& v) { c.model.stft_scales = to_int_list("model.stft_scales", v); },
        [](const TrainingConfig& c) { return join(c.model.stft_scales); }}},
      {"model.periods",
       {[](TrainingConfig& c, const std::string& v) { c.model.periods = to_int_list("model.periods", v); },
        [](const TrainingConfig& c) { return join(c.model.periods); }}},
      MUSA_INT("model.msd_scales", model.msd_scales, int),
      MUSA_INT("model.mel_n_fft", model.mel.n_fft, int),
      MUSA_INT("model.mel_hop", model.mel.hop, int),
      MUSA_INT("model.mel_bins", model.mel.n_mels, int),
      {"teacher.tokenizer",
       {[](TrainingConfig& c, const std::string& v) { c.tokenizer_path = v; },
        [](const TrainingConfig& c) { return c.tokenizer_path; }}},
      MUSA_INT("teacher.tokenizer_steps", tokenizer_steps, int),
  };
  return f;
}

#undef MUSA_DOUBLE
#undef MUSA_INT

void set_field(TrainingConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

void set_profile(TrainingConfig& cfg, const std::string& name) {
  cfg.profile = name;
  cfg.model = profile_config(name);
}

}  // namespace

model::ModelConfig profile_config(const std::string& name) {
  if (name == "paper") return model::ModelConfig::paper();
  if (name == "toy") return model::ModelConfig::toy();
  if (name == "tiny") return model::ModelConfig::tiny();
  throw ConfigError("config: unknown model profile '" + name + "' (expected paper, toy or tiny)");
}

double TrainingConfig::lr(std::int64_t epoch) const {
  return initial_lr * std::pow(lr_decay, static_cast<double>(epoch));
}

void TrainingConfig::validate() const {
  for (Term t : kAllTerms) {
    const double l = weight(weights, t);
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError(std::string("config: lambda_") + term_name(t) + " must be >= 0");
  }
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("config: lr_decay must lie in (0, 1]");
  if (!(initial_lr > 0.0)) throw ConfigError("config: initial_lr must be positive");
  if (batch_size <= 0) throw ConfigError("config: batch_size must be positive");
  if (total_steps < 0) throw ConfigError("config: total_steps must be >= 0");
  if (!(crop_seconds > 0.0)) throw ConfigError("config: crop_seconds must be positive");
  if (!(segment_min_seconds > 0.0 && segment_min_seconds <= segment_max_seconds))
    throw ConfigError("config: need 0 < segment_min_seconds <= segment_max_seconds");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ConfigError("config: ema_decay must lie in [0, 1)");
  if (model.latent_dim <= 0 || model.codebook_size <= 0 || model.num_quantizers <= 0 || model.strides.empty())
    throw ConfigError("config: model sizes must be positive");
}

TrainingConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  TrainingConfig cfg;
  if (auto p = tree.get_optional<std::string>("model.profile")) set_profile(cfg, *p);
  for (const auto& [section, entries] : tree) {
    if (entries.empty() && !entries.data().empty())
      throw ConfigError("config: key '" + section + "' must appear inside a [section]");
    for (const auto& [key, value] : entries) {
      const std::string full = section + "." + key;
      if (full == "model.profile") continue;
      set_field(cfg, full, value.data());
    }
  }
  cfg.validate();
  return cfg;
}

TrainingConfig read_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

void apply_override(TrainingConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not section.key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  if (key == "model.profile") {
    set_profile(cfg, value);
  } else {
    set_field(cfg, key, value);
  }
  cfg.validate();
}

std::string to_text(const TrainingConfig& cfg) {
  std::string out;
  std::string section;
  auto emit = [&](const std::string& key, const std::string& value) {
    const auto dot = key.find('.');
    const std::string s = key.substr(0, dot);
    if (s != section) {
      out += (section.empty() ? "" : "\n") + ("[" + s + "]\n");
      section = s;
    }
    out += key.substr(dot + 1) + " = " + value + "\n";
  };
  bool profile_done = false;
  for (const auto& [name, field] : fields()) {
    if (!profile_done && name.rfind("model.", 0) == 0) {
      emit("model.profile", cfg.profile);
      profile_done = true;
    }
    emit(name, field.get(cfg));
  }
  return out;
}

}  // namespace musa::train
