// musa/teacher/teacher.hpp

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

#ifndef MUSA_TEACHER_TEACHER_HPP_
#define MUSA_TEACHER_TEACHER_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "musa/dsp/audio.hpp"

namespace musa::teacher {

/// D x F teacher features of one utterance.
struct TeacherFeatureSequence {
  Eigen::MatrixXd features;
  double frame_rate = 50.0;

  Eigen::Index dim() const { return features.rows(); }
  Eigen::Index frames() const { return features.cols(); }
};

struct TokenSequence {
  std::vector<int> tokens;
  double frame_rate = 50.0;
};

/// Deterministic stand-in for a pre-trained speech model: 16 banded log-mel
/// averages plus their first differences, one frame per 320 samples.
inline constexpr int kSyntheticDim = 32;
TeacherFeatureSequence synthetic_teacher(const dsp::Waveform& w);

/// Single-quantizer codec: z = W_down x + b_down, nearest codeword c_k,
/// x_hat = W_up c_k + b_up.
struct TokenizerState {
  Eigen::MatrixXd down;      // m x D
  Eigen::VectorXd down_bias;
  Eigen::MatrixXd codebook;  // m x K
  Eigen::MatrixXd up;        // D x m
  Eigen::VectorXd up_bias;
  double frame_rate = 50.0;

  /// Identity projections around a given codebook (D x K).
  static TokenizerState identity(const Eigen::MatrixXd& codebook);
  int codebook_size() const { return static_cast<int>(codebook.cols()); }
  Eigen::Index feature_dim() const { return down.cols(); }
};

TokenSequence tokenize(const TeacherFeatureSequence& f, const TokenizerState& state);
Eigen::MatrixXd reconstruct(const TeacherFeatureSequence& f, const TokenizerState& state);
/// Mean squared error per element over every frame of the corpus.
double reconstruction_mse(const std::vector<TeacherFeatureSequence>& corpus, const TokenizerState& state);

struct TokenizerConfig {
  int codebook_size = 1024;
  int steps = 300;
  int batch_frames = 256;
  double learning_rate = 1e-3;
  double commitment = 0.25;
  double ema_decay = 0.99;
  double validation_fraction = 0.0;  // 0: select on the training frames
  int kmeans_iterations = 100;
  int kmeans_restarts = 16;
  int eval_every = 25;
  std::uint64_t seed = 0;
};

struct TokenizerReport {
  double initial_validation_mse = 0.0;
  double best_validation_mse = 0.0;
  int best_step = 0;
};

/// Trains the codec to reconstruct teacher features. The codebook starts
/// from k-means on the training frames with identity projections; the state
/// with the lowest validation error (including the starting point) is
/// returned.
TokenizerState train_tokenizer(const std::vector<TeacherFeatureSequence>& corpus, const TokenizerConfig& config,
                               TokenizerReport* report = nullptr);

void save_tokenizer(const TokenizerState& state, const std::filesystem::path& path);
TokenizerState load_tokenizer(const std::filesystem::path& path);
std::vector<char> serialize_tokenizer(const TokenizerState& state);
TokenizerState deserialize_tokenizer(const std::vector<char>& bytes);

/// Precomputed features: `manifest.json` listing {utt_id, dim, frames,
/// frame_rate, path} and one little-endian float32 file per utterance,
/// frame-major (the D values of a frame are contiguous).
struct FeatureEntry {
  std::string utt_id;
  TeacherFeatureSequence features;
};
void write_feature_dir(const std::filesystem::path& dir, const std::vector<FeatureEntry>& entries);
std::vector<FeatureEntry> read_feature_dir(const std::filesystem::path& dir);

}  // namespace musa::teacher

#endif  // MUSA_TEACHER_TEACHER_HPP_
