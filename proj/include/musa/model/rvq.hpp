// musa/model/rvq.hpp

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

#ifndef MUSA_MODEL_RVQ_HPP_
#define MUSA_MODEL_RVQ_HPP_

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "musa/ad/ops.hpp"

namespace musa::model {

using ad::Index;
using ad::Matrix;
using ad::Vector;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Per-layer code indices, N x t. Row 0 is the content stream.
struct CodeSequence {
  IndexMatrix codes;
  int codebook_size = 0;

  Index layers() const { return codes.rows(); }
  Index frames() const { return codes.cols(); }
};

/// One EMA codebook. Vectors are stored as columns (d x K) so that a
/// distance against a batch of frames is a single product.
template <typename T>
struct Codebook {
  Matrix<T> vectors;
  Vector<T> ema_count;
  Matrix<T> ema_sum;
  std::vector<std::int64_t> last_used;
};

template <typename T>
struct QuantizerBank {
  int num_layers = 0;
  int codebook_size = 0;
  int dim = 0;
  bool initialized = false;
  std::vector<Codebook<T>> books;

  QuantizerBank() = default;
  QuantizerBank(int layers, int k, int d) : num_layers(layers), codebook_size(k), dim(d) {
    if (layers <= 0 || k <= 0 || d <= 0) throw std::invalid_argument("QuantizerBank: sizes must be positive");
    books.resize(static_cast<std::size_t>(layers));
    for (auto& b : books) {
      b.vectors = Matrix<T>::Zero(d, k);
      b.ema_count = Vector<T>::Ones(k);
      b.ema_sum = Matrix<T>::Zero(d, k);
      b.last_used.assign(static_cast<std::size_t>(k), 0);
    }
  }

  const Matrix<T>& codebook(int layer) const { return books.at(static_cast<std::size_t>(layer)).vectors; }
  /// Overwrites a codebook and resets its EMA state to one count per entry.
  void set_codebook(int layer, const Matrix<T>& vectors) {
    auto& b = books.at(static_cast<std::size_t>(layer));
    if (vectors.rows() != dim || vectors.cols() != codebook_size)
      throw std::invalid_argument("set_codebook: shape mismatch");
    b.vectors = vectors;
    b.ema_count.setOnes();
    b.ema_sum = vectors;
  }
};

template <typename T>
struct QuantizedRepresentation {
  std::vector<Matrix<T>> layers;  // q_i
  std::vector<Matrix<T>> inputs;  // residual entering layer i
  Matrix<T> total;                // q_1 + ... + q_N, summed in layer order
  Matrix<T> residual;             // residual left after layer N
};

/// Index of the nearest column of `book` (d x K) for every column of x.
/// Ties resolve to the lowest index.
template <typename T>
std::vector<int> nearest_codes(const Matrix<T>& book, const Matrix<T>& x) {
  if (book.rows() != x.rows()) throw std::invalid_argument("nearest_codes: dimension mismatch");
  // ||e||^2 - 2 e.x ranks codes exactly like ||x - e||^2.
  Matrix<T> score = book.transpose() * x;
  const Vector<T> norms = book.colwise().squaredNorm().transpose();
  std::vector<int> out(static_cast<std::size_t>(x.cols()));
  for (Index j = 0; j < x.cols(); ++j) {
    T best = std::numeric_limits<T>::infinity();
    int arg = 0;
    for (Index k = 0; k < book.cols(); ++k) {
      const T s = norms(k) - T(2) * score(k, j);
      if (s < best) {
        best = s;
        arg = static_cast<int>(k);
      }
    }
    out[static_cast<std::size_t>(j)] = arg;
  }
  return out;
}

/// Residual quantization of r1 (d x t) through every layer of the bank.
template <typename T>
std::pair<CodeSequence, QuantizedRepresentation<T>> quantize(const std::type_identity_t<Matrix<T>>& r1,
                                                             const QuantizerBank<T>& bank) {
  if (r1.rows() != bank.dim) {
    throw std::invalid_argument("quantize: representation has " + std::to_string(r1.rows()) +
                                " channels, bank expects " + std::to_string(bank.dim));
  }
  CodeSequence codes;
  codes.codebook_size = bank.codebook_size;
  codes.codes.resize(bank.num_layers, r1.cols());
  QuantizedRepresentation<T> q;
  Matrix<T> residual = r1;
  q.total = Matrix<T>::Zero(r1.rows(), r1.cols());
  for (int i = 0; i < bank.num_layers; ++i) {
    const auto& book = bank.codebook(i);
    const auto idx = nearest_codes(book, residual);
    Matrix<T> qi(r1.rows(), r1.cols());
    for (Index j = 0; j < r1.cols(); ++j) {
      codes.codes(i, j) = idx[static_cast<std::size_t>(j)];
      qi.col(j) = book.col(idx[static_cast<std::size_t>(j)]);
    }
    q.inputs.push_back(residual);
    residual -= qi;
    q.total += qi;
    q.layers.push_back(std::move(qi));
  }
  q.residual = std::move(residual);
  return {std::move(codes), std::move(q)};
}

/// Sum of the selected code vectors, in layer order.
template <typename T>
Matrix<T> dequantize(const CodeSequence& codes, const QuantizerBank<T>& bank) {
  if (codes.layers() != bank.num_layers) throw std::invalid_argument("dequantize: layer count mismatch");
  Matrix<T> total = Matrix<T>::Zero(bank.dim, codes.frames());
  for (int i = 0; i < bank.num_layers; ++i) {
    const auto& book = bank.codebook(i);
    for (Index j = 0; j < codes.frames(); ++j) {
      const int c = codes.codes(i, j);
      if (c < 0 || c >= bank.codebook_size) throw std::out_of_range("dequantize: code out of range");
      total.col(j) += book.col(c);
    }
  }
  return total;
}

/// sum_i mean_frames ||x_i - q_i||^2 on plain matrices.
template <typename T>
T commitment_loss(const std::vector<Matrix<T>>& inputs, const std::vector<Matrix<T>>& quantized) {
  if (inputs.size() != quantized.size()) throw std::invalid_argument("commitment_loss: layer count mismatch");
  T total = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].rows() != quantized[i].rows() || inputs[i].cols() != quantized[i].cols())
      throw std::invalid_argument("commitment_loss: shape mismatch");
    total += (inputs[i] - quantized[i]).squaredNorm() / static_cast<T>(inputs[i].cols());
  }
  return total;
}

/// Differentiable commitment term. The residual entering layer i is r1 minus
/// the (constant) codes chosen before it, so the gradient lands on r1 and the
/// codebooks are left to the EMA update.
template <typename T>
ad::Var<T> commitment_loss(const ad::Var<T>& r1, const QuantizedRepresentation<T>& q) {
  if (q.layers.empty()) throw std::invalid_argument("commitment_loss: no layers");
  const T frames = static_cast<T>(r1.cols());
  Matrix<T> offset = Matrix<T>::Zero(r1.rows(), r1.cols());
  ad::Var<T> total;
  for (std::size_t i = 0; i < q.layers.size(); ++i) {
    offset += q.layers[i];
    // x_i - q_i = r1 - (q_1 + ... + q_i)
    auto term = ad::scale(ad::sum(ad::square(ad::sub(r1, ad::constant<T>(offset)))), T(1) / frames);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

/// Forward value q.total, identity gradient into r1.
template <typename T>
ad::Var<T> straight_through_total(const ad::Var<T>& r1, const QuantizedRepresentation<T>& q) {
  return ad::straight_through(r1, q.total);
}

struct EmaOptions {
  double decay = 0.99;
  double epsilon = 1e-5;        // floor on the EMA count
  int dead_code_steps = 200;    // re-seed entries unused this long
};

/// One EMA step for every layer. assignments is N x n; inputs[i] is the
/// d x n batch of residuals that entered layer i. Entries unused for
/// options.dead_code_steps are re-seeded from random batch vectors when rng
/// is given. Returns the number of re-seeded entries.
template <typename T>
int ema_update(QuantizerBank<T>& bank, const IndexMatrix& assignments, const std::vector<Matrix<T>>& inputs,
               const EmaOptions& options, std::int64_t step = 0, std::mt19937_64* rng = nullptr) {
  if (assignments.rows() != bank.num_layers || static_cast<int>(inputs.size()) != bank.num_layers)
    throw std::invalid_argument("ema_update: layer count mismatch");
  const T g = static_cast<T>(options.decay);
  const T eps = static_cast<T>(options.epsilon);
  int reseeded = 0;
  for (int i = 0; i < bank.num_layers; ++i) {
    auto& b = bank.books[static_cast<std::size_t>(i)];
    const auto& x = inputs[static_cast<std::size_t>(i)];
    if (x.rows() != bank.dim || x.cols() != assignments.cols())
      throw std::invalid_argument("ema_update: input shape mismatch");
    Vector<T> counts = Vector<T>::Zero(bank.codebook_size);
    Matrix<T> sums = Matrix<T>::Zero(bank.dim, bank.codebook_size);
    for (Index j = 0; j < x.cols(); ++j) {
      const int c = assignments(i, j);
      if (c < 0 || c >= bank.codebook_size) throw std::out_of_range("ema_update: code out of range");
      counts(c) += T(1);
      sums.col(c) += x.col(j);
    }
    b.ema_count = g * b.ema_count + (T(1) - g) * counts;
    b.ema_sum = g * b.ema_sum + (T(1) - g) * sums;
    for (Index k = 0; k < bank.codebook_size; ++k) {
      if (counts(k) > T(0)) b.last_used[static_cast<std::size_t>(k)] = step;
      b.vectors.col(k) = b.ema_sum.col(k) / std::max(b.ema_count(k), eps);
    }
    if (rng == nullptr || x.cols() == 0) continue;
    std::uniform_int_distribution<Index> pick(0, x.cols() - 1);
    for (Index k = 0; k < bank.codebook_size; ++k) {
      if (step - b.last_used[static_cast<std::size_t>(k)] < options.dead_code_steps) continue;
      b.vectors.col(k) = x.col(pick(*rng));
      b.ema_count(k) = T(1);
      b.ema_sum.col(k) = b.vectors.col(k);
      b.last_used[static_cast<std::size_t>(k)] = step;
      ++reseeded;
    }
  }
  return reseeded;
}

/// Lloyd k-means with k-means++ seeding on the columns of x. When there are
/// fewer points than clusters, every point becomes a centre and the rest are
/// jittered copies.
template <typename T>
Matrix<T> kmeans(const Matrix<T>& x, int k, int iterations, std::mt19937_64& rng) {
  const Index n = x.cols(), d = x.rows();
  if (n == 0) throw std::invalid_argument("kmeans: no data");
  Matrix<T> centres(d, k);
  if (n <= k) {
    std::normal_distribution<double> noise(0.0, 1.0);
    const T spread = static_cast<T>(1e-3) * std::max(T(1e-6), std::sqrt(x.squaredNorm() / static_cast<T>(x.size())));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    for (Index c = 0; c < k; ++c) {
      if (c < n) {
        centres.col(c) = x.col(c);
      } else {
        centres.col(c) = x.col(pick(rng));
        for (Index r = 0; r < d; ++r) centres(r, c) += spread * static_cast<T>(noise(rng));
      }
    }
    return centres;
  }
  // Greedy k-means++ seeding: 2 + ln k candidates per centre, keep the one
  // that lowers the potential most.
  std::uniform_int_distribution<Index> first(0, n - 1);
  centres.col(0) = x.col(first(rng));
  Vector<T> dist = (x.colwise() - centres.col(0)).colwise().squaredNorm().transpose();
  const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
  for (int c = 1; c < k; ++c) {
    const double total = static_cast<double>(dist.sum());
    Index best = first(rng);
    Vector<T> best_dist;
    double best_potential = INFINITY;
    for (int trial = 0; trial < trials; ++trial) {
      Index chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng), acc = 0.0;
        for (chosen = 0; chosen < n - 1; ++chosen) {
          acc += static_cast<double>(dist(chosen));
          if (acc >= r) break;
        }
      } else {
        chosen = first(rng);
      }
      Vector<T> d = dist.cwiseMin((x.colwise() - x.col(chosen)).colwise().squaredNorm().transpose());
      const double potential = static_cast<double>(d.sum());
      if (potential < best_potential) {
        best_potential = potential;
        best = chosen;
        best_dist = std::move(d);
      }
    }
    centres.col(c) = x.col(best);
    dist = std::move(best_dist);
  }
  for (int it = 0; it < iterations; ++it) {
    const auto idx = nearest_codes(centres, x);
    Matrix<T> sums = Matrix<T>::Zero(d, k);
    Vector<T> counts = Vector<T>::Zero(k);
    for (Index j = 0; j < n; ++j) {
      sums.col(idx[static_cast<std::size_t>(j)]) += x.col(j);
      counts(idx[static_cast<std::size_t>(j)]) += T(1);
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > T(0)) centres.col(c) = sums.col(c) / counts(c);
    }
  }
  return centres;
}

/// Initialises every layer from k-means on the residuals of a batch, layer by
/// layer, so that layer i sees what layers 1..i-1 left behind.
template <typename T>
void kmeans_init(QuantizerBank<T>& bank, const Matrix<T>& r1, std::mt19937_64& rng, int iterations = 10) {
  Matrix<T> residual = r1;
  for (int i = 0; i < bank.num_layers; ++i) {
    bank.set_codebook(i, kmeans(residual, bank.codebook_size, iterations, rng));
    const auto idx = nearest_codes(bank.codebook(i), residual);
    for (Index j = 0; j < residual.cols(); ++j) residual.col(j) -= bank.codebook(i).col(idx[static_cast<std::size_t>(j)]);
  }
  bank.initialized = true;
}

/// Layer-1 logits: negative squared distance of each frame of the residual
/// entering layer 1 to every layer-1 code (temperature 1). K x t.
template <typename T>
ad::Var<T> layer1_logits(const ad::Var<T>& r1, const QuantizerBank<T>& bank) {
  return ad::neg_sq_distance(r1, bank.codebook(0));
}

/// Mean cross-entropy of teacher tokens under the layer-1 logits.
template <typename T>
ad::Var<T> semantic_distillation_loss(const ad::Var<T>& logits, std::span<const int> tokens) {
  if (static_cast<Index>(tokens.size()) != logits.cols()) {
    throw std::invalid_argument("semantic_distillation_loss: " + std::to_string(tokens.size()) +
                                " tokens for " + std::to_string(logits.cols()) + " frames");
  }
  return ad::cross_entropy(logits, tokens);
}

/// Nearest-neighbour resampling of a token sequence to `frames` entries.
inline std::vector<int> align_tokens(std::span<const int> tokens, Index frames) {
  if (tokens.empty() || frames <= 0) throw std::invalid_argument("align_tokens: empty sequence");
  std::vector<int> out(static_cast<std::size_t>(frames));
  const double ratio = static_cast<double>(tokens.size()) / static_cast<double>(frames);
  for (Index j = 0; j < frames; ++j) {
    auto src = static_cast<Index>(std::floor((static_cast<double>(j) + 0.5) * ratio));
    src = std::clamp<Index>(src, 0, static_cast<Index>(tokens.size()) - 1);
    out[static_cast<std::size_t>(j)] = tokens[static_cast<std::size_t>(src)];
  }
  return out;
}

}  // namespace musa::model

#endif  // MUSA_MODEL_RVQ_HPP_
