// musa/ad/ops.hpp

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

#ifndef MUSA_AD_OPS_HPP_
#define MUSA_AD_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "musa/ad/var.hpp"

namespace musa::ad {

namespace detail {

template <typename T>
void check_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

}  // namespace detail

template <typename T>
Var<T> constant(Matrix<T> value, Index height = 1) {
  return Var<T>(std::move(value), false, height);
}

template <typename T>
Var<T> detach(const Var<T>& a) {
  return Var<T>(a.value(), false, a.height());
}

// ---------------------------------------------------------------- arithmetic

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "add");
  auto na = a.node(), nb = b.node();
  return make_result<T>(a.value() + b.value(), {a, b}, [na, nb](const Matrix<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g;
    if (nb->requires_grad) nb->grad_buffer() += g;
  }, a.height());
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "sub");
  auto na = a.node(), nb = b.node();
  return make_result<T>(a.value() - b.value(), {a, b}, [na, nb](const Matrix<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g;
    if (nb->requires_grad) nb->grad_buffer() -= g;
  }, a.height());
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::check_same_shape(a, b, "mul");
  auto na = a.node(), nb = b.node();
  Matrix<T> v = a.value().cwiseProduct(b.value());
  return make_result<T>(std::move(v), {a, b}, [na, nb](const Matrix<T>& g) {
    if (na->requires_grad) na->grad_buffer() += g.cwiseProduct(nb->value);
    if (nb->requires_grad) nb->grad_buffer() += g.cwiseProduct(na->value);
  }, a.height());
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  auto na = a.node();
  return make_result<T>(a.value() * c, {a}, [na, c](const Matrix<T>& g) {
    na->grad_buffer() += g * c;
  }, a.height());
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  auto na = a.node();
  Matrix<T> v = a.value().array() + c;
  return make_result<T>(std::move(v), {a}, [na](const Matrix<T>& g) {
    na->grad_buffer() += g;
  }, a.height());
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  auto na = a.node(), nb = b.node();
  Matrix<T> v = a.value() * b.value();
  return make_result<T>(std::move(v), {a, b}, [na, nb](const Matrix<T>& g) {
    if (na->requires_grad) na->grad_buffer().noalias() += g * nb->value.transpose();
    if (nb->requires_grad) nb->grad_buffer().noalias() += na->value.transpose() * g;
  });
}

/// x (C x T) + b (C x 1) broadcast over columns.
template <typename T>
Var<T> add_colwise(const Var<T>& x, const Var<T>& b) {
  if (b.cols() != 1 || b.rows() != x.rows()) throw std::invalid_argument("add_colwise: bad vector shape");
  auto nx = x.node(), nb = b.node();
  Matrix<T> v = x.value().colwise() + b.value().col(0);
  return make_result<T>(std::move(v), {x, b}, [nx, nb](const Matrix<T>& g) {
    if (nx->requires_grad) nx->grad_buffer() += g;
    if (nb->requires_grad) nb->grad_buffer() += g.rowwise().sum();
  }, x.height());
}

/// x (C x T) - b (C x 1) broadcast over columns.
template <typename T>
Var<T> sub_colwise(const Var<T>& x, const Var<T>& b) {
  if (b.cols() != 1 || b.rows() != x.rows()) throw std::invalid_argument("sub_colwise: bad vector shape");
  auto nx = x.node(), nb = b.node();
  Matrix<T> v = x.value().colwise() - b.value().col(0);
  return make_result<T>(std::move(v), {x, b}, [nx, nb](const Matrix<T>& g) {
    if (nx->requires_grad) nx->grad_buffer() += g;
    if (nb->requires_grad) nb->grad_buffer() -= g.rowwise().sum();
  }, x.height());
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var<T> sum(const Var<T>& a) {
  auto na = a.node();
  return make_result<T>(Matrix<T>::Constant(1, 1, a.value().sum()), {a},
                        [na](const Matrix<T>& g) { na->grad_buffer().array() += g(0, 0); });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  auto na = a.node();
  const T n = static_cast<T>(a.value().size());
  return make_result<T>(Matrix<T>::Constant(1, 1, a.value().sum() / n), {a},
                        [na, n](const Matrix<T>& g) { na->grad_buffer().array() += g(0, 0) / n; });
}

/// Average over columns (time): C x T -> C x 1.
template <typename T>
Var<T> mean_cols(const Var<T>& a) {
  auto na = a.node();
  const T n = static_cast<T>(a.cols());
  Matrix<T> v = a.value().rowwise().sum() / n;
  return make_result<T>(std::move(v), {a}, [na, n](const Matrix<T>& g) {
    na->grad_buffer().colwise() += (g.col(0) / n);
  });
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> abs(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = a.value().cwiseAbs();
  return make_result<T>(std::move(v), {a}, [na](const Matrix<T>& g) {
    na->grad_buffer().array() += g.array() * na->value.array().sign();
  }, a.height());
}

template <typename T>
Var<T> square(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = a.value().array().square();
  return make_result<T>(std::move(v), {a}, [na](const Matrix<T>& g) {
    na->grad_buffer().array() += T(2) * g.array() * na->value.array();
  }, a.height());
}

template <typename T>
Var<T> exp(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = a.value().array().exp();
  auto out = make_result<T>(v, {a}, [na, v](const Matrix<T>& g) {
    na->grad_buffer().array() += g.array() * v.array();
  }, a.height());
  return out;
}

template <typename T>
Var<T> tanh(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = a.value().array().tanh();
  return make_result<T>(v, {a}, [na, v](const Matrix<T>& g) {
    na->grad_buffer().array() += g.array() * (T(1) - v.array().square());
  }, a.height());
}

template <typename T>
Var<T> sigmoid(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = (T(1) + (-a.value().array()).exp()).inverse().matrix();
  return make_result<T>(v, {a}, [na, v](const Matrix<T>& g) {
    na->grad_buffer().array() += g.array() * v.array() * (T(1) - v.array());
  }, a.height());
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
  auto na = a.node();
  Matrix<T> v = a.value().unaryExpr([slope](T x) { return x > T(0) ? x : slope * x; });
  return make_result<T>(std::move(v), {a}, [na, slope](const Matrix<T>& g) {
    na->grad_buffer().array() +=
        g.array() * na->value.array().unaryExpr([slope](T x) { return x > T(0) ? T(1) : slope; });
  }, a.height());
}

template <typename T>
Var<T> elu(const Var<T>& a) {
  auto na = a.node();
  Matrix<T> v = a.value().unaryExpr([](T x) { return x > T(0) ? x : std::expm1(x); });
  return make_result<T>(std::move(v), {a}, [na](const Matrix<T>& g) {
    na->grad_buffer().array() +=
        g.array() * na->value.array().unaryExpr([](T x) { return x > T(0) ? T(1) : std::exp(x); });
  }, a.height());
}

/// log(max(a, floor)); zero gradient where the floor is active.
template <typename T>
Var<T> clamp_log(const Var<T>& a, T floor) {
  auto na = a.node();
  Matrix<T> v = a.value().unaryExpr([floor](T x) { return std::log(std::max(x, floor)); });
  return make_result<T>(std::move(v), {a}, [na, floor](const Matrix<T>& g) {
    na->grad_buffer().array() += g.array() * na->value.array().unaryExpr(
                                                 [floor](T x) { return x > floor ? T(1) / x : T(0); });
  }, a.height());
}

// ---------------------------------------------------------------- shape

template <typename T>
Var<T> transpose(const Var<T>& a) {
  auto na = a.node();
  return make_result<T>(a.value().transpose(), {a}, [na](const Matrix<T>& g) {
    na->grad_buffer() += g.transpose();
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  auto na = a.node();
  return make_result<T>(a.value().middleCols(start, count), {a}, [na, start, count](const Matrix<T>& g) {
    na->grad_buffer().middleCols(start, count) += g;
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  auto na = a.node();
  return make_result<T>(a.value().middleRows(start, count), {a}, [na, start, count](const Matrix<T>& g) {
    na->grad_buffer().middleRows(start, count) += g;
  }, a.height());
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix<T> v(rows, cols);
  std::vector<std::shared_ptr<Node<T>>> nodes;
  Index offset = 0;
  for (const auto& p : parts) {
    v.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
    nodes.push_back(p.node());
  }
  return make_result<T>(std::move(v), parts, [nodes](const Matrix<T>& g) {
    Index off = 0;
    for (const auto& n : nodes) {
      if (n->requires_grad) n->grad_buffer() += g.middleRows(off, n->value.rows());
      off += n->value.rows();
    }
  }, parts.front().height());
}

/// Reinterprets the column-major storage with a new shape.
template <typename T>
Var<T> reshape(const Var<T>& a, Index rows, Index cols, Index height = 1) {
  if (rows * cols != a.value().size()) throw std::invalid_argument("reshape: size mismatch");
  auto na = a.node();
  Matrix<T> v = Eigen::Map<const Matrix<T>>(a.value().data(), rows, cols);
  const Index r0 = a.rows(), c0 = a.cols();
  return make_result<T>(std::move(v), {a}, [na, r0, c0](const Matrix<T>& g) {
    na->grad_buffer() += Eigen::Map<const Matrix<T>>(g.data(), r0, c0);
  }, height);
}

/// out(:, j) = a(:, index[j]); gradients scatter back.
template <typename T>
Var<T> gather_cols(const Var<T>& a, std::vector<Index> index, Index height = 1) {
  Matrix<T> v(a.rows(), static_cast<Index>(index.size()));
  for (Index j = 0; j < v.cols(); ++j) v.col(j) = a.value().col(index[j]);
  auto na = a.node();
  return make_result<T>(std::move(v), {a}, [na, index = std::move(index)](const Matrix<T>& g) {
    auto& ga = na->grad_buffer();
    for (Index j = 0; j < g.cols(); ++j) ga.col(index[j]) += g.col(j);
  }, height);
}

/// Zero padding along columns of a 1-D signal.
template <typename T>
Var<T> pad_cols(const Var<T>& a, Index left, Index right) {
  Matrix<T> v = Matrix<T>::Zero(a.rows(), a.cols() + left + right);
  v.middleCols(left, a.cols()) = a.value();
  auto na = a.node();
  const Index n = a.cols();
  return make_result<T>(std::move(v), {a}, [na, left, n](const Matrix<T>& g) {
    na->grad_buffer() += g.middleCols(left, n);
  });
}

// ---------------------------------------------------------------- losses

/// Mean softmax cross-entropy. logits: K x T, one target class per column.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, std::span<const int> targets) {
  const Index k = logits.rows(), t = logits.cols();
  if (static_cast<Index>(targets.size()) != t) throw std::invalid_argument("cross_entropy: target count mismatch");
  Matrix<T> prob(k, t);
  T total = 0;
  for (Index j = 0; j < t; ++j) {
    const int y = targets[j];
    if (y < 0 || y >= k) throw std::out_of_range("cross_entropy: target out of range");
    const auto col = logits.value().col(j);
    const T m = col.maxCoeff();
    prob.col(j) = (col.array() - m).exp();
    const T z = prob.col(j).sum();
    prob.col(j) /= z;
    total += m + std::log(z) - col(y);
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  auto nl = logits.node();
  return make_result<T>(Matrix<T>::Constant(1, 1, total / static_cast<T>(t)), {logits},
                        [nl, prob = std::move(prob), tgt = std::move(tgt)](const Matrix<T>& g) {
                          const T s = g(0, 0) / static_cast<T>(prob.cols());
                          auto& gl = nl->grad_buffer();
                          gl += prob * s;
                          for (Index j = 0; j < prob.cols(); ++j) gl(tgt[j], j) -= s;
                        });
}

/// Cosine similarity between two column vectors; the denominator is floored
/// at eps.
template <typename T>
Var<T> cosine_similarity(const Var<T>& a, const Var<T>& b, T eps = T(1e-8)) {
  detail::check_same_shape(a, b, "cosine_similarity");
  const T dot = a.value().cwiseProduct(b.value()).sum();
  const T na2 = a.value().squaredNorm(), nb2 = b.value().squaredNorm();
  const T na = std::sqrt(na2), nb = std::sqrt(nb2);
  const bool floored = na * nb < eps;
  const T denom = floored ? eps : na * nb;
  const T cosv = dot / denom;
  auto pa = a.node(), pb = b.node();
  return make_result<T>(Matrix<T>::Constant(1, 1, cosv), {a, b},
                        [pa, pb, denom, cosv, na2, nb2, floored](const Matrix<T>& g) {
                          const T s = g(0, 0);
                          if (pa->requires_grad) {
                            if (floored) pa->grad_buffer() += pb->value * (s / denom);
                            else pa->grad_buffer() += (pb->value / denom - pa->value * (cosv / na2)) * s;
                          }
                          if (pb->requires_grad) {
                            if (floored) pb->grad_buffer() += pa->value * (s / denom);
                            else pb->grad_buffer() += (pa->value / denom - pb->value * (cosv / nb2)) * s;
                          }
                        });
}

/// Forward value `quantized`, gradient passed to `input` unchanged.
template <typename T>
Var<T> straight_through(const Var<T>& input, const Matrix<T>& quantized) {
  if (input.rows() != quantized.rows() || input.cols() != quantized.cols())
    throw std::invalid_argument("straight_through: shape mismatch");
  auto ni = input.node();
  return make_result<T>(quantized, {input}, [ni](const Matrix<T>& g) { ni->grad_buffer() += g; });
}

/// logits(k, t) = -||x_t - e_k||^2 against a fixed codebook (d x K).
template <typename T>
Var<T> neg_sq_distance(const Var<T>& x, const Matrix<T>& codebook) {
  if (x.rows() != codebook.rows()) throw std::invalid_argument("neg_sq_distance: dimension mismatch");
  Matrix<T> v = T(2) * codebook.transpose() * x.value();
  v.colwise() -= codebook.colwise().squaredNorm().transpose();
  v.rowwise() -= x.value().colwise().squaredNorm();
  auto nx = x.node();
  return make_result<T>(std::move(v), {x}, [nx, codebook](const Matrix<T>& g) {
    Matrix<T> gx = T(2) * codebook * g;
    gx -= T(2) * (nx->value.array().rowwise() * g.colwise().sum().array()).matrix();
    nx->grad_buffer() += gx;
  });
}

// ---------------------------------------------------------------- composites

template <typename T>
Var<T> l1_mean(const Var<T>& a, const Var<T>& b) {
  return mean(abs(sub(a, b)));
}

template <typename T>
Var<T> mse(const Var<T>& a, const Var<T>& b) {
  return mean(square(sub(a, b)));
}

template <typename T>
Var<T> weighted_sum(const std::vector<std::pair<T, Var<T>>>& terms) {
  if (terms.empty()) throw std::invalid_argument("weighted_sum: empty");
  Var<T> acc = scale(terms.front().second, terms.front().first);
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, scale(terms[i].second, terms[i].first));
  return acc;
}

}  // namespace musa::ad

#endif  // MUSA_AD_OPS_HPP_
