// musa/ad/lstm.hpp

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

#ifndef MUSA_AD_LSTM_HPP_
#define MUSA_AD_LSTM_HPP_

#include "musa/ad/var.hpp"

namespace musa::ad {

/// Single-layer unidirectional LSTM over the columns of x (In x T), zero
/// initial state. Gate order in the 4H rows is input, forget, cell, output.
template <typename T>
Var<T> lstm(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh, const Var<T>& bias) {
  const Index hidden = w_hh.cols();
  const Index steps = x.cols();
  if (w_ih.rows() != 4 * hidden || w_hh.rows() != 4 * hidden || w_ih.cols() != x.rows() ||
      bias.rows() != 4 * hidden)
    throw std::invalid_argument("lstm: parameter shape mismatch");

  Matrix<T> gates = w_ih.value() * x.value();
  gates.colwise() += bias.value().col(0);
  Matrix<T> cell(hidden, steps), out(hidden, steps);
  Vector<T> h = Vector<T>::Zero(hidden), c = Vector<T>::Zero(hidden);
  auto sig = [](T v) { return T(1) / (T(1) + std::exp(-v)); };
  for (Index t = 0; t < steps; ++t) {
    auto z = gates.col(t);
    z.noalias() += w_hh.value() * h;
    z.segment(0, hidden) = z.segment(0, hidden).unaryExpr(sig);
    z.segment(hidden, hidden) = z.segment(hidden, hidden).unaryExpr(sig);
    z.segment(2 * hidden, hidden) = z.segment(2 * hidden, hidden).array().tanh();
    z.segment(3 * hidden, hidden) = z.segment(3 * hidden, hidden).unaryExpr(sig);
    c = z.segment(hidden, hidden).cwiseProduct(c) +
        z.segment(0, hidden).cwiseProduct(z.segment(2 * hidden, hidden));
    h = z.segment(3 * hidden, hidden).cwiseProduct(c.array().tanh().matrix());
    cell.col(t) = c;
    out.col(t) = h;
  }

  auto nx = x.node(), ni = w_ih.node(), nh = w_hh.node(), nb = bias.node();
  return make_result<T>(
      out, {x, w_ih, w_hh, bias},
      [nx, ni, nh, nb, gates = std::move(gates), cell, out, hidden, steps](const Matrix<T>& g) {
        Matrix<T> dz(4 * hidden, steps);
        Vector<T> dh_next = Vector<T>::Zero(hidden), dc_next = Vector<T>::Zero(hidden);
        for (Index t = steps - 1; t >= 0; --t) {
          const auto ig = gates.col(t).segment(0, hidden).array();
          const auto fg = gates.col(t).segment(hidden, hidden).array();
          const auto gg = gates.col(t).segment(2 * hidden, hidden).array();
          const auto og = gates.col(t).segment(3 * hidden, hidden).array();
          const Eigen::Array<T, Eigen::Dynamic, 1> tc = cell.col(t).array().tanh();
          const Eigen::Array<T, Eigen::Dynamic, 1> dh = g.col(t).array() + dh_next.array();
          const Eigen::Array<T, Eigen::Dynamic, 1> dc = dh * og * (T(1) - tc.square()) + dc_next.array();
          const Eigen::Array<T, Eigen::Dynamic, 1> c_prev =
              t > 0 ? Eigen::Array<T, Eigen::Dynamic, 1>(cell.col(t - 1).array())
                    : Eigen::Array<T, Eigen::Dynamic, 1>::Zero(hidden);
          dz.col(t).segment(0, hidden) = (dc * gg * ig * (T(1) - ig)).matrix();
          dz.col(t).segment(hidden, hidden) = (dc * c_prev * fg * (T(1) - fg)).matrix();
          dz.col(t).segment(2 * hidden, hidden) = (dc * ig * (T(1) - gg.square())).matrix();
          dz.col(t).segment(3 * hidden, hidden) = (dh * tc * og * (T(1) - og)).matrix();
          dc_next = (dc * fg).matrix();
          dh_next.noalias() = nh->value.transpose() * dz.col(t);
        }
        if (nb->requires_grad) nb->grad_buffer() += dz.rowwise().sum();
        if (nh->requires_grad && steps > 1) {
          nh->grad_buffer().noalias() += dz.rightCols(steps - 1) * out.leftCols(steps - 1).transpose();
        }
        if (ni->requires_grad) ni->grad_buffer().noalias() += dz * nx->value.transpose();
        if (nx->requires_grad) nx->grad_buffer().noalias() += ni->value.transpose() * dz;
      });
}

}  // namespace musa::ad

#endif  // MUSA_AD_LSTM_HPP_
