// musa/ad/conv.hpp

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

#ifndef MUSA_AD_CONV_HPP_
#define MUSA_AD_CONV_HPP_

#include <algorithm>
#include <string>

#include "musa/ad/var.hpp"

namespace musa::ad {

/// Geometry of a 2-D convolution over a (height x width) grid. A 1-D
/// convolution is the special case height == kernel_h == 1.
struct ConvGeometry {
  Index kernel_h = 1, kernel_w = 1;
  Index stride_h = 1, stride_w = 1;
  Index pad_top = 0, pad_bottom = 0, pad_left = 0, pad_right = 0;
  Index dilation_w = 1;

  Index out_height(Index h) const { return (h + pad_top + pad_bottom - kernel_h) / stride_h + 1; }
  Index out_width(Index w) const {
    return (w + pad_left + pad_right - (dilation_w * (kernel_w - 1) + 1)) / stride_w + 1;
  }

  static ConvGeometry conv1d(Index kernel, Index stride, Index pad_left, Index pad_right,
                             Index dilation = 1) {
    ConvGeometry g;
    g.kernel_w = kernel;
    g.stride_w = stride;
    g.pad_left = pad_left;
    g.pad_right = pad_right;
    g.dilation_w = dilation;
    return g;
  }
};

namespace detail {

template <typename T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// cols((ci*kh + i)*kw + j, oh + Ho*ow) = x(ci, ih + H*iw). Row-major so the
// inner loop over output positions writes contiguously.
template <typename T>
RowMajor<T> im2col(const Matrix<T>& x, Index height, const ConvGeometry& geo, Index ho, Index wo) {
  const Index cin = x.rows();
  const Index width = x.cols() / height;
  const Matrix<T> xt = x.transpose();  // positions x channels
  RowMajor<T> cols(cin * geo.kernel_h * geo.kernel_w, ho * wo);
  for (Index ci = 0; ci < cin; ++ci) {
    const T* src = xt.col(ci).data();
    for (Index i = 0; i < geo.kernel_h; ++i) {
      for (Index j = 0; j < geo.kernel_w; ++j) {
        T* dst = cols.row((ci * geo.kernel_h + i) * geo.kernel_w + j).data();
        for (Index ow = 0; ow < wo; ++ow) {
          const Index iw = ow * geo.stride_w - geo.pad_left + j * geo.dilation_w;
          T* out = dst + ho * ow;
          if (iw < 0 || iw >= width) {
            std::fill(out, out + ho, T(0));
            continue;
          }
          const T* column = src + height * iw;
          for (Index oh = 0; oh < ho; ++oh) {
            const Index ih = oh * geo.stride_h - geo.pad_top + i;
            out[oh] = (ih >= 0 && ih < height) ? column[ih] : T(0);
          }
        }
      }
    }
  }
  return cols;
}

template <typename T>
void col2im_add(const RowMajor<T>& cols, Index height, Index width, const ConvGeometry& geo, Index ho,
                Index wo, Matrix<T>& gx) {
  const Index cin = gx.rows();
  Matrix<T> gxt = Matrix<T>::Zero(gx.cols(), cin);
  for (Index ci = 0; ci < cin; ++ci) {
    T* dst = gxt.col(ci).data();
    for (Index i = 0; i < geo.kernel_h; ++i) {
      for (Index j = 0; j < geo.kernel_w; ++j) {
        const T* src = cols.row((ci * geo.kernel_h + i) * geo.kernel_w + j).data();
        for (Index ow = 0; ow < wo; ++ow) {
          const Index iw = ow * geo.stride_w - geo.pad_left + j * geo.dilation_w;
          if (iw < 0 || iw >= width) continue;
          const T* in = src + ho * ow;
          T* column = dst + height * iw;
          for (Index oh = 0; oh < ho; ++oh) {
            const Index ih = oh * geo.stride_h - geo.pad_top + i;
            if (ih >= 0 && ih < height) column[ih] += in[oh];
          }
        }
      }
    }
  }
  gx += gxt.transpose();
}

}  // namespace detail

/// x: Cin x (H*W) with x.height() == H; weight: Cout x (Cin*kh*kw);
/// bias: Cout x 1 (may be undefined). Output: Cout x (Ho*Wo), height Ho.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const ConvGeometry& geo) {
  const Index h = x.height();
  const Index w = x.width();
  if (weight.cols() != x.rows() * geo.kernel_h * geo.kernel_w) {
    throw std::invalid_argument("conv2d: weight has " + std::to_string(weight.cols()) +
                                " columns, expected " +
                                std::to_string(x.rows() * geo.kernel_h * geo.kernel_w));
  }
  const Index ho = geo.out_height(h);
  const Index wo = geo.out_width(w);
  if (ho <= 0 || wo <= 0) throw std::invalid_argument("conv2d: input smaller than kernel");
  detail::RowMajor<T> cols = detail::im2col(x.value(), h, geo, ho, wo);
  Matrix<T> y = weight.value() * cols;
  if (bias.defined()) y.colwise() += bias.value().col(0);
  auto nx = x.node(), nw = weight.node();
  std::shared_ptr<Node<T>> nb = bias.defined() ? bias.node() : nullptr;
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  const bool keep_cols = weight.requires_grad();
  return make_result<T>(
      std::move(y), inputs,
      [nx, nw, nb, geo, h, w, ho, wo, cols = keep_cols ? std::move(cols) : detail::RowMajor<T>()](
          const Matrix<T>& g) {
        if (nw->requires_grad) nw->grad_buffer().noalias() += g * cols.transpose();
        if (nb && nb->requires_grad) nb->grad_buffer() += g.rowwise().sum();
        if (nx->requires_grad) {
          detail::RowMajor<T> gcols = nw->value.transpose() * g;
          detail::col2im_add(gcols, h, w, geo, ho, wo, nx->grad_buffer());
        }
      },
      ho);
}

/// Transposed 1-D convolution. x: Cin x T; weight: (kernel*Cout) x Cin with
/// row index tap*Cout + co. Output length (T-1)*stride + kernel - crop_left -
/// crop_right.
template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, Index kernel,
                        Index stride, Index crop_left, Index crop_right) {
  if (weight.cols() != x.rows() || weight.rows() % kernel != 0)
    throw std::invalid_argument("conv_transpose1d: weight shape mismatch");
  const Index cout = weight.rows() / kernel;
  const Index t_in = x.cols();
  const Index full = (t_in - 1) * stride + kernel;
  const Index t_out = full - crop_left - crop_right;
  if (t_out <= 0) throw std::invalid_argument("conv_transpose1d: empty output");
  Matrix<T> z = weight.value() * x.value();
  Matrix<T> y = Matrix<T>::Zero(cout, t_out);
  for (Index t = 0; t < t_in; ++t) {
    for (Index j = 0; j < kernel; ++j) {
      const Index o = t * stride + j - crop_left;
      if (o < 0 || o >= t_out) continue;
      y.col(o) += z.block(j * cout, t, cout, 1);
    }
  }
  if (bias.defined()) y.colwise() += bias.value().col(0);
  auto nx = x.node(), nw = weight.node();
  std::shared_ptr<Node<T>> nb = bias.defined() ? bias.node() : nullptr;
  std::vector<Var<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(std::move(y), inputs,
                        [nx, nw, nb, kernel, stride, crop_left, cout, t_in, t_out](const Matrix<T>& g) {
                          if (nb && nb->requires_grad) nb->grad_buffer() += g.rowwise().sum();
                          Matrix<T> gz = Matrix<T>::Zero(kernel * cout, t_in);
                          for (Index t = 0; t < t_in; ++t) {
                            for (Index j = 0; j < kernel; ++j) {
                              const Index o = t * stride + j - crop_left;
                              if (o < 0 || o >= t_out) continue;
                              gz.block(j * cout, t, cout, 1) = g.col(o);
                            }
                          }
                          if (nw->requires_grad) nw->grad_buffer().noalias() += gz * nx->value.transpose();
                          if (nx->requires_grad) nx->grad_buffer().noalias() += nw->value.transpose() * gz;
                        });
}

}  // namespace musa::ad

#endif  // MUSA_AD_CONV_HPP_
