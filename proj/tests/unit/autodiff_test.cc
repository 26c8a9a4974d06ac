// tests/unit/autodiff_test.cc

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

#include "doctest.h"
#include "musa/ad/layers.hpp"
#include "musa/ad/optim.hpp"
#include "musa/ad/spectral.hpp"
#include "support.hpp"

using namespace musa;
using ad::Var;
using Eigen::MatrixXd;

namespace {

Var<double> param(testing::Gen& g, Eigen::Index r, Eigen::Index c, double sd = 0.5) {
  return Var<double>(g.matrix(r, c, sd), true);
}

// Projects a matrix-valued output to a scalar with fixed random weights so
// every output entry contributes.
Var<double> probe(const Var<double>& y, std::uint64_t seed) {
  testing::Gen g(seed);
  return ad::sum(ad::mul(y, ad::constant<double>(g.matrix(y.rows(), y.cols()))));
}

}  // namespace

TEST_CASE("elementwise and reduction ops match finite differences") {
  testing::Gen g(1);
  auto a = param(g, 3, 4), b = param(g, 3, 4);
  auto r = testing::check_gradient({a, b}, [&] {
    auto y = ad::add(ad::mul(ad::tanh(a), ad::sigmoid(b)), ad::elu(ad::sub(a, b)));
    y = ad::add(y, ad::leaky_relu(ad::scale(b, 1.7), 0.2));
    y = ad::add(y, ad::exp(ad::scale(a, 0.3)));
    return ad::add(probe(y, 7), ad::add(ad::mean(ad::square(a)), ad::sum(ad::abs(b))));
  });
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("matmul, broadcasting and shape ops match finite differences") {
  testing::Gen g(2);
  auto w = param(g, 5, 3), x = param(g, 3, 6), bias = param(g, 5, 1);
  auto r = testing::check_gradient({w, x, bias}, [&] {
    auto y = ad::add_colwise(ad::matmul(w, x), bias);
    y = ad::sub_colwise(y, ad::mean_cols(y));
    auto parts = ad::concat_rows<double>({ad::slice_rows(y, 1, 2), ad::slice_rows(x, 0, 1)});
    parts = ad::concat_rows<double>({parts, ad::transpose(ad::slice_cols(ad::transpose(x), 0, 2))});
    auto z = ad::reshape(ad::gather_cols(y, {5, 0, 0, 3}), 10, 2);
    return ad::add(probe(parts, 3), ad::add(probe(z, 4), probe(ad::pad_cols(x, 2, 1), 5)));
  });
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("cross entropy, cosine and clamp_log match finite differences") {
  testing::Gen g(3);
  auto logits = param(g, 6, 4, 1.0);
  auto u = param(g, 5, 1), v = param(g, 5, 1);
  const std::vector<int> targets{0, 5, 2, 2};
  auto r = testing::check_gradient({logits, u, v}, [&] {
    auto ce = ad::cross_entropy(logits, std::span<const int>(targets));
    auto c = ad::cosine_similarity(u, v);
    auto l = ad::mean(ad::clamp_log(ad::add_scalar(ad::square(u), 0.1), 1e-3));
    return ad::add(ce, ad::add(c, l));
  });
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("neg_sq_distance and straight_through gradients") {
  testing::Gen g(4);
  auto x = param(g, 3, 5);
  const MatrixXd book = g.matrix(3, 7);
  auto r = testing::check_gradient({x}, [&] { return probe(ad::neg_sq_distance(x, book), 9); });
  CHECK(r.relative_error < 1e-6);

  // Straight-through passes the gradient unchanged.
  const MatrixXd target = book.leftCols(5);
  auto q = ad::straight_through(x, target);
  CHECK(q.value() == book.leftCols(5));
  x.zero_grad();
  ad::backward(ad::sum(q));
  CHECK(x.grad() == MatrixXd::Ones(3, 5));
}

TEST_CASE("1-D and 2-D convolutions match finite differences") {
  testing::Gen g(5);
  SUBCASE("strided 1-D with asymmetric padding and dilation") {
    auto x = param(g, 2, 23);
    auto w = param(g, 3, 2 * 4), b = param(g, 3, 1);
    auto geo = ad::ConvGeometry::conv1d(4, 2, 2, 1, 2);
    auto r = testing::check_gradient({x, w, b}, [&] { return probe(ad::conv2d(x, w, b, geo), 11); });
    CHECK(r.relative_error < 1e-6);
  }
  SUBCASE("2-D with stride along height") {
    const Eigen::Index h = 7, wdt = 5;
    auto x = Var<double>(g.matrix(2, h * wdt), true, h);
    auto w = param(g, 3, 2 * 3 * 3), b = param(g, 3, 1);
    ad::ConvGeometry geo;
    geo.kernel_h = geo.kernel_w = 3;
    geo.stride_h = 2;
    geo.pad_top = geo.pad_bottom = geo.pad_left = geo.pad_right = 1;
    auto y = ad::conv2d(x, w, b, geo);
    CHECK(y.height() == 4);
    CHECK(y.width() == 5);
    auto r = testing::check_gradient({x, w, b}, [&] { return probe(ad::conv2d(x, w, b, geo), 12); });
    CHECK(r.relative_error < 1e-6);
  }
  SUBCASE("transposed 1-D") {
    auto x = param(g, 3, 6);
    auto w = param(g, 4 * 2, 3), b = param(g, 2, 1);
    auto y = ad::conv_transpose1d(x, w, b, 4, 2, 1, 1);
    CHECK(y.cols() == 12);
    auto r = testing::check_gradient({x, w, b}, [&] { return probe(ad::conv_transpose1d(x, w, b, 4, 2, 1, 1), 13); });
    CHECK(r.relative_error < 1e-6);
  }
}

TEST_CASE("convolution agrees with a direct loop") {
  testing::Gen g(6);
  const MatrixXd x = g.matrix(2, 17), w = g.matrix(3, 2 * 5), b = g.matrix(3, 1);
  auto geo = ad::ConvGeometry::conv1d(5, 3, 2, 2);
  auto y = ad::conv2d(ad::constant<double>(x), ad::constant<double>(w), ad::constant<double>(b), geo).value();
  const Eigen::Index out = (17 + 4 - 5) / 3 + 1;
  REQUIRE(y.cols() == out);
  for (Eigen::Index co = 0; co < 3; ++co) {
    for (Eigen::Index t = 0; t < out; ++t) {
      double acc = b(co);
      for (Eigen::Index ci = 0; ci < 2; ++ci) {
        for (Eigen::Index k = 0; k < 5; ++k) {
          const Eigen::Index i = t * 3 - 2 + k;
          if (i >= 0 && i < 17) acc += w(co, ci * 5 + k) * x(ci, i);
        }
      }
      CHECK(y(co, t) == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("LSTM matches finite differences") {
  testing::Gen g(7);
  const Eigen::Index in = 3, hidden = 4, steps = 6;
  auto x = param(g, in, steps);
  auto wi = param(g, 4 * hidden, in), wh = param(g, 4 * hidden, hidden), b = param(g, 4 * hidden, 1);
  auto r = testing::check_gradient({x, wi, wh, b}, [&] { return probe(ad::lstm(x, wi, wh, b), 14); });
  CHECK(r.relative_error < 1e-6);
}

TEST_CASE("STFT magnitude and log-mel match finite differences") {
  testing::Gen g(8);
  auto x = param(g, 1, 64, 0.3);
  auto r = testing::check_gradient({x}, [&] { return probe(ad::stft_magnitude(x, 16, 8), 15); });
  CHECK(r.relative_error < 1e-6);
  const MatrixXd fb = dsp::mel_filterbank(4, 16, 16000.0, 0.0, 8000.0);
  auto r2 = testing::check_gradient({x}, [&] { return probe(ad::log_mel(x, fb, 16, 8, 1e-5), 16); });
  CHECK(r2.relative_error < 1e-6);
}

TEST_CASE("STFT magnitude agrees with a direct DFT") {
  testing::Gen g(9);
  const MatrixXd x = g.matrix(1, 40);
  auto mag = ad::stft_magnitude(ad::constant<double>(x), 16, 8).value();
  const auto win = dsp::hann_window<double>(16);
  REQUIRE(mag.cols() == 4);
  for (Eigen::Index f = 0; f < 4; ++f) {
    for (Eigen::Index k = 0; k <= 8; ++k) {
      double re = 0, im = 0;
      for (Eigen::Index n = 0; n < 16; ++n) {
        const double a = -2.0 * dsp::kPi * k * n / 16.0;
        re += x(0, f * 8 + n) * win(n) * std::cos(a);
        im += x(0, f * 8 + n) * win(n) * std::sin(a);
      }
      CHECK(mag(k, f) == doctest::Approx(std::sqrt(re * re + im * im + 1e-9)).epsilon(1e-10));
    }
  }
}

TEST_CASE("no graph is recorded under NoGradGuard") {
  Var<double> a(MatrixXd::Ones(2, 2), true);
  ad::NoGradGuard guard;
  auto y = ad::tanh(ad::add(a, a));
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("AdamW takes a bias-corrected first step of size lr") {
  std::mt19937_64 rng(1);
  ad::ParameterStore<double> store;
  auto w = store.add("w", MatrixXd::Constant(1, 3, 1.0));
  ad::AdamWOptions opt;
  opt.weight_decay = 0.0;
  ad::AdamW<double> adam(store, opt);
  w.mutable_grad() = (MatrixXd(1, 3) << 2.0, -0.5, 0.0).finished();
  adam.step(0.1);
  CHECK(w.value()(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(w.value()(0, 1) == doctest::Approx(1.1).epsilon(1e-6));
  CHECK(w.value()(0, 2) == doctest::Approx(1.0));
}

TEST_CASE("parameter names must be unique") {
  ad::ParameterStore<double> store;
  store.add("a", MatrixXd::Zero(1, 1));
  CHECK_THROWS_AS(store.add("a", MatrixXd::Zero(1, 1)), std::logic_error);
}
