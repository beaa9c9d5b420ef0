// Copyright 2026 The AdaST-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <vector>

#include "adast/gradcheck.hpp"
#include "adast/ops.hpp"
#include "adast/tensor.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using adast::Rng;
using adast::Tensor;
namespace ops = adast::ops;

namespace {

Tensor<double> from_matrix(const oracle::Matrix& m, bool grad = false) {
  return Tensor<double>({m.size(), m.front().size()}, oracle::flatten(m), grad);
}

Tensor<double> random_tensor(adast::Shape shape, Rng& rng, bool grad = true, double scale = 1.0) {
  std::vector<double> v(adast::shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return Tensor<double>(std::move(shape), std::move(v), grad);
}

std::vector<double> to_vec(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul: identity and hand dot product") {
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  CHECK(to_vec(ops::matmul(a, eye)) == std::vector<double>{1, 2, 3, 4});

  Tensor<double> row({1, 2}, {1, 2});
  Tensor<double> col({2, 1}, {3, 4});
  CHECK(ops::matmul(row, col).item() == 11.0);
}

TEST_CASE("matmul: matches the triple-loop oracle on random shapes up to 16") {
  Rng rng(11);
  const auto a = oracle::random_matrix(3, 4, rng);
  const auto b = oracle::random_matrix(4, 2, rng);
  CHECK(oracle::max_abs_diff(to_vec(ops::matmul(from_matrix(a), from_matrix(b))),
                             oracle::flatten(oracle::matmul(a, b))) < 1e-6);

  for (int trial = 0; trial < 50; ++trial) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 16));
    const auto x = oracle::random_matrix(m, k, rng);
    const auto y = oracle::random_matrix(k, n, rng);
    const auto got = to_vec(ops::matmul(from_matrix(x), from_matrix(y)));
    const auto want = oracle::flatten(oracle::matmul(x, y));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-6 * std::max(1.0, std::abs(want[i])));
    }
  }
}

TEST_CASE("matmul: shape mismatch names both shapes") {
  Tensor<double> a = Tensor<double>::zeros({2, 3});
  Tensor<double> b = Tensor<double>::zeros({4, 2});
  try {
    (void)ops::matmul(a, b);
    FAIL("expected DimensionError");
  } catch (const adast::DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 2]") != std::string::npos);
  }
}

TEST_CASE("softmax_lastdim: examples") {
  auto half = ops::softmax_lastdim(Tensor<double>({2}, {0, 0}));
  CHECK(half.data()[0] == doctest::Approx(0.5));
  CHECK(half.data()[1] == doctest::Approx(0.5));

  auto big = ops::softmax_lastdim(Tensor<float>({2}, {1000.0f, 0.0f}));
  CHECK(std::isfinite(big.data()[0]));
  CHECK(big.data()[0] == doctest::Approx(1.0));
  CHECK(big.data()[1] == doctest::Approx(0.0));

  // exp(1), exp(2), exp(3) normalized by hand.
  const double s = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  auto three = ops::softmax_lastdim(Tensor<double>({3}, {1, 2, 3}));
  CHECK(three.data()[0] == doctest::Approx(std::exp(1.0) / s).epsilon(1e-12));
  CHECK(three.data()[0] == doctest::Approx(0.0900).epsilon(1e-3));
  CHECK(three.data()[1] == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(three.data()[2] == doctest::Approx(0.6652).epsilon(1e-3));

  CHECK_THROWS_AS(ops::softmax_lastdim(Tensor<double>::zeros({2, 0})), adast::DimensionError);
}

TEST_CASE("softmax_lastdim: rows sum to one for random finite inputs") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto cols = static_cast<std::size_t>(rng.uniform_int(1, 20));
    auto x = random_tensor({rows, cols}, rng, false, 50.0);
    auto y = ops::softmax_lastdim(x);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        CHECK(y.data()[r * cols + c] >= 0.0);
        s += y.data()[r * cols + c];
      }
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("layer_norm: examples and direct oracle") {
  auto ones = Tensor<double>::full({4}, 1.0);
  auto zeros = Tensor<double>::zeros({4});
  auto constant = ops::layer_norm(Tensor<double>::full({4}, 3.0), ones, zeros, 1e-5);
  for (double v : constant.data()) CHECK(v == 0.0);

  auto g2 = Tensor<double>::full({2}, 1.0);
  auto b2 = Tensor<double>::zeros({2});
  auto two = ops::layer_norm(Tensor<double>({2}, {1, 3}), g2, b2, 1e-12);
  CHECK(two.data()[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(two.data()[1] == doctest::Approx(1.0).epsilon(1e-9));

  Rng rng(3);
  auto x = random_tensor({4}, rng, false, 2.0);
  const auto want = oracle::layer_norm(to_vec(x), 1e-5);
  CHECK(oracle::max_abs_diff(to_vec(ops::layer_norm(x, ones, zeros, 1e-5)), want) < 1e-6);

  // Standardized rows have mean 0 and variance 1 before gain/bias.
  auto wide = random_tensor({3, 16}, rng, false, 5.0);
  auto g16 = Tensor<double>::full({16}, 1.0);
  auto b16 = Tensor<double>::zeros({16});
  auto y = ops::layer_norm(wide, g16, b16, 1e-12);
  for (std::size_t r = 0; r < 3; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 16; ++c) m += y.data()[r * 16 + c];
    m /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) v += (y.data()[r * 16 + c] - m) * (y.data()[r * 16 + c] - m);
    v /= 16.0;
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(v - 1.0) < 1e-5);
  }

  CHECK_THROWS_AS(ops::layer_norm(x, ones, zeros, 0.0), adast::ConfigError);
  CHECK_THROWS_AS(ops::layer_norm(x, ones, zeros, -1.0), adast::ConfigError);
}

TEST_CASE("backward: analytic gradients and accumulation") {
  auto x = Tensor<double>({3}, {1.0, -2.0, 0.5}, true);
  ops::sum(x).backward();
  for (double g : x.grad()) CHECK(g == 1.0);

  x.zero_grad();
  ops::sum(ops::mul(x, x)).backward();
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == -4.0);
  CHECK(x.grad()[2] == 1.0);

  // A second sweep without zeroing adds to the leaves.
  x.zero_grad();
  auto loss = ops::sum(ops::mul(x, x));
  loss.backward();
  loss.backward();
  CHECK(x.grad()[0] == 4.0);

  CHECK_THROWS_AS(ops::mul(x, x).backward(), adast::ContractError);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(21);
  auto w = random_tensor({4, 3}, rng);
  auto in = random_tensor({2, 4}, rng, false);
  auto f = [&] { return ops::sum(ops::relu(ops::matmul(in, w))); };
  auto g = [&] { return ops::sum(ops::softmax_lastdim(ops::matmul(in, w))); };
  const double a = 0.7, b = -1.3;

  w.zero_grad();
  f().backward();
  std::vector<double> gf(w.grad().begin(), w.grad().end());
  w.zero_grad();
  g().backward();
  std::vector<double> gg(w.grad().begin(), w.grad().end());
  w.zero_grad();
  ops::add(ops::scale(f(), a), ops::scale(g(), b)).backward();
  for (std::size_t i = 0; i < gf.size(); ++i) CHECK(std::abs(w.grad()[i] - (a * gf[i] + b * gg[i])) < 1e-6);
}

TEST_CASE("gradient_check: sum of squares is exact up to round-off") {
  Rng rng(1);
  auto p = random_tensor({5}, rng);
  auto report = adast::gradient_check([&] { return ops::sum(ops::mul(p, p)); }, {p});
  CHECK(report.max_rel_err < 1e-8);
  CHECK(report.worst_index < 5);
  CHECK(report.checked == 5);
}

TEST_CASE("gradient_check: rejects a non-deterministic function") {
  Rng rng(2);
  auto p = random_tensor({3}, rng);
  int calls = 0;
  auto f = [&] {
    ++calls;
    return ops::scale(ops::sum(p), 1.0 + 1e-3 * calls);
  };
  CHECK_THROWS_AS(adast::gradient_check(f, {p}), adast::DeterminismError);
}

TEST_CASE("gradient_check: every differentiable op at 64-bit") {
  Rng rng(99);
  auto a = random_tensor({2, 3, 4}, rng);
  auto b = random_tensor({2, 3, 4}, rng);
  auto bias = random_tensor({4}, rng);
  auto w = random_tensor({4, 5}, rng);
  auto wb = random_tensor({5}, rng);
  auto bt = random_tensor({2, 4, 5}, rng);
  auto wt = random_tensor({6, 4}, rng);
  auto gain = random_tensor({4}, rng);
  auto table = random_tensor({7, 4}, rng);
  auto img = random_tensor({2, 5, 6, 2}, rng);
  auto kernel = random_tensor({2, 2, 2, 3}, rng);
  auto kbias = random_tensor({3}, rng);
  std::vector<double> weights(24);
  for (auto& v : weights) v = rng.uniform(-1, 1);
  std::vector<double> w30(30);
  for (auto& v : w30) v = rng.uniform(-1, 1);
  std::vector<int> ids{0, 3, 6, 3, 1, 2};
  std::vector<std::vector<bool>> pad{{false, false, true}, {false, true, true}};

  struct Case {
    const char* name;
    std::function<Tensor<double>()> f;
    std::vector<Tensor<double>> params;
  };
  std::vector<Case> cases{
      {"add", [&] { return ops::sum(ops::mul(ops::add(a, b), a)); }, {a, b}},
      {"add broadcast", [&] { return ops::sum(ops::mul(ops::add(a, bias), a)); }, {a, bias}},
      {"sub", [&] { return ops::sum(ops::mul(ops::sub(a, b), b)); }, {a, b}},
      {"scale", [&] { return ops::sum(ops::mul(ops::scale(a, 1.7), a)); }, {a}},
      {"relu", [&] { return ops::sum(ops::mul(ops::relu(a), b)); }, {a, b}},
      {"matmul shared", [&] { return ops::sum(ops::relu(ops::matmul(a, w))); }, {a, w}},
      {"matmul batched", [&] { return ops::weighted_sum(ops::matmul(a, bt), std::span<const double>(w30)); },
       {a, bt}},
      {"matmul_transposed", [&] { auto y = ops::matmul_transposed(a, wt); return ops::sum(ops::mul(y, y)); }, {a, wt}},
      {"linear", [&] { return ops::sum(ops::mul(ops::linear(a, w, wb), ops::linear(a, w, wb))); }, {a, w, wb}},
      {"softmax", [&] { return ops::weighted_sum(ops::softmax_lastdim(a), std::span<const double>(weights)); }, {a}},
      {"log_softmax", [&] { return ops::weighted_sum(ops::log_softmax_lastdim(a), std::span<const double>(weights)); },
       {a}},
      {"layer_norm", [&] { return ops::weighted_sum(ops::layer_norm(a, gain, bias, 1e-5),
                                                     std::span<const double>(weights)); },
       {a, gain, bias}},
      {"mean", [&] { return ops::mean(ops::mul(a, a)); }, {a}},
      {"embedding", [&] { return ops::sum(ops::mul(ops::embedding(table, ids, {2, 3}), a.detach())); }, {table}},
      {"concat/slice", [&] { return ops::sum(ops::mul(ops::slice_rows(ops::concat_rows(a, b), 1, 3),
                                                      ops::slice_rows(ops::concat_rows(b, a), 2, 3))); },
       {a, b}},
      {"conv2d", [&] { return ops::sum(ops::relu(ops::conv2d(img, kernel, kbias, 2))); }, {img, kernel, kbias}},
      {"masked mean", [&] { return ops::sum(ops::mul(ops::masked_mean_rows(a, pad), ops::masked_mean_rows(a, pad))); },
       {a}},
      {"masked max", [&] { return ops::sum(ops::mul(ops::masked_max_rows(a, pad), ops::masked_max_rows(a, pad))); },
       {a}},
  };
  for (auto& c : cases) {
    const std::string name = c.name;
    CAPTURE(name);
    auto report = adast::gradient_check(c.f, c.params);
    CAPTURE(report.max_abs_err);
    CAPTURE(report.analytic);
    CAPTURE(report.numeric);
    CHECK(report.max_rel_err < 1e-4);
  }
}

TEST_CASE("gradient_check: masked multi-head attention at 64-bit") {
  Rng rng(4);
  auto q = random_tensor({2, 3, 4}, rng);
  auto k = random_tensor({2, 5, 4}, rng);
  auto v = random_tensor({2, 5, 4}, rng);
  adast::AttentionMask mask{2, 3, 5, std::vector<float>(30, 0.0f)};
  mask.values[3] = -1e9f;
  mask.values[17] = -1e9f;
  std::vector<double> weights(24);
  for (auto& x : weights) x = rng.uniform(-1, 1);
  auto report = adast::gradient_check(
      [&] { return ops::weighted_sum(ops::scaled_dot_attention(q, k, v, mask, 2, 0.5), std::span<const double>(weights)); },
      {q, k, v});
  CHECK(report.max_rel_err < 1e-4);
}

TEST_CASE("dropout: identity at p=0, inverted scaling otherwise") {
  Rng rng(8);
  auto x = Tensor<double>::full({1000}, 1.0);
  CHECK(ops::dropout(x, 0.0, rng).node() == x.node());
  auto y = ops::dropout(x, 0.5, rng);
  std::size_t kept = 0;
  for (double v : y.data()) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v != 0.0;
  }
  CHECK(kept > 400);
  CHECK(kept < 600);
  CHECK_THROWS_AS(ops::dropout(x, 1.0, rng), adast::ConfigError);
}

TEST_CASE("no-grad guard suppresses graph recording") {
  auto p = Tensor<double>({2}, {1, 2}, true);
  {
    adast::NoGradGuard guard;
    auto y = ops::scale(p, 2.0);
    CHECK_FALSE(y.requires_grad());
  }
  CHECK(ops::scale(p, 2.0).requires_grad());
}
