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

#include "adast/masks.hpp"
#include "adast/ops.hpp"
#include "doctest.h"
#include "support/mask_oracle.hpp"

using adast::MaskBlock;
using adast::MaskMatrix;
using adast::PadList;

namespace {
constexpr float N = adast::kMaskNeg;
}

TEST_CASE("build_stma_mask: examples") {
  auto m = adast::build_stma_mask(2, 2, PadList(2, false), PadList(2, false));
  CHECK(m.values() == std::vector<float>{0, 0, N, N, 0, 0, N, N, 0, 0, 0, N, 0, 0, 0, 0});

  auto one = adast::build_stma_mask(1, 1, {false}, {false});
  CHECK(one.values() == std::vector<float>{0, N, 0, 0});

  PadList s_pad{false, false, true};
  PadList t_pad{false, false};
  auto padded = adast::build_stma_mask(3, 2, s_pad, t_pad);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(padded.at(i, j) == oracle::stma_rule(3, s_pad, t_pad, i, j));
    }
    CHECK(padded.at(i, 2) == N);
  }
  CHECK(padded.block(MaskBlock::kTT) == std::vector<float>{0, N, 0, 0});
}

TEST_CASE("build_stma_mask: block shapes") {
  auto m = adast::build_stma_mask(3, 2, PadList(3, false), PadList(2, false));
  CHECK(m.block_rows(MaskBlock::kSS) == 3);
  CHECK(m.block_cols(MaskBlock::kST) == 2);
  CHECK(m.block_rows(MaskBlock::kTS) == 2);
  CHECK(m.block_cols(MaskBlock::kTS) == 3);
  CHECK(m.block(MaskBlock::kTT).size() == 4);
}

TEST_CASE("build_stma_mask: errors") {
  CHECK_THROWS_AS(adast::build_stma_mask(2, 1, {true, true}, {false}), adast::ValidationError);
  CHECK_THROWS_AS(adast::build_stma_mask(2, 2, {false, false}, {true, true}), adast::ValidationError);
  CHECK_THROWS_AS(adast::build_stma_mask(2, 1, {false}, {false}), adast::DimensionError);
  CHECK_THROWS_AS(adast::build_stma_mask(0, 1, {}, {false}), adast::ValidationError);
}

TEST_CASE("build_stma_mask: padded target rows are self-visible only") {
  auto m = adast::build_stma_mask(2, 3, PadList(2, false), {false, false, true});
  CHECK(m.at(4, 4) == 0.0f);
  CHECK(m.at(4, 2) == N);
  CHECK(m.at(4, 3) == N);
  CHECK(m.at(3, 4) == N);
}

TEST_CASE("build_stma_mask: invariants hold exhaustively for S,T <= 6") {
  for (std::size_t s = 1; s <= 6; ++s) {
    for (std::size_t t = 1; t <= 6; ++t) {
      for (const auto& sp : oracle::pad_patterns(s, 2)) {
        for (const auto& tp : oracle::pad_patterns(t, 2)) {
          const auto m = adast::build_stma_mask(s, t, sp, tp);
          const std::string err = oracle::check_stma_invariants(m, sp, tp);
          if (!err.empty()) FAIL(err);
        }
      }
    }
  }
}

TEST_CASE("masked softmax gives negligible weight at NEG entries") {
  adast::Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto t = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const auto sps = oracle::pad_patterns(s, 2);
    const auto tps = oracle::pad_patterns(t, 2);
    const auto& sp = sps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(sps.size()) - 1))];
    const auto& tp = tps[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(tps.size()) - 1))];
    const auto m = adast::build_stma_mask(s, t, sp, tp);
    const std::size_t n = m.size();
    std::vector<float> scores(n * n);
    for (std::size_t k = 0; k < n * n; ++k) scores[k] = static_cast<float>(rng.uniform(-20, 20)) + m.values()[k];
    auto p = adast::ops::softmax_lastdim(adast::Tensor<float>({n, n}, scores));
    for (std::size_t k = 0; k < n * n; ++k) {
      if (m.values()[k] == N) CHECK(p.data()[k] < 1e-7f);
      CHECK(std::isfinite(p.data()[k]));
    }
  }
}

TEST_CASE("build_causal_mask: examples") {
  CHECK(adast::build_causal_mask(3, PadList(3, false)).values() == std::vector<float>{0, N, N, 0, 0, N, 0, 0, 0});
  CHECK(adast::build_causal_mask(1, {false}).values() == std::vector<float>{0});
  auto m = adast::build_causal_mask(4, {false, false, false, true});
  for (std::size_t i = 0; i < 3; ++i) CHECK(m.at(i, 3) == N);
  CHECK(m.at(3, 3) == 0.0f);
  CHECK(m.at(3, 0) == N);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j <= i; ++j) CHECK(m.at(i, j) == 0.0f);
  }
  CHECK_THROWS_AS(adast::build_causal_mask(0, {}), adast::ValidationError);
  CHECK_THROWS_AS(adast::build_causal_mask(2, {false}), adast::DimensionError);
}

TEST_CASE("build_padding_mask: examples") {
  CHECK(adast::build_padding_mask(2, {false, false}) == std::vector<float>{0, 0});
  CHECK(adast::build_padding_mask(2, {false, true}) == std::vector<float>{0, N});
  // Ragged lengths {3, 1} padded to 3.
  const std::vector<std::size_t> lengths{3, 1};
  std::vector<std::vector<float>> got;
  for (auto len : lengths) {
    PadList pad(3);
    for (std::size_t j = 0; j < 3; ++j) pad[j] = j >= len;
    got.push_back(adast::build_padding_mask(3, pad));
  }
  CHECK(got[0] == std::vector<float>{0, 0, 0});
  CHECK(got[1] == std::vector<float>{0, N, N});
}

TEST_CASE("stack and key-padding masks broadcast per batch element") {
  auto a = adast::build_stma_mask(1, 1, {false}, {false});
  auto b = adast::build_stma_mask(2, 0, {false, true}, {});
  CHECK_THROWS_AS(adast::stack_masks({a, adast::build_stma_mask(1, 2, {false}, {false, false})}),
                  adast::DimensionError);
  auto stacked = adast::stack_masks({a, b});
  CHECK(stacked.batch == 2);
  CHECK(stacked.row(1, 0)[1] == N);
  auto kp = adast::key_padding_mask(3, {{false, true}, {false, false}});
  CHECK(kp.rows == 3);
  CHECK(kp.row(0, 2)[1] == N);
  CHECK(kp.row(1, 2)[1] == 0.0f);
}
