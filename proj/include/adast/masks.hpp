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

#pragma once

#include <cstddef>
#include <vector>

#include "adast/ops.hpp"

namespace adast {

using PadList = std::vector<bool>;

// Additive value for hidden positions. Finite so that max-subtracted softmax
// never computes (-inf) - (-inf); exp(kMaskNeg - max) underflows to exactly 0.
inline constexpr float kMaskNeg = -1e9f;

enum class MaskBlock { kSS, kST, kTS, kTT };

// Additive mask over a concatenated (acoustic ++ target) sequence of length
// S + T, row-major. Row = query, column = key.
//
//   [ M_SS  M_ST ]   M_SS: acoustic -> acoustic    M_ST: acoustic -> target
//   [ M_TS  M_TT ]   M_TS: target -> acoustic      M_TT: target -> target
class MaskMatrix {
 public:
  MaskMatrix(std::size_t s_len, std::size_t t_len, std::vector<float> values);

  std::size_t s_len() const { return s_len_; }
  std::size_t t_len() const { return t_len_; }
  std::size_t size() const { return s_len_ + t_len_; }
  float at(std::size_t row, std::size_t col) const { return values_[row * size() + col]; }
  const std::vector<float>& values() const { return values_; }

  std::size_t block_rows(MaskBlock block) const;
  std::size_t block_cols(MaskBlock block) const;
  // Row-major copy of one block.
  std::vector<float> block(MaskBlock block) const;
  static MaskMatrix assemble(std::size_t s_len, std::size_t t_len, const std::vector<float>& ss,
                             const std::vector<float>& st, const std::vector<float>& ts,
                             const std::vector<float>& tt);

  bool operator==(const MaskMatrix&) const = default;

 private:
  std::size_t s_len_;
  std::size_t t_len_;
  std::vector<float> values_;
};

// The decoder mask for speech-text mixed attention. Acoustic rows see every
// non-padded acoustic key and no target key; target rows see non-padded
// acoustic keys and non-padded target keys at or before their own position.
// Padded target rows see only themselves among targets. `t_len` may be 0
// (acoustic-only pass); `s_len` must be at least 1.
MaskMatrix build_stma_mask(std::size_t s_len, std::size_t t_len, const PadList& s_pad, const PadList& t_pad);

// Look-ahead mask as a MaskMatrix with no acoustic part (s_len = 0).
MaskMatrix build_causal_mask(std::size_t t_len, const PadList& t_pad);

// Key-padding row: 0 at real positions, kMaskNeg at padded ones.
std::vector<float> build_padding_mask(std::size_t s_len, const PadList& s_pad);

// Stack per-sequence masks of identical size into a batched AttentionMask.
AttentionMask stack_masks(const std::vector<MaskMatrix>& masks);
// Broadcast each key-padding row over `rows` queries.
AttentionMask key_padding_mask(std::size_t rows, const std::vector<PadList>& key_pad);

}  // namespace adast
