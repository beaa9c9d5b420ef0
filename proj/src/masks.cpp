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

#include "adast/masks.hpp"

#include <algorithm>
#include <string>

namespace adast {

namespace {

void check_pad(const char* what, std::size_t len, const PadList& pad) {
  if (pad.size() != len) {
    throw DimensionError(std::string(what) + " pad list has " + std::to_string(pad.size()) +
                         " entries for length " + std::to_string(len));
  }
  if (len > 0 && std::all_of(pad.begin(), pad.end(), [](bool p) { return p; })) {
    throw ValidationError(std::string(what) + " sequence is entirely padding");
  }
}

}  // namespace

MaskMatrix::MaskMatrix(std::size_t s_len, std::size_t t_len, std::vector<float> values)
    : s_len_(s_len), t_len_(t_len), values_(std::move(values)) {
  if (values_.size() != size() * size()) {
    throw DimensionError("mask values do not form a " + std::to_string(size()) + "x" + std::to_string(size()) +
                         " matrix");
  }
}

std::size_t MaskMatrix::block_rows(MaskBlock block) const {
  return (block == MaskBlock::kSS || block == MaskBlock::kST) ? s_len_ : t_len_;
}

std::size_t MaskMatrix::block_cols(MaskBlock block) const {
  return (block == MaskBlock::kSS || block == MaskBlock::kTS) ? s_len_ : t_len_;
}

std::vector<float> MaskMatrix::block(MaskBlock block) const {
  const std::size_t r0 = (block == MaskBlock::kSS || block == MaskBlock::kST) ? 0 : s_len_;
  const std::size_t c0 = (block == MaskBlock::kSS || block == MaskBlock::kTS) ? 0 : s_len_;
  const std::size_t rows = block_rows(block), cols = block_cols(block);
  std::vector<float> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = at(r0 + i, c0 + j);
  }
  return out;
}

MaskMatrix MaskMatrix::assemble(std::size_t s_len, std::size_t t_len, const std::vector<float>& ss,
                                const std::vector<float>& st, const std::vector<float>& ts,
                                const std::vector<float>& tt) {
  if (ss.size() != s_len * s_len || st.size() != s_len * t_len || ts.size() != t_len * s_len ||
      tt.size() != t_len * t_len) {
    throw DimensionError("mask blocks do not match S=" + std::to_string(s_len) + ", T=" + std::to_string(t_len));
  }
  const std::size_t n = s_len + t_len;
  std::vector<float> v(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float x;
      if (i < s_len) {
        x = j < s_len ? ss[i * s_len + j] : st[i * t_len + (j - s_len)];
      } else {
        x = j < s_len ? ts[(i - s_len) * s_len + j] : tt[(i - s_len) * t_len + (j - s_len)];
      }
      v[i * n + j] = x;
    }
  }
  return MaskMatrix(s_len, t_len, std::move(v));
}

MaskMatrix build_stma_mask(std::size_t s_len, std::size_t t_len, const PadList& s_pad, const PadList& t_pad) {
  if (s_len == 0) throw ValidationError("speech-text mask needs at least one acoustic position");
  check_pad("acoustic", s_len, s_pad);
  check_pad("target", t_len, t_pad);
  const std::size_t n = s_len + t_len;
  std::vector<float> v(n * n, kMaskNeg);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < s_len; ++j) {
      if (!s_pad[j]) v[i * n + j] = 0.0f;  // M_SS and M_TS
    }
  }
  for (std::size_t i = 0; i < t_len; ++i) {
    float* row = v.data() + (s_len + i) * n + s_len;
    if (t_pad[i]) {
      row[i] = 0.0f;
      continue;
    }
    for (std::size_t j = 0; j <= i; ++j) {
      if (!t_pad[j]) row[j] = 0.0f;
    }
  }
  return MaskMatrix(s_len, t_len, std::move(v));
}

MaskMatrix build_causal_mask(std::size_t t_len, const PadList& t_pad) {
  if (t_len == 0) throw ValidationError("causal mask needs at least one position");
  check_pad("target", t_len, t_pad);
  std::vector<float> v(t_len * t_len, kMaskNeg);
  for (std::size_t i = 0; i < t_len; ++i) {
    if (t_pad[i]) {
      v[i * t_len + i] = 0.0f;
      continue;
    }
    for (std::size_t j = 0; j <= i; ++j) {
      if (!t_pad[j]) v[i * t_len + j] = 0.0f;
    }
  }
  return MaskMatrix(0, t_len, std::move(v));
}

std::vector<float> build_padding_mask(std::size_t s_len, const PadList& s_pad) {
  if (s_len == 0) throw ValidationError("padding mask needs at least one position");
  check_pad("key", s_len, s_pad);
  std::vector<float> v(s_len);
  for (std::size_t j = 0; j < s_len; ++j) v[j] = s_pad[j] ? kMaskNeg : 0.0f;
  return v;
}

AttentionMask stack_masks(const std::vector<MaskMatrix>& masks) {
  AttentionMask out;
  if (masks.empty()) return out;
  const std::size_t n = masks.front().size();
  out.batch = masks.size();
  out.rows = n;
  out.cols = n;
  out.values.reserve(masks.size() * n * n);
  for (const auto& m : masks) {
    if (m.size() != n) throw DimensionError("stack_masks: masks differ in size");
    out.values.insert(out.values.end(), m.values().begin(), m.values().end());
  }
  return out;
}

AttentionMask key_padding_mask(std::size_t rows, const std::vector<PadList>& key_pad) {
  AttentionMask out;
  if (key_pad.empty()) return out;
  const std::size_t cols = key_pad.front().size();
  out.batch = key_pad.size();
  out.rows = rows;
  out.cols = cols;
  out.values.reserve(out.batch * rows * cols);
  for (const auto& pad : key_pad) {
    if (pad.size() != cols) throw DimensionError("key_padding_mask: ragged pad lists");
    const std::vector<float> row = build_padding_mask(cols, pad);
    for (std::size_t i = 0; i < rows; ++i) out.values.insert(out.values.end(), row.begin(), row.end());
  }
  return out;
}

}  // namespace adast
