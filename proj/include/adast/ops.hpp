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

#include <cstdint>
#include <span>
#include <vector>

#include "adast/rng.hpp"
#include "adast/tensor.hpp"

namespace adast {

// Additive attention mask over [batch, rows, cols]. A batch extent of 1
// broadcasts across the attention batch. Values are 0 (visible) or a large
// finite negative (hidden).
struct AttentionMask {
  std::size_t batch = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  bool empty() const { return values.empty(); }
  const float* row(std::size_t b, std::size_t i) const {
    return values.data() + ((batch == 1 ? 0 : b) * rows + i) * cols;
  }
};

// Per-thread instrumentation of the attention kernel.
struct AttentionCounters {
  std::uint64_t key_reads = 0;  // (query row, head, key) triples scored
};
AttentionCounters& attention_counters();

// One contiguous run of keys/values for the row attention kernel. Rows are
// `stride` elements apart; `mask` (optional) holds one additive value per key.
template <typename T>
struct KeySegment {
  const T* keys = nullptr;
  const T* values = nullptr;
  std::size_t count = 0;
  std::size_t stride = 0;
  const float* mask = nullptr;
};

// softmax(q.k * scale + mask) . v for one query row and one head spanning
// columns [offset, offset + head_dim). Keys are scored in segment order.
// `probs` receives the weights (length = total keys). Shared by the tracked
// attention op and the incremental decoder so both produce identical bits.
template <typename T>
void attend_row(const T* query, std::span<const KeySegment<T>> segments, std::size_t offset,
                std::size_t head_dim, T scale, T* probs, T* out);

namespace ops {

// a + b. `b` may equal a's shape or a trailing suffix of it (broadcast).
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> relu(const Tensor<T>& a);

// a: [..., m, k]; b: [k, n] (shared across the batch) or [..., k, n].
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// a: [..., m, k]; b: [n, k]. Computes a . b^T.
template <typename T> Tensor<T> matmul_transposed(const Tensor<T>& a, const Tensor<T>& b);
// x: [..., in]; weight: [in, out]; bias: [out] or undefined.
template <typename T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <typename T> Tensor<T> softmax_lastdim(const Tensor<T>& x);
template <typename T> Tensor<T> log_softmax_lastdim(const Tensor<T>& x);
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, double eps);

template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
// sum_i x_i * w_i with constant weights.
template <typename T> Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

// Multi-head scaled dot-product attention. q: [..., Lq, d]; k, v: [..., Lk, d]
// with equal leading extents. Head h uses columns [h*d/heads, (h+1)*d/heads).
// Output [..., Lq, d] is the head-concatenated result.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const AttentionMask& mask, std::size_t n_heads, T scale);

// table: [V, d]; ids: flat row indices; lead: output leading shape (product = ids.size()).
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids, const Shape& lead);

// Concatenate along axis -2. Leading and trailing extents must agree.
template <typename T> Tensor<T> concat_rows(const Tensor<T>& a, const Tensor<T>& b);
// Rows [start, start + count) along axis -2.
template <typename T> Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Channels-last valid convolution. x: [B, H, W, Cin]; weight: [kh, kw, Cin, Cout];
// bias: [Cout]. Output: [B, (H-kh)/stride+1, (W-kw)/stride+1, Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride);

// Inverted dropout. Identity when p == 0.
template <typename T> Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng);

// x: [B, L, d] -> [B, d], pooling over rows with pad[b][i] == false.
template <typename T>
Tensor<T> masked_mean_rows(const Tensor<T>& x, const std::vector<std::vector<bool>>& pad);
template <typename T>
Tensor<T> masked_max_rows(const Tensor<T>& x, const std::vector<std::vector<bool>>& pad);

}  // namespace ops
}  // namespace adast
