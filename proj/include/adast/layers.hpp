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
#include <string>
#include <vector>

#include "adast/masks.hpp"
#include "adast/ops.hpp"
#include "adast/rng.hpp"
#include "adast/tensor.hpp"

namespace adast {

inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
  Tensor<T> operator()(const Tensor<T>& x) const { return ops::linear(x, weight, bias); }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
  Tensor<T> operator()(const Tensor<T>& x) const { return ops::layer_norm(x, gain, bias, kLayerNormEps); }
};

// Shared Q/K/V/O projections of one multi-head attention sublayer.
template <typename T>
struct AttentionParams {
  Linear<T> query;
  Linear<T> key;
  Linear<T> value;
  Linear<T> output;
  std::size_t n_heads = 1;

  std::size_t d_model() const { return query.weight.dim(0); }
  std::size_t head_dim() const { return d_model() / n_heads; }
};

template <typename T>
struct FeedForwardParams {
  Linear<T> inner;  // d_model -> d_ff
  Linear<T> outer;  // d_ff -> d_model
};

// Row 0 marks acoustic rows, row 1 marks text rows.
template <typename T>
struct ModalityEmbedding {
  static constexpr int kAcoustic = 0;
  static constexpr int kText = 1;
  Tensor<T> table;  // [2, d_model]
};

// Two stride-2 2x2 convolutions (channels-last) followed by a projection of
// the flattened (frequency x channel) map to d_model.
template <typename T>
struct SubsamplerParams {
  static constexpr std::size_t kKernel = 2;
  static constexpr std::size_t kStride = 2;
  Tensor<T> conv1_weight;  // [2, 2, 1, C]
  Tensor<T> conv1_bias;    // [C]
  Tensor<T> conv2_weight;  // [2, 2, C, C]
  Tensor<T> conv2_bias;    // [C]
  Linear<T> projection;    // [F'' * C, d_model]
  std::size_t feature_dim = 0;
  std::size_t channels = 0;
};

namespace layers {

// Xavier-uniform weights, zero bias.
template <typename T> Linear<T> make_linear(std::size_t in, std::size_t out, Rng& rng);
template <typename T> LayerNormParams<T> make_layer_norm(std::size_t d);
template <typename T> AttentionParams<T> make_attention(std::size_t d_model, std::size_t n_heads, Rng& rng);
template <typename T> FeedForwardParams<T> make_feed_forward(std::size_t d_model, std::size_t d_ff, Rng& rng);
template <typename T> ModalityEmbedding<T> make_modality_embedding(std::size_t d_model, Rng& rng);
template <typename T>
SubsamplerParams<T> make_subsampler(std::size_t feature_dim, std::size_t channels, std::size_t d_model, Rng& rng);

// Length after one kernel-2 stride-2 convolution.
std::size_t conv_output_length(std::size_t length);
// Length after both subsampling convolutions: floor((floor((L-2)/2)+1-2)/2)+1.
std::size_t subsampled_length(std::size_t length);

// softmax(q k^T / sqrt(d_k) + mask) v with a single head.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const AttentionMask& mask,
                    std::size_t d_k);

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& kv_in, const AttentionParams<T>& params,
                               const AttentionMask& mask);

// Speech-text mixed attention: one attention over Concat(src, tgt) with the
// shared projections and the four-block mask. Returns [..., S + T, d].
template <typename T>
Tensor<T> stma(const Tensor<T>& src, const Tensor<T>& tgt, const AttentionParams<T>& params,
               const MaskMatrix& mask);
// Batched form over an already-concatenated sequence [B, S + T, d].
template <typename T>
Tensor<T> stma_concat(const Tensor<T>& concat, const AttentionParams<T>& params, const AttentionMask& mask);

template <typename T>
Tensor<T> multi_head_cross_attention(const Tensor<T>& q_seq, const Tensor<T>& kv_seq,
                                     const AttentionParams<T>& params, const AttentionMask& key_mask);

// outer(relu(inner(x))) position-wise.
template <typename T> Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& params);

// PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(p / 10000^(2i/d)) for p = offset .. offset+n-1.
template <typename T> Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d_model, std::size_t offset);

struct PositionOptions {
  // Text rows count from 0 instead of continuing after the acoustic rows.
  bool restart_at_text = false;
  // Test hook: skip the positional table entirely.
  bool include_positions = true;
  // Real (non-padded) acoustic rows per batch element; text positions continue
  // from this count. Empty means "all S rows are real".
  std::vector<std::size_t> src_lengths;
};

// Concatenate acoustic rows and text rows, adding the modality embedding
// (skipped when `modality` is null) and sinusoidal positions.
// src: [B, S, d] or [S, d]; tgt_emb: same rank with T rows.
template <typename T>
Tensor<T> add_modality_and_position(const Tensor<T>& src, const Tensor<T>& tgt_emb,
                                    const ModalityEmbedding<T>* modality, const PositionOptions& options = {});

// features: [B, L, F] or [L, F]; output [B, L', d_model] (or [L', d_model]).
template <typename T> Tensor<T> subsample(const Tensor<T>& features, const SubsamplerParams<T>& params);

template <typename T>
void append_parameters(const std::string& prefix, const Linear<T>& p, std::vector<NamedParameter<T>>& out);
template <typename T>
void append_parameters(const std::string& prefix, const LayerNormParams<T>& p, std::vector<NamedParameter<T>>& out);
template <typename T>
void append_parameters(const std::string& prefix, const AttentionParams<T>& p, std::vector<NamedParameter<T>>& out);
template <typename T>
void append_parameters(const std::string& prefix, const FeedForwardParams<T>& p,
                       std::vector<NamedParameter<T>>& out);
template <typename T>
void append_parameters(const std::string& prefix, const SubsamplerParams<T>& p, std::vector<NamedParameter<T>>& out);

}  // namespace layers
}  // namespace adast
