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

#include "adast/layers.hpp"

#include <cmath>

namespace adast::layers {

namespace {

template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

// Treat rank-2 inputs as a batch of one.
template <typename T>
Tensor<T> as_batched(const Tensor<T>& x) {
  return x.rank() == 2 ? ops::reshape(x, Shape{1, x.dim(0), x.dim(1)}) : x;
}

template <typename T>
Tensor<T> unbatch_like(const Tensor<T>& y, const Tensor<T>& like) {
  return like.rank() == 2 ? ops::reshape(y, Shape{y.dim(1), y.dim(2)}) : y;
}

}  // namespace

template <typename T>
Linear<T> make_linear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  return {uniform_tensor<T>({in, out}, bound, rng), Tensor<T>::zeros({out}, true)};
}

template <typename T>
LayerNormParams<T> make_layer_norm(std::size_t d) {
  return {Tensor<T>::full({d}, T(1), true), Tensor<T>::zeros({d}, true)};
}

template <typename T>
AttentionParams<T> make_attention(std::size_t d_model, std::size_t n_heads, Rng& rng) {
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " + std::to_string(n_heads) +
                      " heads");
  }
  AttentionParams<T> p;
  p.query = make_linear<T>(d_model, d_model, rng);
  p.key = make_linear<T>(d_model, d_model, rng);
  p.value = make_linear<T>(d_model, d_model, rng);
  p.output = make_linear<T>(d_model, d_model, rng);
  p.n_heads = n_heads;
  return p;
}

template <typename T>
FeedForwardParams<T> make_feed_forward(std::size_t d_model, std::size_t d_ff, Rng& rng) {
  FeedForwardParams<T> p;
  p.inner = make_linear<T>(d_model, d_ff, rng);
  p.outer = make_linear<T>(d_ff, d_model, rng);
  return p;
}

template <typename T>
ModalityEmbedding<T> make_modality_embedding(std::size_t d_model, Rng& rng) {
  std::vector<T> v(2 * d_model);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d_model));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, sd));
  return {Tensor<T>({2, d_model}, std::move(v), true)};
}

std::size_t conv_output_length(std::size_t length) {
  if (length < 2) throw InputTooShortError(length, 2);
  return (length - 2) / 2 + 1;
}

std::size_t subsampled_length(std::size_t length) {
  if (length < 4) throw InputTooShortError(length, 4);
  return conv_output_length(conv_output_length(length));
}

template <typename T>
SubsamplerParams<T> make_subsampler(std::size_t feature_dim, std::size_t channels, std::size_t d_model, Rng& rng) {
  if (feature_dim < 4) throw ConfigError("feature_dim must be at least 4 for two stride-2 convolutions");
  if (channels == 0) throw ConfigError("subsampler needs at least one channel");
  SubsamplerParams<T> p;
  p.feature_dim = feature_dim;
  p.channels = channels;
  const double b1 = std::sqrt(6.0 / static_cast<double>(4 * 1 + 4 * channels));
  const double b2 = std::sqrt(6.0 / static_cast<double>(4 * channels + 4 * channels));
  p.conv1_weight = uniform_tensor<T>({2, 2, 1, channels}, b1, rng);
  p.conv1_bias = Tensor<T>::zeros({channels}, true);
  p.conv2_weight = uniform_tensor<T>({2, 2, channels, channels}, b2, rng);
  p.conv2_bias = Tensor<T>::zeros({channels}, true);
  p.projection = make_linear<T>(subsampled_length(feature_dim) * channels, d_model, rng);
  return p;
}

template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const AttentionMask& mask,
                    std::size_t d_k) {
  if (d_k == 0) throw DimensionError("attention: d_k must be positive");
  return ops::scaled_dot_attention(q, k, v, mask, 1, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d_k))));
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q_in, const Tensor<T>& kv_in, const AttentionParams<T>& params,
                               const AttentionMask& mask) {
  const Tensor<T> q = params.query(q_in);
  const Tensor<T> k = params.key(kv_in);
  const Tensor<T> v = params.value(kv_in);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(params.head_dim())));
  return params.output(ops::scaled_dot_attention(q, k, v, mask, params.n_heads, scale));
}

template <typename T>
Tensor<T> stma(const Tensor<T>& src, const Tensor<T>& tgt, const AttentionParams<T>& params,
               const MaskMatrix& mask) {
  if (src.dim(-2) == 0) throw ValidationError("stma: empty acoustic sequence");
  if (mask.s_len() != src.dim(-2) || mask.t_len() != tgt.dim(-2)) {
    throw DimensionError("stma: mask for S=" + std::to_string(mask.s_len()) + ", T=" + std::to_string(mask.t_len()) +
                         " applied to S=" + std::to_string(src.dim(-2)) + ", T=" + std::to_string(tgt.dim(-2)));
  }
  AttentionMask m{1, mask.size(), mask.size(), mask.values()};
  return stma_concat(ops::concat_rows(src, tgt), params, m);
}

template <typename T>
Tensor<T> stma_concat(const Tensor<T>& concat, const AttentionParams<T>& params, const AttentionMask& mask) {
  return multi_head_attention(concat, concat, params, mask);
}

template <typename T>
Tensor<T> multi_head_cross_attention(const Tensor<T>& q_seq, const Tensor<T>& kv_seq,
                                     const AttentionParams<T>& params, const AttentionMask& key_mask) {
  return multi_head_attention(q_seq, kv_seq, params, key_mask);
}

template <typename T>
Tensor<T> feed_forward(const Tensor<T>& x, const FeedForwardParams<T>& params) {
  return params.outer(ops::relu(params.inner(x)));
}

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t n, std::size_t d_model, std::size_t offset) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("sinusoidal positions need an even d_model, got " + std::to_string(d_model));
  }
  std::vector<T> v(n * d_model);
  for (std::size_t r = 0; r < n; ++r) {
    const double pos = static_cast<double>(r + offset);
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      v[r * d_model + 2 * i] = static_cast<T>(std::sin(angle));
      v[r * d_model + 2 * i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return Tensor<T>({n, d_model}, std::move(v));
}

template <typename T>
Tensor<T> add_modality_and_position(const Tensor<T>& src, const Tensor<T>& tgt_emb,
                                    const ModalityEmbedding<T>* modality, const PositionOptions& options) {
  const Tensor<T> s = as_batched(src);
  const Tensor<T> t = as_batched(tgt_emb);
  if (s.rank() != 3 || t.rank() != 3 || s.dim(0) != t.dim(0) || s.dim(2) != t.dim(2)) {
    throw DimensionError("add_modality_and_position: shapes " + shape_to_string(src.shape()) + " and " +
                         shape_to_string(tgt_emb.shape()) + " do not concatenate");
  }
  const std::size_t batch = s.dim(0), s_len = s.dim(1), t_len = t.dim(1), d = s.dim(2);
  if (!options.src_lengths.empty() && options.src_lengths.size() != batch) {
    throw DimensionError("add_modality_and_position: src_lengths does not match batch");
  }
  Tensor<T> x = ops::concat_rows(s, t);
  if (modality) {
    if (modality->table.rank() != 2 || modality->table.dim(0) != 2 || modality->table.dim(1) != d) {
      throw DimensionError("modality table must be [2, " + std::to_string(d) + "]");
    }
    std::vector<int> ids(batch * (s_len + t_len));
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < s_len + t_len; ++i) {
        ids[b * (s_len + t_len) + i] = i < s_len ? ModalityEmbedding<T>::kAcoustic : ModalityEmbedding<T>::kText;
      }
    }
    x = ops::add(x, ops::embedding(modality->table, ids, Shape{batch, s_len + t_len}));
  }
  if (options.include_positions) {
    std::vector<T> pe(batch * (s_len + t_len) * d);
    const Tensor<T> src_table = sinusoidal_positions<T>(s_len, d, 0);
    for (std::size_t b = 0; b < batch; ++b) {
      T* dst = pe.data() + b * (s_len + t_len) * d;
      std::copy(src_table.data().begin(), src_table.data().end(), dst);
      const std::size_t real_src = options.src_lengths.empty() ? s_len : options.src_lengths[b];
      const std::size_t offset = options.restart_at_text ? 0 : real_src;
      const Tensor<T> tgt_table = sinusoidal_positions<T>(t_len, d, offset);
      std::copy(tgt_table.data().begin(), tgt_table.data().end(), dst + s_len * d);
    }
    x = ops::add(x, Tensor<T>({batch, s_len + t_len, d}, std::move(pe)));
  }
  return src.rank() == 2 ? ops::reshape(x, Shape{s_len + t_len, d}) : x;
}

template <typename T>
Tensor<T> subsample(const Tensor<T>& features, const SubsamplerParams<T>& params) {
  const Tensor<T> f = as_batched(features);
  if (f.rank() != 3) throw DimensionError("subsample: features must be [B, L, F]");
  const std::size_t batch = f.dim(0), length = f.dim(1), fdim = f.dim(2);
  if (fdim != params.feature_dim) {
    throw DimensionError("subsample: feature dimension " + std::to_string(fdim) + " but the subsampler expects " +
                         std::to_string(params.feature_dim));
  }
  const std::size_t out_len = subsampled_length(length);
  Tensor<T> x = ops::reshape(f, Shape{batch, length, fdim, 1});
  x = ops::relu(ops::conv2d(x, params.conv1_weight, params.conv1_bias, SubsamplerParams<T>::kStride));
  x = ops::relu(ops::conv2d(x, params.conv2_weight, params.conv2_bias, SubsamplerParams<T>::kStride));
  x = ops::reshape(x, Shape{batch, out_len, x.dim(2) * x.dim(3)});
  return unbatch_like(params.projection(x), features);
}

template <typename T>
void append_parameters(const std::string& prefix, const Linear<T>& p, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + ".weight", p.weight});
  if (p.bias.defined()) out.push_back({prefix + ".bias", p.bias});
}

template <typename T>
void append_parameters(const std::string& prefix, const LayerNormParams<T>& p, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + ".gain", p.gain});
  out.push_back({prefix + ".bias", p.bias});
}

template <typename T>
void append_parameters(const std::string& prefix, const AttentionParams<T>& p, std::vector<NamedParameter<T>>& out) {
  append_parameters(prefix + ".query", p.query, out);
  append_parameters(prefix + ".key", p.key, out);
  append_parameters(prefix + ".value", p.value, out);
  append_parameters(prefix + ".output", p.output, out);
}

template <typename T>
void append_parameters(const std::string& prefix, const FeedForwardParams<T>& p,
                       std::vector<NamedParameter<T>>& out) {
  append_parameters(prefix + ".inner", p.inner, out);
  append_parameters(prefix + ".outer", p.outer, out);
}

template <typename T>
void append_parameters(const std::string& prefix, const SubsamplerParams<T>& p, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + ".conv1.weight", p.conv1_weight});
  out.push_back({prefix + ".conv1.bias", p.conv1_bias});
  out.push_back({prefix + ".conv2.weight", p.conv2_weight});
  out.push_back({prefix + ".conv2.bias", p.conv2_bias});
  append_parameters(prefix + ".projection", p.projection, out);
}

#define ADAST_INSTANTIATE_LAYERS(T)                                                                          \
  template Linear<T> make_linear<T>(std::size_t, std::size_t, Rng&);                                         \
  template LayerNormParams<T> make_layer_norm<T>(std::size_t);                                               \
  template AttentionParams<T> make_attention<T>(std::size_t, std::size_t, Rng&);                             \
  template FeedForwardParams<T> make_feed_forward<T>(std::size_t, std::size_t, Rng&);                        \
  template ModalityEmbedding<T> make_modality_embedding<T>(std::size_t, Rng&);                               \
  template SubsamplerParams<T> make_subsampler<T>(std::size_t, std::size_t, std::size_t, Rng&);              \
  template Tensor<T> attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const AttentionMask&,   \
                               std::size_t);                                                                 \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&,     \
                                          const AttentionMask&);                                             \
  template Tensor<T> stma(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&, const MaskMatrix&); \
  template Tensor<T> stma_concat(const Tensor<T>&, const AttentionParams<T>&, const AttentionMask&);         \
  template Tensor<T> multi_head_cross_attention(const Tensor<T>&, const Tensor<T>&, const AttentionParams<T>&, \
                                                const AttentionMask&);                                       \
  template Tensor<T> feed_forward(const Tensor<T>&, const FeedForwardParams<T>&);                            \
  template Tensor<T> sinusoidal_positions<T>(std::size_t, std::size_t, std::size_t);                         \
  template Tensor<T> add_modality_and_position(const Tensor<T>&, const Tensor<T>&,                           \
                                               const ModalityEmbedding<T>*, const PositionOptions&);         \
  template Tensor<T> subsample(const Tensor<T>&, const SubsamplerParams<T>&);                                \
  template void append_parameters(const std::string&, const Linear<T>&, std::vector<NamedParameter<T>>&);    \
  template void append_parameters(const std::string&, const LayerNormParams<T>&,                             \
                                  std::vector<NamedParameter<T>>&);                                          \
  template void append_parameters(const std::string&, const AttentionParams<T>&,                             \
                                  std::vector<NamedParameter<T>>&);                                          \
  template void append_parameters(const std::string&, const FeedForwardParams<T>&,                           \
                                  std::vector<NamedParameter<T>>&);                                          \
  template void append_parameters(const std::string&, const SubsamplerParams<T>&,                            \
                                  std::vector<NamedParameter<T>>&);

ADAST_INSTANTIATE_LAYERS(float)
ADAST_INSTANTIATE_LAYERS(double)

}  // namespace adast::layers
