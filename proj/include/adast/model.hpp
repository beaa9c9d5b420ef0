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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adast/layers.hpp"
#include "adast/masks.hpp"
#include "adast/rng.hpp"
#include "adast/tensor.hpp"

namespace adast {

// Reserved token ids shared by every component.
inline constexpr int kPadId = 0;
inline constexpr int kEosId = 1;
inline constexpr int kBosId = 2;
inline constexpr int kFirstRealToken = 3;

enum class Variant { kBaseline, kAdast, kStaticAblation };

std::string variant_name(Variant v);
// Throws ConfigError listing the valid names.
Variant parse_variant(const std::string& name);

struct ModelConfig {
  std::size_t n_cnn_layers = 2;
  std::size_t n_enc_layers = 12;
  std::size_t n_dec_layers = 10;
  std::size_t d_model = 256;
  std::size_t n_heads = 4;
  std::size_t d_ff = 1024;
  std::size_t vocab_size = 1000;
  std::size_t feature_dim = 80;
  std::size_t subsampler_channels = 64;
  double dropout = 0.0;
  Variant variant = Variant::kAdast;
  bool position_restart_at_text = false;
  bool use_modality_embedding = true;
  bool tie_output_embedding = false;
  // static_ablation only: start the per-layer memory refresh as an identity map.
  bool zero_init_refresh = false;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct EncoderLayer {
  LayerNormParams<T> attn_norm;
  AttentionParams<T> self_attn;
  LayerNormParams<T> ffn_norm;
  FeedForwardParams<T> ffn;
};

// One decoder block. `attn` is causal self-attention for the baseline and the
// ablation, and speech-text mixed attention for AdaST. Cross-attention exists
// only for the baseline and the ablation; the memory refresh only for the ablation.
template <typename T>
struct DecoderLayer {
  LayerNormParams<T> attn_norm;
  AttentionParams<T> attn;
  std::optional<LayerNormParams<T>> cross_norm;
  std::optional<AttentionParams<T>> cross_attn;
  std::optional<LayerNormParams<T>> refresh_norm;
  std::optional<AttentionParams<T>> refresh_attn;
  LayerNormParams<T> ffn_norm;
  FeedForwardParams<T> ffn;
};

template <typename T>
struct EncoderOutput {
  Tensor<T> states;                // [B, S, d]
  std::vector<PadList> pad;        // [B][S]
  std::vector<std::size_t> lengths;  // non-padded rows per batch element
};

using TokenBatch = std::vector<std::vector<int>>;

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> components;  // subsampler, encoder, decoder, embeddings, output
  std::size_t total = 0;
  std::size_t component(const std::string& name) const;
};

template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  // Stable, ordered parameter list. Handles share storage with the model.
  std::vector<NamedParameter<T>> parameters() const;
  // Non-trained state saved with the parameters (feature normalization).
  std::vector<NamedParameter<T>> buffers() const;
  // Deep copy with independent storage.
  Model clone() const;

  // features: [B, L, F]; frame_pad: [B][L]. An output row is padded when any
  // frame in its receptive field is padded.
  EncoderOutput<T> encode(const Tensor<T>& features, const std::vector<PadList>& frame_pad,
                          const ForwardOptions& options = {}) const;

  // Teacher-forced logits [B, T, V] for the configured variant.
  Tensor<T> decode_train(const EncoderOutput<T>& enc, const TokenBatch& tgt_in, const std::vector<PadList>& tgt_pad,
                         const ForwardOptions& options = {}) const;

  Tensor<T> decode_train_baseline(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                  const std::vector<PadList>& tgt_pad, const ForwardOptions& options = {}) const;
  // `layer_states`, when given, receives the concatenated [B, S + T, d]
  // sequence after every decoder block.
  Tensor<T> decode_train_adast(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                               const std::vector<PadList>& tgt_pad, const ForwardOptions& options = {},
                               std::vector<Tensor<T>>* layer_states = nullptr) const;
  // Baseline decoder whose encoder memory is refreshed by one extra
  // self-attention sublayer before each decoder layer's cross-attention. The
  // refreshed memory never reads target states.
  Tensor<T> decode_train_static_ablation(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                         const std::vector<PadList>& tgt_pad,
                                         const ForwardOptions& options = {}) const;

  // Token embeddings scaled by sqrt(d_model): [B, T, d].
  Tensor<T> embed_targets(const TokenBatch& ids) const;
  // Final decoder norm and vocabulary projection.
  Tensor<T> project_logits(const Tensor<T>& hidden) const;
  // Ablation memories after each layer's refresh (one per decoder layer).
  std::vector<Tensor<T>> refreshed_memories(const EncoderOutput<T>& enc) const;

  // Global mean/variance normalization of input features, identity by
  // default: x' = (x - feature_mean) * feature_istd.
  Tensor<T> feature_mean;  // [F]
  Tensor<T> feature_istd;  // [F]
  SubsamplerParams<T> subsampler;
  std::vector<EncoderLayer<T>> encoder;
  LayerNormParams<T> encoder_norm;
  Tensor<T> token_embedding;  // [V, d]
  std::optional<ModalityEmbedding<T>> modality;
  std::vector<DecoderLayer<T>> decoder;
  LayerNormParams<T> decoder_norm;
  Linear<T> output;  // weight undefined when tied to token_embedding

 private:
  Tensor<T> sublayer_dropout(const Tensor<T>& x, const ForwardOptions& options) const;
  Tensor<T> normalize_features(const Tensor<T>& features) const;
  void check_variant(Variant expected) const;

  ModelConfig config_;
};

// Flat `key value` view of a ModelConfig, in a fixed order. Keys match the
// config-file and checkpoint-manifest spelling.
std::vector<std::pair<std::string, std::string>> model_config_entries(const ModelConfig& config);
// Sets one field from text. Returns false for an unknown key; throws
// ConfigError for a malformed value.
bool set_model_config_value(ModelConfig& config, const std::string& key, const std::string& value);

ParamCount param_count(const ModelConfig& config);
template <typename T>
ParamCount param_count(const Model<T>& model);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace adast
