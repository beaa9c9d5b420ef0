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

#include "adast/model.hpp"

#include <algorithm>
#include <cmath>

#include "adast/text.hpp"

namespace adast {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kAdast: return "adast";
    case Variant::kStaticAblation: return "static_ablation";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "baseline") return Variant::kBaseline;
  if (name == "adast") return Variant::kAdast;
  if (name == "static_ablation") return Variant::kStaticAblation;
  throw ConfigError("unknown variant '" + name + "'; valid variants are baseline, adast, static_ablation");
}

void ModelConfig::validate() const {
  if (n_cnn_layers != 2) throw ConfigError("n_cnn_layers must be 2 (two 2x2 stride-2 convolutions)");
  if (n_enc_layers == 0 || n_dec_layers == 0) throw ConfigError("encoder and decoder need at least one layer");
  if (d_model == 0 || d_model % 2 != 0) throw ConfigError("d_model must be positive and even");
  if (n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                      std::to_string(n_heads));
  }
  if (d_ff == 0) throw ConfigError("d_ff must be positive");
  if (vocab_size <= static_cast<std::size_t>(kFirstRealToken)) {
    throw ConfigError("vocab_size must exceed the " + std::to_string(kFirstRealToken) + " reserved ids");
  }
  if (feature_dim < 4) throw ConfigError("feature_dim must be at least 4");
  if (subsampler_channels == 0) throw ConfigError("subsampler_channels must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
}

std::vector<std::pair<std::string, std::string>> model_config_entries(const ModelConfig& c) {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  return {
      {"n_cnn_layers", std::to_string(c.n_cnn_layers)},
      {"n_enc_layers", std::to_string(c.n_enc_layers)},
      {"n_dec_layers", std::to_string(c.n_dec_layers)},
      {"d_model", std::to_string(c.d_model)},
      {"n_heads", std::to_string(c.n_heads)},
      {"d_ff", std::to_string(c.d_ff)},
      {"vocab_size", std::to_string(c.vocab_size)},
      {"feature_dim", std::to_string(c.feature_dim)},
      {"subsampler_channels", std::to_string(c.subsampler_channels)},
      {"dropout", text::format_double(c.dropout)},
      {"variant", variant_name(c.variant)},
      {"position_restart_at_text", b(c.position_restart_at_text)},
      {"use_modality_embedding", b(c.use_modality_embedding)},
      {"tie_output_embedding", b(c.tie_output_embedding)},
      {"zero_init_refresh", b(c.zero_init_refresh)},
  };
}

bool set_model_config_value(ModelConfig& c, const std::string& key, const std::string& value) {
  auto size = [&](std::size_t& field) {
    const auto v = text::parse_int<std::size_t>(value);
    if (!v) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
    field = *v;
  };
  auto flag = [&](bool& field) {
    const auto v = text::parse_bool(value);
    if (!v) throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
    field = *v;
  };
  if (key == "n_cnn_layers") size(c.n_cnn_layers);
  else if (key == "n_enc_layers") size(c.n_enc_layers);
  else if (key == "n_dec_layers") size(c.n_dec_layers);
  else if (key == "d_model") size(c.d_model);
  else if (key == "n_heads") size(c.n_heads);
  else if (key == "d_ff") size(c.d_ff);
  else if (key == "vocab_size") size(c.vocab_size);
  else if (key == "feature_dim") size(c.feature_dim);
  else if (key == "subsampler_channels") size(c.subsampler_channels);
  else if (key == "dropout") {
    const auto v = text::parse_double(value);
    if (!v) throw ConfigError("'dropout' expects a number, got '" + value + "'");
    c.dropout = *v;
  } else if (key == "variant") c.variant = parse_variant(std::string(text::trim(value)));
  else if (key == "position_restart_at_text") flag(c.position_restart_at_text);
  else if (key == "use_modality_embedding") flag(c.use_modality_embedding);
  else if (key == "tie_output_embedding") flag(c.tie_output_embedding);
  else if (key == "zero_init_refresh") flag(c.zero_init_refresh);
  else return false;
  return true;
}

std::size_t ParamCount::component(const std::string& name) const {
  for (const auto& [n, c] : components) {
    if (n == name) return c;
  }
  return 0;
}

namespace {

template <typename T>
Tensor<T> normal_tensor(Shape shape, double sd, Rng& rng) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.normal(0.0, sd));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
void zero_fill(Tensor<T>& t) {
  for (auto& x : t.mutable_data()) x = T(0);
}

std::vector<PadList> subsample_pad(const std::vector<PadList>& frame_pad, std::size_t out_len) {
  std::vector<PadList> out;
  out.reserve(frame_pad.size());
  for (const auto& fp : frame_pad) {
    PadList p(out_len, false);
    for (std::size_t i = 0; i < out_len; ++i) {
      for (std::size_t f = 4 * i; f < 4 * i + 4 && f < fp.size(); ++f) p[i] = p[i] || fp[f];
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  feature_mean = Tensor<T>::zeros({config_.feature_dim});
  feature_istd = Tensor<T>::full({config_.feature_dim}, T(1));
  subsampler = layers::make_subsampler<T>(config_.feature_dim, config_.subsampler_channels, d, rng);
  for (std::size_t i = 0; i < config_.n_enc_layers; ++i) {
    EncoderLayer<T> layer;
    layer.attn_norm = layers::make_layer_norm<T>(d);
    layer.self_attn = layers::make_attention<T>(d, config_.n_heads, rng);
    layer.ffn_norm = layers::make_layer_norm<T>(d);
    layer.ffn = layers::make_feed_forward<T>(d, config_.d_ff, rng);
    encoder.push_back(std::move(layer));
  }
  encoder_norm = layers::make_layer_norm<T>(d);
  token_embedding = normal_tensor<T>({config_.vocab_size, d}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  if (config_.variant == Variant::kAdast && config_.use_modality_embedding) {
    modality = layers::make_modality_embedding<T>(d, rng);
  }
  for (std::size_t i = 0; i < config_.n_dec_layers; ++i) {
    DecoderLayer<T> layer;
    layer.attn_norm = layers::make_layer_norm<T>(d);
    layer.attn = layers::make_attention<T>(d, config_.n_heads, rng);
    if (config_.variant != Variant::kAdast) {
      layer.cross_norm = layers::make_layer_norm<T>(d);
      layer.cross_attn = layers::make_attention<T>(d, config_.n_heads, rng);
    }
    if (config_.variant == Variant::kStaticAblation) {
      layer.refresh_norm = layers::make_layer_norm<T>(d);
      layer.refresh_attn = layers::make_attention<T>(d, config_.n_heads, rng);
      if (config_.zero_init_refresh) {
        zero_fill(layer.refresh_attn->output.weight);
        zero_fill(layer.refresh_attn->output.bias);
      }
    }
    layer.ffn_norm = layers::make_layer_norm<T>(d);
    layer.ffn = layers::make_feed_forward<T>(d, config_.d_ff, rng);
    decoder.push_back(std::move(layer));
  }
  decoder_norm = layers::make_layer_norm<T>(d);
  if (config_.tie_output_embedding) {
    output.bias = Tensor<T>::zeros({config_.vocab_size}, true);
  } else {
    output = layers::make_linear<T>(d, config_.vocab_size, rng);
  }
}

template <typename T>
std::vector<NamedParameter<T>> Model<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  layers::append_parameters("subsampler", subsampler, out);
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    const std::string p = "encoder." + std::to_string(i);
    layers::append_parameters(p + ".attn_norm", encoder[i].attn_norm, out);
    layers::append_parameters(p + ".self_attn", encoder[i].self_attn, out);
    layers::append_parameters(p + ".ffn_norm", encoder[i].ffn_norm, out);
    layers::append_parameters(p + ".ffn", encoder[i].ffn, out);
  }
  layers::append_parameters("encoder_norm", encoder_norm, out);
  out.push_back({"embedding.token", token_embedding});
  if (modality) out.push_back({"embedding.modality", modality->table});
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    const std::string p = "decoder." + std::to_string(i);
    const DecoderLayer<T>& l = decoder[i];
    layers::append_parameters(p + ".attn_norm", l.attn_norm, out);
    layers::append_parameters(p + (config_.variant == Variant::kAdast ? ".stma" : ".self_attn"), l.attn, out);
    if (l.refresh_attn) {
      layers::append_parameters(p + ".refresh_norm", *l.refresh_norm, out);
      layers::append_parameters(p + ".refresh_attn", *l.refresh_attn, out);
    }
    if (l.cross_attn) {
      layers::append_parameters(p + ".cross_norm", *l.cross_norm, out);
      layers::append_parameters(p + ".cross_attn", *l.cross_attn, out);
    }
    layers::append_parameters(p + ".ffn_norm", l.ffn_norm, out);
    layers::append_parameters(p + ".ffn", l.ffn, out);
  }
  layers::append_parameters("decoder_norm", decoder_norm, out);
  if (output.weight.defined()) out.push_back({"output.weight", output.weight});
  out.push_back({"output.bias", output.bias});
  return out;
}

template <typename T>
std::vector<NamedParameter<T>> Model<T>::buffers() const {
  return {{"frontend.feature_mean", feature_mean}, {"frontend.feature_istd", feature_istd}};
}

template <typename T>
Model<T> Model<T>::clone() const {
  Model copy = *this;
  // `copy` aliases this model's storage until every tensor is rebuilt.
  auto fresh = [](Tensor<T>& t) {
    if (t.defined()) t = Tensor<T>(t.shape(), std::vector<T>(t.data().begin(), t.data().end()), t.requires_grad());
  };
  auto fresh_linear = [&](Linear<T>& l) {
    fresh(l.weight);
    fresh(l.bias);
  };
  auto fresh_norm = [&](LayerNormParams<T>& n) {
    fresh(n.gain);
    fresh(n.bias);
  };
  auto fresh_attn = [&](AttentionParams<T>& a) {
    fresh_linear(a.query);
    fresh_linear(a.key);
    fresh_linear(a.value);
    fresh_linear(a.output);
  };
  fresh(copy.feature_mean);
  fresh(copy.feature_istd);
  fresh(copy.subsampler.conv1_weight);
  fresh(copy.subsampler.conv1_bias);
  fresh(copy.subsampler.conv2_weight);
  fresh(copy.subsampler.conv2_bias);
  fresh_linear(copy.subsampler.projection);
  for (auto& l : copy.encoder) {
    fresh_norm(l.attn_norm);
    fresh_attn(l.self_attn);
    fresh_norm(l.ffn_norm);
    fresh_linear(l.ffn.inner);
    fresh_linear(l.ffn.outer);
  }
  fresh_norm(copy.encoder_norm);
  fresh(copy.token_embedding);
  if (copy.modality) fresh(copy.modality->table);
  for (auto& l : copy.decoder) {
    fresh_norm(l.attn_norm);
    fresh_attn(l.attn);
    if (l.cross_attn) {
      fresh_norm(*l.cross_norm);
      fresh_attn(*l.cross_attn);
    }
    if (l.refresh_attn) {
      fresh_norm(*l.refresh_norm);
      fresh_attn(*l.refresh_attn);
    }
    fresh_norm(l.ffn_norm);
    fresh_linear(l.ffn.inner);
    fresh_linear(l.ffn.outer);
  }
  fresh_norm(copy.decoder_norm);
  fresh_linear(copy.output);
  return copy;
}

template <typename T>
Tensor<T> Model<T>::sublayer_dropout(const Tensor<T>& x, const ForwardOptions& options) const {
  if (!options.training || config_.dropout == 0.0) return x;
  if (!options.rng) throw ContractError("dropout during training needs an Rng");
  return ops::dropout(x, config_.dropout, *options.rng);
}

template <typename T>
Tensor<T> Model<T>::normalize_features(const Tensor<T>& features) const {
  const auto mean = feature_mean.data();
  const auto istd = feature_istd.data();
  const bool identity = std::all_of(mean.begin(), mean.end(), [](T v) { return v == T(0); }) &&
                        std::all_of(istd.begin(), istd.end(), [](T v) { return v == T(1); });
  if (identity) return features;
  const std::size_t f = features.dim(-1);
  if (f != mean.size()) {
    throw DimensionError("encode: feature dimension " + std::to_string(f) + " but the model expects " +
                         std::to_string(mean.size()));
  }
  std::vector<T> m(features.numel()), s(features.numel());
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = mean[i % f];
    s[i] = istd[i % f];
  }
  return ops::mul(ops::sub(features, Tensor<T>(features.shape(), std::move(m))),
                  Tensor<T>(features.shape(), std::move(s)));
}

template <typename T>
void Model<T>::check_variant(Variant expected) const {
  if (config_.variant != expected) {
    throw ConfigError("model variant is " + variant_name(config_.variant) + " but " + variant_name(expected) +
                      " decoding was requested");
  }
}

template <typename T>
EncoderOutput<T> Model<T>::encode(const Tensor<T>& features, const std::vector<PadList>& frame_pad,
                                  const ForwardOptions& options) const {
  if (features.rank() != 3) throw DimensionError("encode: features must be [B, L, F]");
  const std::size_t batch = features.dim(0), frames = features.dim(1);
  if (frame_pad.size() != batch) throw DimensionError("encode: one pad list per utterance is required");
  for (const auto& p : frame_pad) {
    if (p.size() != frames) throw DimensionError("encode: pad list length differs from frame count");
  }
  Tensor<T> x = layers::subsample(normalize_features(features), subsampler);
  const std::size_t s_len = x.dim(1);
  EncoderOutput<T> out;
  out.pad = subsample_pad(frame_pad, s_len);
  for (const auto& p : out.pad) {
    std::size_t n = 0;
    for (bool v : p) n += v ? 0 : 1;
    if (n == 0) throw ValidationError("encode: an utterance has no frames left after subsampling");
    out.lengths.push_back(n);
  }
  x = ops::add(x, layers::sinusoidal_positions<T>(s_len, config_.d_model, 0));
  const AttentionMask mask = key_padding_mask(s_len, out.pad);
  for (const auto& layer : encoder) {
    const Tensor<T> h = layer.attn_norm(x);
    x = ops::add(x, sublayer_dropout(layers::multi_head_attention(h, h, layer.self_attn, mask), options));
    x = ops::add(x, sublayer_dropout(layers::feed_forward(layer.ffn_norm(x), layer.ffn), options));
  }
  out.states = encoder_norm(x);
  return out;
}

template <typename T>
Tensor<T> Model<T>::embed_targets(const TokenBatch& ids) const {
  if (ids.empty()) throw ValidationError("empty target batch");
  const std::size_t t_len = ids.front().size();
  std::vector<int> flat;
  flat.reserve(ids.size() * t_len);
  for (const auto& row : ids) {
    if (row.size() != t_len) throw DimensionError("ragged target batch; pad to a common length");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  const Tensor<T> e = ops::embedding(token_embedding, flat, Shape{ids.size(), t_len});
  return ops::scale(e, static_cast<T>(std::sqrt(static_cast<double>(config_.d_model))));
}

template <typename T>
Tensor<T> Model<T>::project_logits(const Tensor<T>& hidden) const {
  const Tensor<T> h = decoder_norm(hidden);
  if (output.weight.defined()) return output(h);
  return ops::add(ops::matmul_transposed(h, token_embedding), output.bias);
}

template <typename T>
Tensor<T> Model<T>::decode_train(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                 const std::vector<PadList>& tgt_pad, const ForwardOptions& options) const {
  switch (config_.variant) {
    case Variant::kBaseline: return decode_train_baseline(enc, tgt_in, tgt_pad, options);
    case Variant::kAdast: return decode_train_adast(enc, tgt_in, tgt_pad, options);
    case Variant::kStaticAblation: return decode_train_static_ablation(enc, tgt_in, tgt_pad, options);
  }
  throw ConfigError("unknown variant");
}

namespace {

template <typename T>
void check_targets(const EncoderOutput<T>& enc, const TokenBatch& tgt_in, const std::vector<PadList>& tgt_pad) {
  if (tgt_in.size() != enc.states.dim(0) || tgt_pad.size() != tgt_in.size()) {
    throw DimensionError("target batch size does not match encoder batch");
  }
}

template <typename T>
AttentionMask causal_batch(std::size_t t_len, const std::vector<PadList>& tgt_pad) {
  std::vector<MaskMatrix> masks;
  masks.reserve(tgt_pad.size());
  for (const auto& p : tgt_pad) masks.push_back(build_causal_mask(t_len, p));
  return stack_masks(masks);
}

}  // namespace

template <typename T>
Tensor<T> Model<T>::decode_train_baseline(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                          const std::vector<PadList>& tgt_pad, const ForwardOptions& options) const {
  check_variant(Variant::kBaseline);
  check_targets(enc, tgt_in, tgt_pad);
  const std::size_t t_len = tgt_in.front().size();
  Tensor<T> x = ops::add(embed_targets(tgt_in), layers::sinusoidal_positions<T>(t_len, config_.d_model, 0));
  const AttentionMask self_mask = causal_batch<T>(t_len, tgt_pad);
  const AttentionMask cross_mask = key_padding_mask(t_len, enc.pad);
  for (const auto& layer : decoder) {
    const Tensor<T> h = layer.attn_norm(x);
    x = ops::add(x, sublayer_dropout(layers::multi_head_attention(h, h, layer.attn, self_mask), options));
    x = ops::add(x, sublayer_dropout(layers::multi_head_cross_attention(layer.cross_norm->operator()(x), enc.states,
                                                                        *layer.cross_attn, cross_mask),
                                     options));
    x = ops::add(x, sublayer_dropout(layers::feed_forward(layer.ffn_norm(x), layer.ffn), options));
  }
  return project_logits(x);
}

template <typename T>
std::vector<Tensor<T>> Model<T>::refreshed_memories(const EncoderOutput<T>& enc) const {
  check_variant(Variant::kStaticAblation);
  const std::size_t s_len = enc.states.dim(1);
  const AttentionMask mask = key_padding_mask(s_len, enc.pad);
  std::vector<Tensor<T>> out;
  Tensor<T> memory = enc.states;
  for (const auto& layer : decoder) {
    const Tensor<T> h = layer.refresh_norm->operator()(memory);
    memory = ops::add(memory, layers::multi_head_attention(h, h, *layer.refresh_attn, mask));
    out.push_back(memory);
  }
  return out;
}

template <typename T>
Tensor<T> Model<T>::decode_train_static_ablation(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                                 const std::vector<PadList>& tgt_pad,
                                                 const ForwardOptions& options) const {
  check_variant(Variant::kStaticAblation);
  check_targets(enc, tgt_in, tgt_pad);
  const std::size_t t_len = tgt_in.front().size();
  const std::size_t s_len = enc.states.dim(1);
  Tensor<T> x = ops::add(embed_targets(tgt_in), layers::sinusoidal_positions<T>(t_len, config_.d_model, 0));
  const AttentionMask self_mask = causal_batch<T>(t_len, tgt_pad);
  const AttentionMask cross_mask = key_padding_mask(t_len, enc.pad);
  const AttentionMask memory_mask = key_padding_mask(s_len, enc.pad);
  Tensor<T> memory = enc.states;
  for (const auto& layer : decoder) {
    const Tensor<T> m = layer.refresh_norm->operator()(memory);
    memory = ops::add(memory, sublayer_dropout(layers::multi_head_attention(m, m, *layer.refresh_attn, memory_mask),
                                               options));
    const Tensor<T> h = layer.attn_norm(x);
    x = ops::add(x, sublayer_dropout(layers::multi_head_attention(h, h, layer.attn, self_mask), options));
    x = ops::add(x, sublayer_dropout(layers::multi_head_cross_attention(layer.cross_norm->operator()(x), memory,
                                                                        *layer.cross_attn, cross_mask),
                                     options));
    x = ops::add(x, sublayer_dropout(layers::feed_forward(layer.ffn_norm(x), layer.ffn), options));
  }
  return project_logits(x);
}

template <typename T>
Tensor<T> Model<T>::decode_train_adast(const EncoderOutput<T>& enc, const TokenBatch& tgt_in,
                                       const std::vector<PadList>& tgt_pad, const ForwardOptions& options,
                                       std::vector<Tensor<T>>* layer_states) const {
  check_variant(Variant::kAdast);
  check_targets(enc, tgt_in, tgt_pad);
  const std::size_t s_len = enc.states.dim(1);
  const std::size_t t_len = tgt_in.front().size();
  layers::PositionOptions pos;
  pos.restart_at_text = config_.position_restart_at_text;
  pos.src_lengths = enc.lengths;
  Tensor<T> x = layers::add_modality_and_position(enc.states, embed_targets(tgt_in),
                                                  modality ? &*modality : nullptr, pos);
  std::vector<MaskMatrix> masks;
  masks.reserve(tgt_pad.size());
  for (std::size_t b = 0; b < tgt_pad.size(); ++b) masks.push_back(build_stma_mask(s_len, t_len, enc.pad[b], tgt_pad[b]));
  const AttentionMask mask = stack_masks(masks);
  for (const auto& layer : decoder) {
    x = ops::add(x, sublayer_dropout(layers::stma_concat(layer.attn_norm(x), layer.attn, mask), options));
    x = ops::add(x, sublayer_dropout(layers::feed_forward(layer.ffn_norm(x), layer.ffn), options));
    if (layer_states) layer_states->push_back(x);
  }
  return project_logits(ops::slice_rows(x, s_len, t_len));
}

ParamCount param_count(const ModelConfig& config) { return param_count(Model<float>(config, 0)); }

template <typename T>
ParamCount param_count(const Model<T>& model) {
  ParamCount pc;
  pc.components = {{"subsampler", 0}, {"encoder", 0}, {"decoder", 0}, {"embeddings", 0}, {"output", 0}};
  for (const auto& p : model.parameters()) {
    const std::string& n = p.name;
    std::size_t slot = 0;
    if (n.starts_with("subsampler")) slot = 0;
    else if (n.starts_with("encoder")) slot = 1;
    else if (n.starts_with("decoder")) slot = 2;
    else if (n.starts_with("embedding")) slot = 3;
    else slot = 4;
    pc.components[slot].second += p.tensor.numel();
    pc.total += p.tensor.numel();
  }
  return pc;
}

template class Model<float>;
template class Model<double>;
template ParamCount param_count(const Model<float>&);
template ParamCount param_count(const Model<double>&);

}  // namespace adast
