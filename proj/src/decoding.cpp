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


#include "adast/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "adast/text.hpp"

namespace adast {

namespace {

template <typename T>
Tensor<T> row_tensor(std::span<const T> v) {
  return Tensor<T>({1, 1, v.size()}, std::vector<T>(v.begin(), v.end()));
}

template <typename T>
std::vector<T> to_vector(const Tensor<T>& t) {
  return std::vector<T>(t.data().begin(), t.data().end());
}

template <typename T>
void check_single(const EncoderOutput<T>& enc) {
  if (enc.states.rank() != 3 || enc.states.dim(0) != 1 || enc.pad.size() != 1 || enc.lengths.size() != 1) {
    throw DimensionError("decoding works on one utterance at a time; got encoder states " +
                         shape_to_string(enc.states.shape()));
  }
}

// One query row against a list of key segments, all heads.
template <typename T>
Tensor<T> attend(const Tensor<T>& q, std::span<const KeySegment<T>> segments, std::size_t n_heads) {
  const std::size_t d = q.numel();
  const std::size_t hd = d / n_heads;
  std::size_t total = 0;
  for (const auto& s : segments) total += s.count;
  std::vector<T> probs(total), out(d);
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd)));
  for (std::size_t h = 0; h < n_heads; ++h) {
    attend_row<T>(q.data().data(), segments, h * hd, hd, scale, probs.data(), out.data() + h * hd);
  }
  return Tensor<T>({1, 1, d}, std::move(out));
}

std::vector<double> log_softmax(std::span<const double> z) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : z) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : z) s += std::exp(x - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

template <typename T>
std::vector<double> widen(const std::vector<T>& v) {
  return std::vector<double>(v.begin(), v.end());
}

bool emittable(std::size_t id) { return id != static_cast<std::size_t>(kPadId) && id != static_cast<std::size_t>(kBosId); }

}  // namespace

template <typename T>
std::size_t AcousticTrack<T>::row_elements() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.size();
  return n;
}

template <typename T>
std::size_t AcousticTrack<T>::cache_elements() const {
  std::size_t n = 0;
  for (const auto& k : keys) n += k.size();
  for (const auto& v : values) n += v.size();
  return n;
}

template <typename T>
EncoderOutput<T> encode_utterance(const Model<T>& model, const Utterance& utt) {
  if (utt.features.size() != utt.frames * utt.feature_dim) {
    throw DimensionError("utterance " + utt.id + " has " + std::to_string(utt.features.size()) +
                         " feature values for " + std::to_string(utt.frames) + " x " +
                         std::to_string(utt.feature_dim));
  }
  NoGradGuard no_grad;
  const Tensor<T> f({1, utt.frames, utt.feature_dim}, std::vector<T>(utt.features.begin(), utt.features.end()));
  return model.encode(f, {PadList(utt.frames, false)});
}

template <typename T>
AcousticTrack<T> precompute_acoustic_track(const Model<T>& model, const EncoderOutput<T>& enc) {
  if (model.variant() != Variant::kAdast) {
    throw ConfigError("acoustic track requested for a " + variant_name(model.variant()) + " model");
  }
  check_single(enc);
  NoGradGuard no_grad;
  const std::size_t s_len = enc.states.dim(1), d = enc.states.dim(2);
  AcousticTrack<T> track;
  track.variant = Variant::kAdast;
  track.s_len = s_len;
  track.s_real = enc.lengths[0];
  track.d_model = d;
  track.key_mask = build_padding_mask(s_len, enc.pad[0]);

  Tensor<T> x = enc.states;
  if (model.modality) {
    const std::vector<int> ids(s_len, ModalityEmbedding<T>::kAcoustic);
    x = ops::add(x, ops::embedding(model.modality->table, ids, Shape{1, s_len}));
  }
  x = ops::add(x, layers::sinusoidal_positions<T>(s_len, d, 0));
  std::vector<float> mask_values;
  mask_values.reserve(s_len * s_len);
  for (std::size_t i = 0; i < s_len; ++i) mask_values.insert(mask_values.end(), track.key_mask.begin(), track.key_mask.end());
  const AttentionMask mask{1, s_len, s_len, std::move(mask_values)};
  for (const auto& layer : model.decoder) {
    const Tensor<T> h = layer.attn_norm(x);
    track.keys.push_back(to_vector(layer.attn.key(h)));
    track.values.push_back(to_vector(layer.attn.value(h)));
    x = ops::add(x, layers::stma_concat(h, layer.attn, mask));
    x = ops::add(x, layers::feed_forward(layer.ffn_norm(x), layer.ffn));
    track.rows.push_back(to_vector(x));
  }
  return track;
}

template <typename T>
AcousticTrack<T> precompute_source_cache(const Model<T>& model, const EncoderOutput<T>& enc) {
  if (model.variant() == Variant::kAdast) return precompute_acoustic_track(model, enc);
  check_single(enc);
  NoGradGuard no_grad;
  AcousticTrack<T> track;
  track.variant = model.variant();
  track.s_len = enc.states.dim(1);
  track.s_real = enc.lengths[0];
  track.d_model = enc.states.dim(2);
  track.key_mask = build_padding_mask(track.s_len, enc.pad[0]);
  std::vector<Tensor<T>> memories;
  if (model.variant() == Variant::kStaticAblation) memories = model.refreshed_memories(enc);
  for (std::size_t l = 0; l < model.decoder.size(); ++l) {
    const Tensor<T>& memory = memories.empty() ? enc.states : memories[l];
    track.keys.push_back(to_vector(model.decoder[l].cross_attn->key(memory)));
    track.values.push_back(to_vector(model.decoder[l].cross_attn->value(memory)));
  }
  return track;
}

template <typename T>
DecoderState<T> initial_decoder_state(const Model<T>& model) {
  DecoderState<T> s;
  s.keys.resize(model.decoder.size());
  s.values.resize(model.decoder.size());
  return s;
}

template <typename T>
std::vector<T> incremental_step(const Model<T>& model, const AcousticTrack<T>& track, DecoderState<T>& state,
                                int token) {
  const std::size_t n_layers = model.decoder.size();
  const std::size_t d = model.config().d_model;
  if (track.variant != model.variant() || track.keys.size() != n_layers || track.d_model != d) {
    throw ContractError("incremental_step: source cache was built for a different model");
  }
  if (state.keys.size() != n_layers || state.values.size() != n_layers) {
    throw ContractError("incremental_step: decoder state has " + std::to_string(state.keys.size()) +
                        " layers, model has " + std::to_string(n_layers));
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (state.keys[l].size() != state.length * d || state.values[l].size() != state.length * d) {
      throw ContractError("incremental_step: layer " + std::to_string(l) + " cache holds " +
                          std::to_string(state.keys[l].size() / d) + " rows but the state length is " +
                          std::to_string(state.length));
    }
  }
  if (token < 0 || static_cast<std::size_t>(token) >= model.config().vocab_size) {
    throw ValidationError("token id " + std::to_string(token) + " outside vocabulary");
  }
  NoGradGuard no_grad;
  const std::size_t t = state.length;
  const bool adast = model.variant() == Variant::kAdast;
  const std::size_t n_heads = model.config().n_heads;

  Tensor<T> x = model.embed_targets({{token}});
  std::size_t position = t;
  if (adast) {
    if (model.modality) {
      x = ops::add(x, ops::embedding(model.modality->table, std::vector<int>{ModalityEmbedding<T>::kText},
                                     Shape{1, 1}));
    }
    if (!model.config().position_restart_at_text) position += track.s_real;
  }
  x = ops::add(x, layers::sinusoidal_positions<T>(1, d, position));

  for (std::size_t l = 0; l < n_layers; ++l) {
    const DecoderLayer<T>& layer = model.decoder[l];
    const Tensor<T> h = layer.attn_norm(x);
    const Tensor<T> q = layer.attn.query(h);
    const Tensor<T> k = layer.attn.key(h);
    const Tensor<T> v = layer.attn.value(h);
    state.keys[l].insert(state.keys[l].end(), k.data().begin(), k.data().end());
    state.values[l].insert(state.values[l].end(), v.data().begin(), v.data().end());
    const KeySegment<T> target{state.keys[l].data(), state.values[l].data(), t + 1, d, nullptr};
    if (adast) {
      const KeySegment<T> segs[2] = {
          {track.keys[l].data(), track.values[l].data(), track.s_len, d, track.key_mask.data()}, target};
      x = ops::add(x, layer.attn.output(attend<T>(q, segs, n_heads)));
    } else {
      x = ops::add(x, layer.attn.output(attend<T>(q, std::span<const KeySegment<T>>(&target, 1), n_heads)));
      const Tensor<T> qc = layer.cross_attn->query(layer.cross_norm->operator()(x));
      const KeySegment<T> memory{track.keys[l].data(), track.values[l].data(), track.s_len, d,
                                 track.key_mask.data()};
      x = ops::add(x, layer.cross_attn->output(attend<T>(qc, std::span<const KeySegment<T>>(&memory, 1), n_heads)));
    }
    x = ops::add(x, layers::feed_forward(layer.ffn_norm(x), layer.ffn));
  }
  state.length = t + 1;
  return to_vector(model.project_logits(x));
}

template <typename T>
std::vector<T> full_step(const Model<T>& model, const EncoderOutput<T>& enc, const std::vector<int>& prefix) {
  check_single(enc);
  if (prefix.empty()) throw ValidationError("full_step: empty prefix");
  NoGradGuard no_grad;
  const Tensor<T> logits = model.decode_train(enc, {prefix}, {PadList(prefix.size(), false)});
  const std::size_t v = logits.dim(2);
  const auto last = logits.data().subspan((prefix.size() - 1) * v, v);
  return std::vector<T>(last.begin(), last.end());
}

std::size_t default_max_len(std::size_t s_len) { return 2 * s_len + 16; }

double hypothesis_score(double log_prob, std::size_t length, double length_penalty) {
  if (length == 0 || length_penalty == 0.0) return log_prob;
  return log_prob / std::pow(static_cast<double>(length), length_penalty);
}

template <typename T>
DecodeResult greedy_decode(const Model<T>& model, const EncoderOutput<T>& enc, const DecodeOptions& options) {
  check_single(enc);
  const std::size_t max_len = options.max_len ? options.max_len : default_max_len(enc.states.dim(1));
  const bool incremental = options.mode == DecodeMode::kIncremental;
  AcousticTrack<T> track;
  DecoderState<T> state;
  if (incremental) {
    track = precompute_source_cache(model, enc);
    state = initial_decoder_state(model);
  }
  DecodeResult r;
  std::vector<int> prefix{kBosId};
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto logits = widen(incremental ? incremental_step(model, track, state, prefix.back())
                                          : full_step(model, enc, prefix));
    const auto lp = log_softmax(logits);
    std::size_t best = kEosId;
    for (std::size_t id = 0; id < lp.size(); ++id) {
      if (emittable(id) && lp[id] > lp[best]) best = id;
    }
    if (options.record_logits) r.step_logits.push_back(logits);
    r.log_prob += lp[best];
    if (best == static_cast<std::size_t>(kEosId)) {
      r.finished = true;
      break;
    }
    r.tokens.push_back(static_cast<int>(best));
    prefix.push_back(static_cast<int>(best));
  }
  r.score = hypothesis_score(r.log_prob, r.tokens.size() + (r.finished ? 1 : 0), options.length_penalty);
  return r;
}

namespace {

template <typename T>
struct Hyp {
  std::vector<int> tokens;
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;
  DecoderState<T> state;  // rows for BOS and tokens[0 .. n-2]
};

template <typename T>
bool ranks_before(const Hyp<T>& a, const Hyp<T>& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

}  // namespace

template <typename T>
std::vector<DecodeResult> beam_search(const Model<T>& model, const EncoderOutput<T>& enc,
                                      const DecodeOptions& options) {
  check_single(enc);
  if (options.beam == 0) throw ConfigError("beam size must be at least 1");
  const std::size_t max_len = options.max_len ? options.max_len : default_max_len(enc.states.dim(1));
  const bool incremental = options.mode == DecodeMode::kIncremental;
  AcousticTrack<T> track;
  if (incremental) track = precompute_source_cache(model, enc);

  std::vector<Hyp<T>> alive(1), finished;
  if (incremental) alive[0].state = initial_decoder_state(model);
  for (std::size_t step = 0; step < max_len && !alive.empty(); ++step) {
    std::vector<Hyp<T>> pool = finished;
    for (const Hyp<T>& h : alive) {
      DecoderState<T> next = h.state;
      const int input = h.tokens.empty() ? kBosId : h.tokens.back();
      std::vector<double> logits;
      if (incremental) {
        logits = widen(incremental_step(model, track, next, input));
      } else {
        std::vector<int> prefix{kBosId};
        prefix.insert(prefix.end(), h.tokens.begin(), h.tokens.end());
        logits = widen(full_step(model, enc, prefix));
      }
      const auto lp = log_softmax(logits);
      for (std::size_t id = 0; id < lp.size(); ++id) {
        if (!emittable(id)) continue;
        Hyp<T> c;
        c.log_prob = h.log_prob + lp[id];
        c.finished = id == static_cast<std::size_t>(kEosId);
        c.tokens = h.tokens;
        if (!c.finished) c.tokens.push_back(static_cast<int>(id));
        c.score = hypothesis_score(c.log_prob, h.tokens.size() + 1, options.length_penalty);
        if (!c.finished) c.state = next;
        pool.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(options.beam, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), ranks_before<T>);
    pool.resize(keep);
    alive.clear();
    finished.clear();
    for (auto& c : pool) (c.finished ? finished : alive).push_back(std::move(c));
  }
  std::vector<Hyp<T>> all = std::move(finished);
  for (auto& h : alive) all.push_back(std::move(h));
  std::sort(all.begin(), all.end(), ranks_before<T>);
  std::vector<DecodeResult> out;
  for (const auto& h : all) {
    DecodeResult r;
    r.tokens = h.tokens;
    r.finished = h.finished;
    r.log_prob = h.log_prob;
    r.score = h.score;
    out.push_back(std::move(r));
  }
  return out;
}

template <typename T>
std::vector<std::vector<int>> decode_corpus(const Model<T>& model, const std::vector<Utterance>& corpus,
                                            const DecodeOptions& options) {
  std::vector<std::vector<int>> out;
  out.reserve(corpus.size());
  for (const auto& utt : corpus) {
    const auto enc = encode_utterance(model, utt);
    out.push_back(options.beam <= 1 ? greedy_decode(model, enc, options).tokens
                                    : beam_search(model, enc, options).front().tokens);
  }
  return out;
}

void write_decode_file(const std::filesystem::path& path, const std::vector<Utterance>& corpus,
                       const std::vector<std::vector<int>>& hypotheses) {
  if (corpus.size() != hypotheses.size()) {
    throw DimensionError("decode output: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                         std::to_string(corpus.size()) + " utterances");
  }
  std::ostringstream ss;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ss << corpus[i].id << '\t';
    for (std::size_t k = 0; k < hypotheses[i].size(); ++k) ss << (k ? " " : "") << hypotheses[i][k];
    ss << '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << ss.str();
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<std::pair<std::string, std::vector<int>>> read_decode_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::pair<std::string, std::vector<int>>> out;
  std::string line;
  std::size_t line_no = 0, offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected utt_id<TAB>tokens", line_start);
    }
    std::vector<int> tokens;
    std::istringstream ts(line.substr(tab + 1));
    std::string tok;
    while (ts >> tok) {
      const auto v = text::parse_int<int>(tok);
      if (!v) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": bad token '" + tok + "'", line_start);
      tokens.push_back(*v);
    }
    out.emplace_back(line.substr(0, tab), std::move(tokens));
  }
  return out;
}

#define ADAST_INSTANTIATE_DECODING(T)                                                                         \
  template struct AcousticTrack<T>;                                                                           \
  template EncoderOutput<T> encode_utterance(const Model<T>&, const Utterance&);                              \
  template AcousticTrack<T> precompute_acoustic_track(const Model<T>&, const EncoderOutput<T>&);              \
  template AcousticTrack<T> precompute_source_cache(const Model<T>&, const EncoderOutput<T>&);                \
  template DecoderState<T> initial_decoder_state(const Model<T>&);                                            \
  template std::vector<T> incremental_step(const Model<T>&, const AcousticTrack<T>&, DecoderState<T>&, int);  \
  template std::vector<T> full_step(const Model<T>&, const EncoderOutput<T>&, const std::vector<int>&);       \
  template DecodeResult greedy_decode(const Model<T>&, const EncoderOutput<T>&, const DecodeOptions&);        \
  template std::vector<DecodeResult> beam_search(const Model<T>&, const EncoderOutput<T>&, const DecodeOptions&); \
  template std::vector<std::vector<int>> decode_corpus(const Model<T>&, const std::vector<Utterance>&,        \
                                                       const DecodeOptions&);

ADAST_INSTANTIATE_DECODING(float)
ADAST_INSTANTIATE_DECODING(double)

}  // namespace adast
