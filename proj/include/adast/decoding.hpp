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
#include <filesystem>
#include <string>
#include <vector>

#include "adast/model.hpp"
#include "adast/synthdata.hpp"

namespace adast {

// Per-utterance source-side cache shared by every hypothesis of one utterance.
// For adast, `rows[l]` holds the acoustic rows after decoder layer l and
// keys/values hold the projected acoustic K/V at the input of layer l. The
// acoustic rows never read target rows, so they are computed once. For the
// baseline and the ablation, keys/values are the cross-attention projections
// of the (refreshed) encoder memory; `rows` stays empty.
template <typename T>
struct AcousticTrack {
  Variant variant = Variant::kAdast;
  std::size_t s_len = 0;
  std::size_t s_real = 0;
  std::size_t d_model = 0;
  std::vector<float> key_mask;            // [S], 0 or kMaskNeg
  std::vector<std::vector<T>> rows;       // N_d x [S * d]
  std::vector<std::vector<T>> keys;       // N_d x [S * d]
  std::vector<std::vector<T>> values;     // N_d x [S * d]

  std::size_t row_elements() const;
  std::size_t cache_elements() const;
};

// Target-side K/V caches for one hypothesis, one entry per decoder layer.
template <typename T>
struct DecoderState {
  std::vector<std::vector<T>> keys;
  std::vector<std::vector<T>> values;
  std::size_t length = 0;  // target rows already processed
};

// Single-utterance encoding, [1, L, F] in and batch size 1 out.
template <typename T>
EncoderOutput<T> encode_utterance(const Model<T>& model, const Utterance& utt);

template <typename T>
AcousticTrack<T> precompute_acoustic_track(const Model<T>& model, const EncoderOutput<T>& enc);
// Any variant: the adast track, or the cross-attention memory cache.
template <typename T>
AcousticTrack<T> precompute_source_cache(const Model<T>& model, const EncoderOutput<T>& enc);

template <typename T>
DecoderState<T> initial_decoder_state(const Model<T>& model);

// Feeds `token` at position state.length and returns the V logits for the
// next position. Reads S + t + 1 keys per head and layer.
template <typename T>
std::vector<T> incremental_step(const Model<T>& model, const AcousticTrack<T>& track, DecoderState<T>& state,
                                int token);

// Reference path: teacher-forced pass over `prefix` (BOS first), returning the
// logits of its last position.
template <typename T>
std::vector<T> full_step(const Model<T>& model, const EncoderOutput<T>& enc, const std::vector<int>& prefix);

enum class DecodeMode { kIncremental, kFull };

struct DecodeOptions {
  std::size_t max_len = 0;  // 0: 2 * S + 16
  std::size_t beam = 1;
  double length_penalty = 1.0;
  DecodeMode mode = DecodeMode::kIncremental;
  bool record_logits = false;  // greedy only
};

struct DecodeResult {
  std::vector<int> tokens;  // without BOS and EOS
  bool finished = false;    // emitted EOS before max_len
  double log_prob = 0.0;
  double score = 0.0;
  std::vector<std::vector<double>> step_logits;
};

std::size_t default_max_len(std::size_t s_len);

// Length used by the beam score: emitted tokens plus EOS when finished.
double hypothesis_score(double log_prob, std::size_t length, double length_penalty);

template <typename T>
DecodeResult greedy_decode(const Model<T>& model, const EncoderOutput<T>& enc, const DecodeOptions& options = {});

// Ranked best-first: by score, then lexicographically by token ids.
template <typename T>
std::vector<DecodeResult> beam_search(const Model<T>& model, const EncoderOutput<T>& enc,
                                      const DecodeOptions& options = {});

// Greedy when options.beam == 1, else the best beam hypothesis.
template <typename T>
std::vector<std::vector<int>> decode_corpus(const Model<T>& model, const std::vector<Utterance>& corpus,
                                            const DecodeOptions& options = {});

// One line per utterance: `utt_id <TAB> space-joined token ids`.
void write_decode_file(const std::filesystem::path& path, const std::vector<Utterance>& corpus,
                       const std::vector<std::vector<int>>& hypotheses);
std::vector<std::pair<std::string, std::vector<int>>> read_decode_file(const std::filesystem::path& path);

}  // namespace adast
