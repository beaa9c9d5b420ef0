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

// Synthetic "speech-like" corpora. Each source token becomes a block of
// feature frames (token prototype + class bias + noise); targets follow the
// task mode's deterministic rule.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace adast {

enum class TaskMode { kAsrLike, kMtLike, kStLike };

std::string task_mode_name(TaskMode mode);
TaskMode parse_task_mode(const std::string& name);

struct SyntheticSpec {
  std::size_t vocab_size = 32;  // includes the three reserved ids
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 8;
  std::size_t min_frames_per_token = 3;
  std::size_t max_frames_per_token = 6;
  std::size_t feature_dim = 16;
  double noise_std = 0.1;
  TaskMode mode = TaskMode::kStLike;
  std::size_t n_classes = 4;  // 0 disables class biases and labels
  double class_bias_scale = 1.0;
  std::size_t n_train = 2000;
  std::size_t n_dev = 200;
  std::size_t n_test = 200;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const SyntheticSpec&) const = default;
};

// mt_like inputs use this many frames per token regardless of the range.
inline constexpr std::size_t kMtFramesPerToken = 4;

struct Utterance {
  std::string id;
  std::size_t frames = 0;
  std::size_t feature_dim = 0;
  std::vector<float> features;  // frames x feature_dim, row-major
  std::vector<int> source;
  std::vector<int> target;
  int class_id = -1;  // -1: unlabeled
  bool operator==(const Utterance&) const = default;
};

struct SyntheticCorpora {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

// Bijection on token ids; reserved ids map to themselves.
struct TokenRemap {
  std::vector<int> forward;
  std::vector<int> inverse;
};

TokenRemap make_remap(std::size_t vocab_size, std::uint64_t seed);
// Swaps pair (2k, 2k+1) when both ids are odd. The operation is its own inverse.
std::vector<int> reorder_pairs(std::vector<int> tokens);
std::vector<int> derive_target(const std::vector<int>& source, TaskMode mode, const TokenRemap& remap);
std::vector<int> recover_source(const std::vector<int>& target, TaskMode mode, const TokenRemap& remap);

// Unit-norm prototypes, one row of feature_dim per token id.
std::vector<std::vector<float>> make_prototypes(std::size_t vocab_size, std::size_t feature_dim, std::uint64_t seed);
std::vector<std::vector<float>> make_class_biases(std::size_t n_classes, std::size_t feature_dim, double scale,
                                                  std::uint64_t seed);

SyntheticCorpora generate(const SyntheticSpec& spec);

// One split: `manifest.tsv` + `features.bin`.
void write_corpus(const std::vector<Utterance>& corpus, const std::filesystem::path& dir);
std::vector<Utterance> read_corpus(const std::filesystem::path& dir);

// Full corpus directory: train/, dev/, test/ and `spec.txt`.
void write_corpora(const SyntheticCorpora& corpora, const SyntheticSpec& spec, const std::filesystem::path& dir);
std::vector<std::pair<std::string, std::string>> synthetic_spec_entries(const SyntheticSpec& spec);
bool set_synthetic_spec_value(SyntheticSpec& spec, const std::string& key, const std::string& value);
SyntheticSpec read_corpus_spec(const std::filesystem::path& dir);

}  // namespace adast
