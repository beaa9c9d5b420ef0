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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adast/model.hpp"
#include "adast/synthdata.hpp"

namespace adast {

// Padded teacher-forcing batch. tgt_in is BOS-prefixed, tgt_out EOS-suffixed.
struct Batch {
  std::size_t size = 0;
  std::size_t max_frames = 0;
  std::size_t feature_dim = 0;
  std::vector<float> features;  // size x max_frames x feature_dim
  std::vector<PadList> feature_pad;
  TokenBatch tgt_in;
  TokenBatch tgt_out;
  std::vector<PadList> tgt_pad;
  std::vector<std::size_t> indices;  // corpus positions

  template <typename T>
  Tensor<T> feature_tensor() const;
  std::size_t target_tokens() const;
};

// `min_frames` / `min_tokens` force extra padding (0: pad to the longest item).
Batch make_batch(const std::vector<Utterance>& corpus, std::span<const std::size_t> indices,
                 std::size_t min_frames = 0, std::size_t min_tokens = 0);

// Mean over non-padded positions of the label-smoothed negative log-likelihood.
// The smoothed target puts 1 - eps on the gold id and eps / V on every id.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const TokenBatch& tgt_out, const std::vector<PadList>& tgt_pad,
                        double label_smoothing);

// Correct and total non-padded positions under argmax (PAD and BOS excluded
// from the argmax, matching decoding).
template <typename T>
std::pair<std::size_t, std::size_t> count_correct(const Tensor<T>& logits, const TokenBatch& tgt_out,
                                                  const std::vector<PadList>& tgt_pad);

struct AdamConfig {
  double lr = 1e-3;  // peak learning rate
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  std::size_t warmup_steps = 400;
};

// Inverse-square-root schedule with linear warmup; `step` counts from 1.
double learning_rate(const AdamConfig& config, std::size_t step);

template <typename T>
struct AdamState {
  AdamConfig config;
  std::size_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedParameter<T>>& params, const AdamConfig& config);

// One bias-corrected Adam update. Throws NonFiniteGradientError naming the
// first parameter whose gradient holds NaN or Inf (parameters untouched).
template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params, AdamState<T>& state);

// Scales gradients so their global L2 norm is at most `max_norm`; returns the
// norm before clipping. max_norm <= 0 disables clipping.
template <typename T>
double clip_grad_norm(const std::vector<NamedParameter<T>>& params, double max_norm);

template <typename T>
void zero_grads(const std::vector<NamedParameter<T>>& params);

// Zeroes `time_masks` time stripes of width <= max_t and `freq_masks`
// frequency stripes of width <= max_f in a frames x dim block. Widths are
// clamped to the block.
void spec_augment(std::span<float> features, std::size_t frames, std::size_t dim, std::size_t time_masks,
                  std::size_t freq_masks, std::size_t max_t, std::size_t max_f, Rng& rng);

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 16;
  AdamConfig adam;
  double label_smoothing = 0.1;
  double clip_norm = 5.0;
  std::size_t log_interval = 50;
  std::size_t eval_interval = 250;
  std::size_t spec_time_masks = 0;
  std::size_t spec_freq_masks = 0;
  std::size_t spec_max_t = 4;
  std::size_t spec_max_f = 2;
  // Stop once dev token accuracy reaches this value (0 disables).
  double target_dev_accuracy = 0.0;
  // Fit the model's feature normalization to the training set before step 1.
  bool global_cmvn = true;
  std::uint64_t seed = 1;
};

// Per-dimension mean and inverse standard deviation over every training frame.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> istd;
};
FeatureStats feature_statistics(const std::vector<Utterance>& corpus);
template <typename T>
void set_feature_normalization(Model<T>& model, const FeatureStats& stats);

struct EvalResult {
  double loss = 0.0;  // unsmoothed, per token
  double token_accuracy = 0.0;
  std::size_t tokens = 0;
};

template <typename T>
EvalResult evaluate(const Model<T>& model, const std::vector<Utterance>& corpus, std::size_t batch_size = 32);

struct TrainResult {
  std::size_t final_step = 0;
  std::size_t best_step = 0;
  double best_dev_accuracy = -1.0;
  double last_train_loss = 0.0;
  EvalResult last_dev;
  bool reached_target = false;
};

struct TrainOutputs {
  // Directory for train_log.csv and the best/ and last/ checkpoints; empty
  // disables all file output.
  std::filesystem::path run_dir;
  // Called after every logged line (step, split, loss, token_acc).
  std::function<void(std::size_t, const std::string&, double, double)> on_log;
};

// Batches visited at `step` (0-based) are a pure function of (seed, step), so
// a resumed run repeats the uninterrupted schedule exactly.
std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<Utterance>& corpus, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

template <typename T>
TrainResult train(Model<T>& model, const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                  const TrainConfig& config, const TrainOutputs& outputs = {});

// Continues from a `last/` checkpoint written by train(): restores the model,
// optimizer moments and step counter, then trains up to config.steps.
template <typename T>
TrainResult resume_training(Model<T>& model, const std::filesystem::path& checkpoint,
                            const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                            const TrainConfig& config, const TrainOutputs& outputs = {});

}  // namespace adast
