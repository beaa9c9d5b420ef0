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

#include "adast/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "adast/checkpoint.hpp"
#include "adast/text.hpp"

namespace adast {

namespace fs = std::filesystem;

namespace {

// Rng stream offsets; each step draws from its own derived stream.
constexpr std::uint64_t kAugmentStream = 1'000'000'000ULL;
constexpr std::uint64_t kDropoutStream = 2'000'000'000ULL;
constexpr std::size_t kPoolBatches = 32;

template <typename T>
bool finite_span(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

}  // namespace

template <typename T>
Tensor<T> Batch::feature_tensor() const {
  return Tensor<T>({size, max_frames, feature_dim}, std::vector<T>(features.begin(), features.end()));
}

std::size_t Batch::target_tokens() const {
  std::size_t n = 0;
  for (const auto& p : tgt_pad) n += static_cast<std::size_t>(std::count(p.begin(), p.end(), false));
  return n;
}

Batch make_batch(const std::vector<Utterance>& corpus, std::span<const std::size_t> indices, std::size_t min_frames,
                 std::size_t min_tokens) {
  if (indices.empty()) throw ValidationError("make_batch: no utterances");
  Batch b;
  b.size = indices.size();
  b.indices.assign(indices.begin(), indices.end());
  b.max_frames = min_frames;
  std::size_t t_len = min_tokens;
  b.feature_dim = corpus.at(indices[0]).feature_dim;
  for (std::size_t i : indices) {
    const Utterance& u = corpus.at(i);
    if (u.feature_dim != b.feature_dim) throw DimensionError("make_batch: mixed feature dimensions");
    b.max_frames = std::max(b.max_frames, u.frames);
    t_len = std::max(t_len, u.target.size() + 1);
  }
  b.features.assign(b.size * b.max_frames * b.feature_dim, 0.0f);
  for (std::size_t k = 0; k < b.size; ++k) {
    const Utterance& u = corpus[indices[k]];
    std::copy(u.features.begin(), u.features.end(),
              b.features.begin() + static_cast<std::ptrdiff_t>(k * b.max_frames * b.feature_dim));
    PadList fp(b.max_frames, true);
    std::fill(fp.begin(), fp.begin() + static_cast<std::ptrdiff_t>(u.frames), false);
    b.feature_pad.push_back(std::move(fp));

    std::vector<int> in(t_len, kPadId), out(t_len, kPadId);
    PadList tp(t_len, true);
    in[0] = kBosId;
    for (std::size_t t = 0; t < u.target.size(); ++t) {
      in[t + 1] = u.target[t];
      out[t] = u.target[t];
    }
    out[u.target.size()] = kEosId;
    std::fill(tp.begin(), tp.begin() + static_cast<std::ptrdiff_t>(u.target.size() + 1), false);
    b.tgt_in.push_back(std::move(in));
    b.tgt_out.push_back(std::move(out));
    b.tgt_pad.push_back(std::move(tp));
  }
  return b;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const TokenBatch& tgt_out, const std::vector<PadList>& tgt_pad,
                        double label_smoothing) {
  if (!(label_smoothing >= 0.0 && label_smoothing <= 0.3)) {
    throw ConfigError("label smoothing must lie in [0, 0.3]");
  }
  if (logits.rank() != 3 || logits.dim(0) != tgt_out.size() || tgt_pad.size() != tgt_out.size()) {
    throw DimensionError("cross_entropy: logits " + shape_to_string(logits.shape()) + " do not match the targets");
  }
  const std::size_t batch = logits.dim(0), t_len = logits.dim(1), vocab = logits.dim(2);
  std::size_t count = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (tgt_out[b].size() != t_len || tgt_pad[b].size() != t_len) {
      throw DimensionError("cross_entropy: target row length differs from logits");
    }
    for (std::size_t t = 0; t < t_len; ++t) {
      if (tgt_pad[b][t]) continue;
      const int id = tgt_out[b][t];
      if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
        throw ValidationError("target id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
      }
      ++count;
    }
  }
  if (count == 0) throw ValidationError("cross_entropy: every target position is padding");
  const double n = static_cast<double>(count);
  const double off = label_smoothing / static_cast<double>(vocab);
  std::vector<T> weights(batch * t_len * vocab, T(0));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_len; ++t) {
      if (tgt_pad[b][t]) continue;
      T* w = weights.data() + (b * t_len + t) * vocab;
      for (std::size_t v = 0; v < vocab; ++v) w[v] = static_cast<T>(-off / n);
      w[static_cast<std::size_t>(tgt_out[b][t])] = static_cast<T>(-(1.0 - label_smoothing + off) / n);
    }
  }
  return ops::weighted_sum(ops::log_softmax_lastdim(logits), std::span<const T>(weights));
}

template <typename T>
std::pair<std::size_t, std::size_t> count_correct(const Tensor<T>& logits, const TokenBatch& tgt_out,
                                                  const std::vector<PadList>& tgt_pad) {
  const std::size_t batch = logits.dim(0), t_len = logits.dim(1), vocab = logits.dim(2);
  std::size_t correct = 0, total = 0;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_len; ++t) {
      if (tgt_pad[b][t]) continue;
      const T* row = logits.data().data() + (b * t_len + t) * vocab;
      std::size_t best = kEosId;
      for (std::size_t v = kEosId; v < vocab; ++v) {
        if (v == static_cast<std::size_t>(kBosId)) continue;
        if (row[v] > row[best]) best = v;
      }
      correct += static_cast<int>(best) == tgt_out[b][t];
      ++total;
    }
  }
  return {correct, total};
}

double learning_rate(const AdamConfig& c, std::size_t step) {
  if (step == 0) step = 1;
  if (c.warmup_steps == 0) return c.lr;
  const double s = static_cast<double>(step), w = static_cast<double>(c.warmup_steps);
  return c.lr * std::min(s / w, std::sqrt(w / s));
}

template <typename T>
AdamState<T> make_adam_state(const std::vector<NamedParameter<T>>& params, const AdamConfig& config) {
  AdamState<T> s;
  s.config = config;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), T(0));
    s.v.emplace_back(p.tensor.numel(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(const std::vector<NamedParameter<T>>& params, AdamState<T>& state) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: optimizer state does not match the parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].tensor.numel()) {
      throw DimensionError("adam_step: moment shape differs for " + params[i].name);
    }
    if (params[i].tensor.has_grad() && !finite_span(params[i].tensor.grad())) {
      throw NonFiniteGradientError("non-finite gradient in parameter '" + params[i].name + "' at step " +
                                   std::to_string(state.step + 1));
    }
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double lr = learning_rate(c, state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = static_cast<T>(c.beta1 * static_cast<double>(m[k]) + (1.0 - c.beta1) * gk);
      v[k] = static_cast<T>(c.beta2 * static_cast<double>(v[k]) + (1.0 - c.beta2) * gk * gk);
      const double mh = static_cast<double>(m[k]) / bc1;
      const double vh = static_cast<double>(v[k]) / bc2;
      w[k] = static_cast<T>(static_cast<double>(w[k]) - lr * mh / (std::sqrt(vh) + c.eps));
    }
  }
}

template <typename T>
double clip_grad_norm(const std::vector<NamedParameter<T>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      Tensor<T> t = p.tensor;
      for (T& g : t.mutable_grad()) g = static_cast<T>(static_cast<double>(g) * scale);
    }
  }
  return norm;
}

template <typename T>
void zero_grads(const std::vector<NamedParameter<T>>& params) {
  for (const auto& p : params) {
    Tensor<T> t = p.tensor;
    t.zero_grad();
  }
}

void spec_augment(std::span<float> features, std::size_t frames, std::size_t dim, std::size_t time_masks,
                  std::size_t freq_masks, std::size_t max_t, std::size_t max_f, Rng& rng) {
  if (features.size() < frames * dim) throw DimensionError("spec_augment: feature block is too small");
  if (frames == 0 || dim == 0) return;
  for (std::size_t m = 0; m < time_masks; ++m) {
    const auto width = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(std::min(max_t, frames))));
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(frames - width)));
    for (std::size_t t = start; t < start + width; ++t) {
      std::fill_n(features.begin() + static_cast<std::ptrdiff_t>(t * dim), dim, 0.0f);
    }
  }
  for (std::size_t m = 0; m < freq_masks; ++m) {
    const auto width = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(std::min(max_f, dim))));
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(dim - width)));
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t f = start; f < start + width; ++f) features[t * dim + f] = 0.0f;
    }
  }
}

FeatureStats feature_statistics(const std::vector<Utterance>& corpus) {
  if (corpus.empty()) throw ValidationError("feature statistics need at least one utterance");
  const std::size_t f = corpus.front().feature_dim;
  std::vector<double> sum(f, 0.0), sq(f, 0.0);
  std::size_t frames = 0;
  for (const auto& u : corpus) {
    if (u.feature_dim != f) throw DimensionError("feature statistics: mixed feature dimensions");
    for (std::size_t t = 0; t < u.frames; ++t) {
      for (std::size_t c = 0; c < f; ++c) {
        const double x = u.features[t * f + c];
        sum[c] += x;
        sq[c] += x * x;
      }
    }
    frames += u.frames;
  }
  FeatureStats s;
  for (std::size_t c = 0; c < f; ++c) {
    const double mean = sum[c] / static_cast<double>(frames);
    const double var = std::max(0.0, sq[c] / static_cast<double>(frames) - mean * mean);
    s.mean.push_back(mean);
    s.istd.push_back(1.0 / std::sqrt(var + 1e-8));
  }
  return s;
}

template <typename T>
void set_feature_normalization(Model<T>& model, const FeatureStats& stats) {
  if (stats.mean.size() != model.feature_mean.numel() || stats.istd.size() != model.feature_istd.numel()) {
    throw DimensionError("feature statistics have " + std::to_string(stats.mean.size()) + " dims, the model expects " +
                         std::to_string(model.feature_mean.numel()));
  }
  auto m = model.feature_mean.mutable_data();
  auto s = model.feature_istd.mutable_data();
  for (std::size_t c = 0; c < stats.mean.size(); ++c) {
    m[c] = static_cast<T>(stats.mean[c]);
    s[c] = static_cast<T>(stats.istd[c]);
  }
}

template <typename T>
EvalResult evaluate(const Model<T>& model, const std::vector<Utterance>& corpus, std::size_t batch_size) {
  EvalResult r;
  if (corpus.empty()) return r;
  NoGradGuard no_grad;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return corpus[a].frames < corpus[b].frames; });
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - start);
    const Batch b = make_batch(corpus, std::span<const std::size_t>(order.data() + start, n));
    const auto enc = model.encode(b.feature_tensor<T>(), b.feature_pad);
    const auto logits = model.decode_train(enc, b.tgt_in, b.tgt_pad);
    const std::size_t tokens = b.target_tokens();
    loss_sum += static_cast<double>(cross_entropy(logits, b.tgt_out, b.tgt_pad, 0.0).item()) *
                static_cast<double>(tokens);
    correct += count_correct(logits, b.tgt_out, b.tgt_pad).first;
    r.tokens += tokens;
  }
  r.loss = loss_sum / static_cast<double>(r.tokens);
  r.token_accuracy = static_cast<double>(correct) / static_cast<double>(r.tokens);
  return r;
}

std::vector<std::vector<std::size_t>> epoch_batches(const std::vector<Utterance>& corpus, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  Rng rng = Rng::derive(seed, epoch);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  // Sort within pools of kPoolBatches batches by length, then shuffle batch order.
  std::vector<std::vector<std::size_t>> batches;
  const std::size_t pool = batch_size * kPoolBatches;
  for (std::size_t start = 0; start < order.size(); start += pool) {
    const auto first = order.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), start + pool));
    std::stable_sort(first, last, [&](std::size_t a, std::size_t b) { return corpus[a].frames < corpus[b].frames; });
    for (auto it = first; it < last; it += static_cast<std::ptrdiff_t>(std::min<std::size_t>(batch_size, last - it))) {
      batches.emplace_back(it, it + static_cast<std::ptrdiff_t>(std::min<std::size_t>(batch_size, last - it)));
    }
  }
  for (std::size_t i = batches.size(); i > 1; --i) {
    std::swap(batches[i - 1], batches[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  }
  return batches;
}

namespace {

template <typename T>
void save_training_state(const Model<T>& model, const AdamState<T>& adam, const TrainResult& result,
                         const TrainConfig& config, const fs::path& dir) {
  CheckpointExtras<T> ex;
  ex.meta["step"] = std::to_string(adam.step);
  ex.meta["best_step"] = std::to_string(result.best_step);
  ex.meta["best_dev_accuracy"] = text::format_double(result.best_dev_accuracy);
  ex.meta["seed"] = std::to_string(config.seed);
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ex.tensors.push_back({"optim.m." + params[i].name, Tensor<T>({adam.m[i].size()}, adam.m[i])});
    ex.tensors.push_back({"optim.v." + params[i].name, Tensor<T>({adam.v[i].size()}, adam.v[i])});
  }
  save_checkpoint(model, dir, ex);
}

template <typename T>
TrainResult run_training(Model<T>& model, AdamState<T>& adam, TrainResult result,
                         const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                         const TrainConfig& config, const TrainOutputs& outputs) {
  if (train_set.empty()) throw ValidationError("training set is empty");
  if (config.batch_size == 0 || config.log_interval == 0 || config.eval_interval == 0) {
    throw ConfigError("batch_size, log_interval and eval_interval must be positive");
  }
  const auto params = model.parameters();
  std::ofstream log;
  if (!outputs.run_dir.empty()) {
    fs::create_directories(outputs.run_dir);
    const fs::path log_path = outputs.run_dir / "train_log.csv";
    const bool fresh = !fs::exists(log_path) || fs::file_size(log_path) == 0;
    log.open(log_path, std::ios::app);
    if (fresh) log << "step,split,loss,token_acc\n";
  }
  auto emit = [&](std::size_t step, const std::string& split, double loss, double acc) {
    if (log.is_open()) {
      log << step << ',' << split << ',' << text::format_double(loss) << ',' << text::format_double(acc) << '\n';
      log.flush();
    }
    if (outputs.on_log) outputs.on_log(step, split, loss, acc);
  };

  const std::size_t per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::vector<std::size_t>> batches;
  double interval_loss = 0.0;
  std::size_t interval_steps = 0, interval_correct = 0, interval_tokens = 0;
  bool saved_last = false;

  for (std::size_t step = adam.step; step < config.steps; ++step) {
    const std::size_t epoch = step / per_epoch;
    if (epoch != cached_epoch) {
      batches = epoch_batches(train_set, config.batch_size, config.seed, epoch);
      cached_epoch = epoch;
    }
    Batch batch = make_batch(train_set, batches[step % per_epoch]);
    if (config.spec_time_masks > 0 || config.spec_freq_masks > 0) {
      Rng aug = Rng::derive(config.seed, kAugmentStream + step);
      for (std::size_t k = 0; k < batch.size; ++k) {
        const std::size_t frames = train_set[batch.indices[k]].frames;
        std::span<float> block(batch.features.data() + k * batch.max_frames * batch.feature_dim,
                               frames * batch.feature_dim);
        spec_augment(block, frames, batch.feature_dim, config.spec_time_masks, config.spec_freq_masks,
                     config.spec_max_t, config.spec_max_f, aug);
      }
    }
    Rng drop = Rng::derive(config.seed, kDropoutStream + step);
    ForwardOptions opts{true, &drop};

    zero_grads(params);
    const auto enc = model.encode(batch.feature_tensor<T>(), batch.feature_pad, opts);
    const auto logits = model.decode_train(enc, batch.tgt_in, batch.tgt_pad, opts);
    const Tensor<T> loss = cross_entropy(logits, batch.tgt_out, batch.tgt_pad, config.label_smoothing);
    const double loss_value = static_cast<double>(loss.item());
    if (!std::isfinite(loss_value)) {
      throw DivergenceError("training loss became non-finite at step " + std::to_string(step + 1) +
                            "; the last good checkpoint is kept");
    }
    loss.backward();
    clip_grad_norm(params, config.clip_norm);
    adam_step(params, adam);

    const auto [correct, total] = count_correct(logits, batch.tgt_out, batch.tgt_pad);
    interval_loss += loss_value;
    interval_correct += correct;
    interval_tokens += total;
    ++interval_steps;
    result.last_train_loss = loss_value;
    result.final_step = step + 1;
    saved_last = false;

    const std::size_t done = step + 1;
    if (done % config.log_interval == 0 || done == config.steps) {
      emit(done, "train", interval_loss / static_cast<double>(interval_steps),
           static_cast<double>(interval_correct) / static_cast<double>(interval_tokens));
      interval_loss = 0.0;
      interval_steps = interval_correct = interval_tokens = 0;
    }
    if (done % config.eval_interval == 0 || done == config.steps) {
      if (!dev_set.empty()) {
        result.last_dev = evaluate(model, dev_set);
        emit(done, "dev", result.last_dev.loss, result.last_dev.token_accuracy);
        if (result.last_dev.token_accuracy > result.best_dev_accuracy) {
          result.best_dev_accuracy = result.last_dev.token_accuracy;
          result.best_step = done;
          if (!outputs.run_dir.empty()) save_checkpoint(model, outputs.run_dir / "best");
        }
      }
      if (!outputs.run_dir.empty()) save_training_state(model, adam, result, config, outputs.run_dir / "last");
      saved_last = true;
      if (config.target_dev_accuracy > 0.0 && !dev_set.empty() &&
          result.last_dev.token_accuracy >= config.target_dev_accuracy) {
        result.reached_target = true;
        break;
      }
    }
  }
  if (!saved_last && !outputs.run_dir.empty() && result.final_step > 0) {
    save_training_state(model, adam, result, config, outputs.run_dir / "last");
  }
  if (dev_set.empty() && !outputs.run_dir.empty()) save_checkpoint(model, outputs.run_dir / "best");
  return result;
}

}  // namespace

template <typename T>
TrainResult train(Model<T>& model, const std::vector<Utterance>& train_set, const std::vector<Utterance>& dev_set,
                  const TrainConfig& config, const TrainOutputs& outputs) {
  if (config.global_cmvn) set_feature_normalization(model, feature_statistics(train_set));
  AdamState<T> adam = make_adam_state(model.parameters(), config.adam);
  return run_training(model, adam, TrainResult{}, train_set, dev_set, config, outputs);
}

template <typename T>
TrainResult resume_training(Model<T>& model, const fs::path& checkpoint, const std::vector<Utterance>& train_set,
                            const std::vector<Utterance>& dev_set, const TrainConfig& config,
                            const TrainOutputs& outputs) {
  CheckpointExtras<T> ex;
  model = load_checkpoint<T>(checkpoint, &ex);
  const auto params = model.parameters();
  AdamState<T> adam = make_adam_state(params, config.adam);
  auto meta_size = [&](const std::string& key) -> std::size_t {
    const auto it = ex.meta.find(key);
    const auto v = it == ex.meta.end() ? std::nullopt : text::parse_int<std::size_t>(it->second);
    if (!v) throw CorruptCheckpointError("checkpoint lacks training metadata '" + key + "'");
    return *v;
  };
  adam.step = meta_size("step");
  TrainResult result;
  result.final_step = adam.step;
  result.best_step = meta_size("best_step");
  if (const auto it = ex.meta.find("best_dev_accuracy"); it != ex.meta.end()) {
    result.best_dev_accuracy = text::parse_double(it->second).value_or(-1.0);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    bool found_m = false, found_v = false;
    for (const auto& t : ex.tensors) {
      if (t.name == "optim.m." + params[i].name && t.tensor.numel() == adam.m[i].size()) {
        std::copy(t.tensor.data().begin(), t.tensor.data().end(), adam.m[i].begin());
        found_m = true;
      } else if (t.name == "optim.v." + params[i].name && t.tensor.numel() == adam.v[i].size()) {
        std::copy(t.tensor.data().begin(), t.tensor.data().end(), adam.v[i].begin());
        found_v = true;
      }
    }
    if (!found_m || !found_v) {
      throw CorruptCheckpointError("checkpoint lacks optimizer moments for '" + params[i].name + "'");
    }
  }
  return run_training(model, adam, result, train_set, dev_set, config, outputs);
}

#define ADAST_INSTANTIATE_TRAINING(T)                                                                          \
  template Tensor<T> Batch::feature_tensor<T>() const;                                                         \
  template Tensor<T> cross_entropy(const Tensor<T>&, const TokenBatch&, const std::vector<PadList>&, double);  \
  template std::pair<std::size_t, std::size_t> count_correct(const Tensor<T>&, const TokenBatch&,              \
                                                             const std::vector<PadList>&);                     \
  template AdamState<T> make_adam_state(const std::vector<NamedParameter<T>>&, const AdamConfig&);             \
  template void adam_step(const std::vector<NamedParameter<T>>&, AdamState<T>&);                               \
  template double clip_grad_norm(const std::vector<NamedParameter<T>>&, double);                               \
  template void zero_grads(const std::vector<NamedParameter<T>>&);                                             \
  template void set_feature_normalization(Model<T>&, const FeatureStats&);                                    \
  template EvalResult evaluate(const Model<T>&, const std::vector<Utterance>&, std::size_t);                   \
  template TrainResult train(Model<T>&, const std::vector<Utterance>&, const std::vector<Utterance>&,          \
                             const TrainConfig&, const TrainOutputs&);                                         \
  template TrainResult resume_training(Model<T>&, const fs::path&, const std::vector<Utterance>&,              \
                                       const std::vector<Utterance>&, const TrainConfig&, const TrainOutputs&);

ADAST_INSTANTIATE_TRAINING(float)
ADAST_INSTANTIATE_TRAINING(double)

}  // namespace adast
