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


#include "adast/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "adast/checkpoint.hpp"
#include "adast/text.hpp"
#include "adast/training.hpp"

namespace adast {

std::string pooling_name(Pooling p) { return p == Pooling::kMean ? "mean" : "max"; }

Pooling parse_pooling(const std::string& name) {
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  throw ConfigError("unknown pooling '" + name + "' (expected mean or max)");
}

std::string probe_csv_header() {
  return "model_variant,n_classes,steps,train_accuracy,val_accuracy,test_accuracy,encoder_checksum";
}

std::string probe_csv_row(const ProbeResult& r) {
  char checksum[32];
  std::snprintf(checksum, sizeof(checksum), "%016llx", static_cast<unsigned long long>(r.encoder_checksum));
  return r.model_variant + "," + std::to_string(r.n_classes) + "," + std::to_string(r.steps) + "," +
         text::format_double(r.train_accuracy) + "," + text::format_double(r.val_accuracy) + "," +
         text::format_double(r.test_accuracy) + "," + checksum;
}

template <typename T>
std::uint64_t parameter_checksum(const std::vector<NamedParameter<T>>& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    for (T v : p.tensor.data()) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

template <typename T>
std::vector<NamedParameter<T>> encoder_parameters(const Model<T>& model) {
  std::vector<NamedParameter<T>> out = model.buffers();
  for (const auto& p : model.parameters()) {
    if (p.name.starts_with("subsampler") || p.name.starts_with("encoder")) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<std::vector<double>> pooled_encoder_states(const Model<T>& model, const std::vector<Utterance>& corpus,
                                                       Pooling pooling, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  out.reserve(corpus.size());
  std::vector<std::size_t> idx(corpus.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < corpus.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, corpus.size() - start);
    const Batch b = make_batch(corpus, std::span<const std::size_t>(idx.data() + start, n));
    const auto enc = model.encode(b.feature_tensor<T>(), b.feature_pad);
    const Tensor<T> pooled = pooling == Pooling::kMean ? ops::masked_mean_rows(enc.states, enc.pad)
                                                       : ops::masked_max_rows(enc.states, enc.pad);
    const std::size_t d = pooled.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = pooled.data().subspan(i * d, d);
      out.emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

namespace {

std::vector<int> labels_of(const std::vector<Utterance>& corpus) {
  std::vector<int> out;
  for (const auto& u : corpus) {
    if (u.class_id < 0) throw ValidationError("utterance " + u.id + " carries no class label");
    out.push_back(u.class_id);
  }
  return out;
}

// Per-dimension z-scoring with training-split statistics.
void standardize(std::vector<std::vector<double>>& train, std::vector<std::vector<double>>& val,
                 std::vector<std::vector<double>>& test) {
  const std::size_t d = train.front().size();
  std::vector<double> mean(d, 0.0), istd(d, 0.0);
  for (const auto& x : train) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
  }
  for (auto& m : mean) m /= static_cast<double>(train.size());
  for (const auto& x : train) {
    for (std::size_t j = 0; j < d; ++j) istd[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  }
  for (auto& v : istd) v = 1.0 / std::sqrt(v / static_cast<double>(train.size()) + 1e-12);
  for (auto* split : {&train, &val, &test}) {
    for (auto& x : *split) {
      for (std::size_t j = 0; j < d; ++j) x[j] = (x[j] - mean[j]) * istd[j];
    }
  }
}

double accuracy(const std::vector<std::vector<double>>& x, const std::vector<int>& y, const Tensor<double>& w,
                const Tensor<double>& b) {
  if (x.empty()) return 0.0;
  const std::size_t d = w.dim(0), c = w.dim(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < c; ++k) {
      double s = b.data()[k];
      for (std::size_t j = 0; j < d; ++j) s += x[i][j] * w.data()[j * c + k];
      if (s > best_score) {
        best_score = s;
        best = k;
      }
    }
    correct += static_cast<int>(best) == y[i];
  }
  return static_cast<double>(correct) / static_cast<double>(x.size());
}

}  // namespace

template <typename T>
ProbeResult run_probe(const Model<T>& model, const SyntheticCorpora& data, const ProbeConfig& config) {
  if (data.train.empty()) throw ValidationError("probe needs a non-empty training split");
  if (config.batch_size == 0) throw ConfigError("probe batch_size must be positive");
  std::vector<int> y_train = labels_of(data.train), y_val = labels_of(data.dev), y_test = labels_of(data.test);
  int max_label = 0;
  for (const auto* ys : {&y_train, &y_val, &y_test}) {
    for (int v : *ys) max_label = std::max(max_label, v);
  }
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
  if (n_classes < 2) throw ValidationError("probe needs at least two classes");
  if (config.shuffle_labels) {
    Rng rng = Rng::derive(config.seed, 7);
    for (auto* ys : {&y_train, &y_val, &y_test}) {
      for (int& v : *ys) v = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(n_classes) - 1));
    }
  }

  const auto frozen = encoder_parameters(model);
  const std::uint64_t before = parameter_checksum(frozen);
  auto x_train = pooled_encoder_states(model, data.train, config.pooling);
  auto x_val = pooled_encoder_states(model, data.dev, config.pooling);
  auto x_test = pooled_encoder_states(model, data.test, config.pooling);

  const std::size_t d = x_train.front().size();
  standardize(x_train, x_val, x_test);
  Tensor<double> w = Tensor<double>::zeros({d, n_classes}, true);
  Tensor<double> b = Tensor<double>::zeros({n_classes}, true);
  const std::vector<NamedParameter<double>> params{{"probe.weight", w}, {"probe.bias", b}};
  AdamConfig adam_config;
  adam_config.lr = config.lr;
  adam_config.warmup_steps = 0;
  AdamState<double> adam = make_adam_state(params, adam_config);
  const std::size_t batch = std::min(config.batch_size, x_train.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    Rng rng = Rng::derive(config.seed, 1000 + step);
    std::vector<double> xb;
    TokenBatch yb;
    xb.reserve(batch * d);
    for (std::size_t i = 0; i < batch; ++i) {
      const auto k = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x_train.size()) - 1));
      xb.insert(xb.end(), x_train[k].begin(), x_train[k].end());
      yb.push_back({y_train[k]});
    }
    zero_grads(params);
    const Tensor<double> logits = ops::linear(Tensor<double>({batch, 1, d}, std::move(xb)), w, b);
    cross_entropy(logits, yb, std::vector<PadList>(batch, PadList{false}), 0.0).backward();
    adam_step(params, adam);
  }

  const std::uint64_t after = parameter_checksum(encoder_parameters(model));
  if (after != before) throw ContractError("probe training changed the frozen encoder parameters");
  ProbeResult r;
  r.model_variant = variant_name(model.variant());
  r.n_classes = n_classes;
  r.steps = config.steps;
  r.encoder_checksum = after;
  r.train_accuracy = accuracy(x_train, y_train, w, b);
  r.val_accuracy = accuracy(x_val, y_val, w, b);
  r.test_accuracy = accuracy(x_test, y_test, w, b);
  return r;
}

ProbeResult run_probe(const std::filesystem::path& checkpoint, const SyntheticCorpora& data,
                      const ProbeConfig& config) {
  return run_probe(load_checkpoint<float>(checkpoint), data, config);
}

#define ADAST_INSTANTIATE_PROBE(T)                                                                       \
  template std::uint64_t parameter_checksum(const std::vector<NamedParameter<T>>&);                      \
  template std::vector<NamedParameter<T>> encoder_parameters(const Model<T>&);                           \
  template std::vector<std::vector<double>> pooled_encoder_states(const Model<T>&,                       \
                                                                  const std::vector<Utterance>&, Pooling, \
                                                                  std::size_t);                          \
  template ProbeResult run_probe(const Model<T>&, const SyntheticCorpora&, const ProbeConfig&);

ADAST_INSTANTIATE_PROBE(float)
ADAST_INSTANTIATE_PROBE(double)

}  // namespace adast
