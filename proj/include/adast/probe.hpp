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
#include <string>
#include <vector>

#include "adast/model.hpp"
#include "adast/synthdata.hpp"

namespace adast {

enum class Pooling { kMean, kMax };

std::string pooling_name(Pooling p);
Pooling parse_pooling(const std::string& name);

struct ProbeConfig {
  std::size_t steps = 2000;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  Pooling pooling = Pooling::kMean;
  // Replace every label with an independent uniform draw (chance-level control).
  bool shuffle_labels = false;
  std::uint64_t seed = 1;
};

struct ProbeResult {
  std::string model_variant;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t n_classes = 0;
  std::size_t steps = 0;
  std::uint64_t encoder_checksum = 0;  // identical before and after probing
};

std::string probe_csv_header();
std::string probe_csv_row(const ProbeResult& r);

// FNV-1a over the raw bytes of every tensor, in order.
template <typename T>
std::uint64_t parameter_checksum(const std::vector<NamedParameter<T>>& params);

// Speech-encoder parameters (front end, subsampler, encoder layers, final norm).
template <typename T>
std::vector<NamedParameter<T>> encoder_parameters(const Model<T>& model);

// [N][d_model] pooled encoder states over non-padded rows.
template <typename T>
std::vector<std::vector<double>> pooled_encoder_states(const Model<T>& model, const std::vector<Utterance>& corpus,
                                                       Pooling pooling, std::size_t batch_size = 32);

// Trains a linear classifier on pooled states of the frozen encoder with
// train, reports accuracy on train, dev (val) and test.
template <typename T>
ProbeResult run_probe(const Model<T>& model, const SyntheticCorpora& data, const ProbeConfig& config);

ProbeResult run_probe(const std::filesystem::path& checkpoint, const SyntheticCorpora& data,
                      const ProbeConfig& config);

}  // namespace adast
