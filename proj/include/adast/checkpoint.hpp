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

// Directory checkpoints: `manifest.txt` (key=value text) plus `tensors.bin`
// (little-endian raw tensor data in manifest order).

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adast/model.hpp"

namespace adast {

inline constexpr int kCheckpointFormatVersion = 1;

// Optional payload stored next to the model parameters.
template <typename T>
struct CheckpointExtras {
  std::map<std::string, std::string> meta;
  std::vector<NamedParameter<T>> tensors;  // names must not clash with model parameters
};

template <typename T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& dir,
                     const CheckpointExtras<T>& extras = {});

// Loads into a model of precision T; stored values are converted when the
// checkpoint was written at the other precision. `extras`, when given,
// receives the metadata and every non-model tensor.
template <typename T>
Model<T> load_checkpoint(const std::filesystem::path& dir, CheckpointExtras<T>* extras = nullptr);

// Reads only the manifest.
ModelConfig read_checkpoint_config(const std::filesystem::path& dir);
std::map<std::string, std::string> read_checkpoint_meta(const std::filesystem::path& dir);

}  // namespace adast
