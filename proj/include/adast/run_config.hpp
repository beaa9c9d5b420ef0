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

// Flat `key = value` configuration shared by every CLI subcommand.
// Precedence: built-in defaults < config file < command-line flags.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adast/decoding.hpp"
#include "adast/model.hpp"
#include "adast/probe.hpp"
#include "adast/synthdata.hpp"
#include "adast/training.hpp"

namespace adast {

enum class Precision { kFloat32, kFloat64 };

std::string precision_name(Precision p);
Precision parse_precision(const std::string& name);
std::string decode_mode_name(DecodeMode m);
DecodeMode parse_decode_mode(const std::string& name);

struct RunConfig {
  std::uint64_t seed = 1;  // drives data generation, initialization, batching and probing
  Precision precision = Precision::kFloat32;
  ModelConfig model;       // keys "model.<field>"
  SyntheticSpec data;      // keys "data.<field>"; the seed comes from `seed`
  TrainConfig train;       // keys "train.<field>"
  DecodeOptions decode;    // keys "decode.<field>"
  ProbeConfig probe;       // keys "probe.<field>"
  std::string split = "test";  // corpus split read by decode, eval and reporting
  // Paths have no defaults; each subcommand checks the ones it needs.
  std::filesystem::path data_dir;
  std::filesystem::path run_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path out;
  std::filesystem::path hypotheses;
};

// Every recognized key with its current value, in a fixed order.
std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& config);

// Throws ConfigError for an unknown key or a malformed value.
void set_run_config_value(RunConfig& config, const std::string& key, const std::string& value);

// Applies `key = value` lines. Blank lines and text after '#' are ignored.
// `origin` names the source in error messages.
void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin);
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

// Round-trips through apply_config_text.
std::string format_run_config(const RunConfig& config);

// Range checks on everything that has no path semantics.
void validate_run_config(const RunConfig& config);

// "runs/<UTC yyyymmdd-hhmmss>-seed<seed>".
std::filesystem::path default_run_dir(std::uint64_t seed, std::chrono::system_clock::time_point now);

}  // namespace adast
