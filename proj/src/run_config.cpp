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


#include "adast/run_config.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include "adast/errors.hpp"
#include "adast/text.hpp"

namespace adast {

namespace {

std::string flag(bool v) { return v ? "true" : "false"; }

std::size_t to_size(const std::string& key, const std::string& value) {
  const auto v = text::parse_int<std::size_t>(value);
  if (!v) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  return *v;
}

double to_double(const std::string& key, const std::string& value) {
  const auto v = text::parse_double(value);
  if (!v) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return *v;
}

bool to_bool(const std::string& key, const std::string& value) {
  const auto v = text::parse_bool(value);
  if (!v) throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
  return *v;
}

std::vector<std::pair<std::string, std::string>> train_entries(const TrainConfig& t) {
  return {
      {"steps", std::to_string(t.steps)},
      {"batch_size", std::to_string(t.batch_size)},
      {"lr", text::format_double(t.adam.lr)},
      {"beta1", text::format_double(t.adam.beta1)},
      {"beta2", text::format_double(t.adam.beta2)},
      {"eps", text::format_double(t.adam.eps)},
      {"warmup_steps", std::to_string(t.adam.warmup_steps)},
      {"label_smoothing", text::format_double(t.label_smoothing)},
      {"clip_norm", text::format_double(t.clip_norm)},
      {"log_interval", std::to_string(t.log_interval)},
      {"eval_interval", std::to_string(t.eval_interval)},
      {"spec_time_masks", std::to_string(t.spec_time_masks)},
      {"spec_freq_masks", std::to_string(t.spec_freq_masks)},
      {"spec_max_t", std::to_string(t.spec_max_t)},
      {"spec_max_f", std::to_string(t.spec_max_f)},
      {"target_dev_accuracy", text::format_double(t.target_dev_accuracy)},
      {"global_cmvn", flag(t.global_cmvn)},
  };
}

bool set_train_value(TrainConfig& t, const std::string& key, const std::string& value) {
  const std::string k = "train." + key;
  if (key == "steps") t.steps = to_size(k, value);
  else if (key == "batch_size") t.batch_size = to_size(k, value);
  else if (key == "lr") t.adam.lr = to_double(k, value);
  else if (key == "beta1") t.adam.beta1 = to_double(k, value);
  else if (key == "beta2") t.adam.beta2 = to_double(k, value);
  else if (key == "eps") t.adam.eps = to_double(k, value);
  else if (key == "warmup_steps") t.adam.warmup_steps = to_size(k, value);
  else if (key == "label_smoothing") t.label_smoothing = to_double(k, value);
  else if (key == "clip_norm") t.clip_norm = to_double(k, value);
  else if (key == "log_interval") t.log_interval = to_size(k, value);
  else if (key == "eval_interval") t.eval_interval = to_size(k, value);
  else if (key == "spec_time_masks") t.spec_time_masks = to_size(k, value);
  else if (key == "spec_freq_masks") t.spec_freq_masks = to_size(k, value);
  else if (key == "spec_max_t") t.spec_max_t = to_size(k, value);
  else if (key == "spec_max_f") t.spec_max_f = to_size(k, value);
  else if (key == "target_dev_accuracy") t.target_dev_accuracy = to_double(k, value);
  else if (key == "global_cmvn") t.global_cmvn = to_bool(k, value);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> decode_entries(const DecodeOptions& d) {
  return {
      {"max_len", std::to_string(d.max_len)},
      {"beam", std::to_string(d.beam)},
      {"length_penalty", text::format_double(d.length_penalty)},
      {"mode", decode_mode_name(d.mode)},
  };
}

bool set_decode_value(DecodeOptions& d, const std::string& key, const std::string& value) {
  const std::string k = "decode." + key;
  if (key == "max_len") d.max_len = to_size(k, value);
  else if (key == "beam") d.beam = to_size(k, value);
  else if (key == "length_penalty") d.length_penalty = to_double(k, value);
  else if (key == "mode") d.mode = parse_decode_mode(value);
  else return false;
  return true;
}

std::vector<std::pair<std::string, std::string>> probe_entries(const ProbeConfig& p) {
  return {
      {"steps", std::to_string(p.steps)},
      {"lr", text::format_double(p.lr)},
      {"batch_size", std::to_string(p.batch_size)},
      {"pooling", pooling_name(p.pooling)},
      {"shuffle_labels", flag(p.shuffle_labels)},
  };
}

bool set_probe_value(ProbeConfig& p, const std::string& key, const std::string& value) {
  const std::string k = "probe." + key;
  if (key == "steps") p.steps = to_size(k, value);
  else if (key == "lr") p.lr = to_double(k, value);
  else if (key == "batch_size") p.batch_size = to_size(k, value);
  else if (key == "pooling") p.pooling = parse_pooling(value);
  else if (key == "shuffle_labels") p.shuffle_labels = to_bool(k, value);
  else return false;
  return true;
}

void append_prefixed(std::vector<std::pair<std::string, std::string>>& out, const std::string& prefix,
                     const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [k, v] : entries) out.emplace_back(prefix + k, v);
}

}  // namespace

std::string precision_name(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }

Precision parse_precision(const std::string& name) {
  if (name == "float32") return Precision::kFloat32;
  if (name == "float64") return Precision::kFloat64;
  throw ConfigError("unknown precision '" + name + "' (expected float32 or float64)");
}

std::string decode_mode_name(DecodeMode m) { return m == DecodeMode::kIncremental ? "incremental" : "full"; }

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "incremental") return DecodeMode::kIncremental;
  if (name == "full") return DecodeMode::kFull;
  throw ConfigError("unknown decode mode '" + name + "' (expected incremental or full)");
}

std::vector<std::pair<std::string, std::string>> run_config_entries(const RunConfig& c) {
  std::vector<std::pair<std::string, std::string>> out{
      {"seed", std::to_string(c.seed)},
      {"precision", precision_name(c.precision)},
      {"split", c.split},
      {"data_dir", c.data_dir.string()},
      {"run_dir", c.run_dir.string()},
      {"checkpoint", c.checkpoint.string()},
      {"out", c.out.string()},
      {"hypotheses", c.hypotheses.string()},
  };
  append_prefixed(out, "model.", model_config_entries(c.model));
  std::vector<std::pair<std::string, std::string>> data;
  for (auto& e : synthetic_spec_entries(c.data)) {
    if (e.first != "seed") data.push_back(std::move(e));
  }
  append_prefixed(out, "data.", data);
  append_prefixed(out, "train.", train_entries(c.train));
  append_prefixed(out, "decode.", decode_entries(c.decode));
  append_prefixed(out, "probe.", probe_entries(c.probe));
  return out;
}

void set_run_config_value(RunConfig& c, const std::string& key, const std::string& raw) {
  const std::string value(text::trim(raw));
  auto sub = [&](std::string_view prefix) -> std::string {
    return key.starts_with(prefix) ? key.substr(prefix.size()) : std::string();
  };
  bool known = true;
  if (key == "seed") {
    const auto v = text::parse_int<std::uint64_t>(value);
    if (!v) throw ConfigError("'seed' expects a non-negative integer, got '" + value + "'");
    c.seed = *v;
  } else if (key == "precision") {
    c.precision = parse_precision(value);
  } else if (key == "split") {
    if (value != "train" && value != "dev" && value != "test") {
      throw ConfigError("unknown split '" + value + "' (expected train, dev or test)");
    }
    c.split = value;
  } else if (key == "data_dir") c.data_dir = value;
  else if (key == "run_dir") c.run_dir = value;
  else if (key == "checkpoint") c.checkpoint = value;
  else if (key == "out") c.out = value;
  else if (key == "hypotheses") c.hypotheses = value;
  else if (const auto k = sub("model."); !k.empty()) known = set_model_config_value(c.model, k, value);
  else if (const auto k = sub("data."); !k.empty()) known = k != "seed" && set_synthetic_spec_value(c.data, k, value);
  else if (const auto k = sub("train."); !k.empty()) known = set_train_value(c.train, k, value);
  else if (const auto k = sub("decode."); !k.empty()) known = set_decode_value(c.decode, k, value);
  else if (const auto k = sub("probe."); !k.empty()) known = set_probe_value(c.probe, k, value);
  else known = false;
  if (!known) throw ConfigError("unknown configuration key '" + key + "'");
}

void apply_config_text(RunConfig& c, std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(text::trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError(where + "missing key before '='");
    try {
      set_run_config_value(c, key, std::string(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

void apply_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(c, ss.str(), path.string());
}

std::string format_run_config(const RunConfig& c) {
  std::string out;
  for (const auto& [k, v] : run_config_entries(c)) out += k + " = " + v + "\n";
  return out;
}

void validate_run_config(const RunConfig& c) {
  c.model.validate();
  SyntheticSpec spec = c.data;
  spec.seed = c.seed;
  try {
    spec.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  const TrainConfig& t = c.train;
  if (t.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(t.adam.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(t.adam.beta1 >= 0.0 && t.adam.beta1 < 1.0) || !(t.adam.beta2 >= 0.0 && t.adam.beta2 < 1.0)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(t.adam.eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (!(t.label_smoothing >= 0.0 && t.label_smoothing <= 0.3)) {
    throw ConfigError("train.label_smoothing must lie in [0, 0.3]");
  }
  if (!(t.clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be non-negative");
  if (!(t.target_dev_accuracy >= 0.0 && t.target_dev_accuracy <= 1.0)) {
    throw ConfigError("train.target_dev_accuracy must lie in [0, 1]");
  }
  if (c.decode.beam == 0) throw ConfigError("decode.beam must be at least 1");
  if (!(c.decode.length_penalty >= 0.0)) throw ConfigError("decode.length_penalty must be non-negative");
  if (c.probe.batch_size == 0) throw ConfigError("probe.batch_size must be positive");
  if (!(c.probe.lr > 0.0)) throw ConfigError("probe.lr must be positive");
}

std::filesystem::path default_run_dir(std::uint64_t seed, std::chrono::system_clock::time_point now) {
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&t, &utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%d-%H%M%S", &utc);
  return std::filesystem::path("runs") / (std::string(buf) + "-seed" + std::to_string(seed));
}

}  // namespace adast
