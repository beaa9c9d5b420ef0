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

#include "adast/synthdata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "adast/errors.hpp"
#include "adast/model.hpp"
#include "adast/rng.hpp"
#include "adast/text.hpp"

namespace adast {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'A', 'D', 'S', 'T'};
constexpr std::uint32_t kRecordVersion = 1;

// Stream ids for Rng::derive.
enum : std::uint64_t { kRemapStream = 1, kProtoStream = 2, kClassStream = 3, kSplitStream = 100 };

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& blob, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[at + i])) << (8 * i);
  return v;
}

std::string join_tokens(const std::vector<int>& t) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) out += (i ? " " : "") + std::to_string(t[i]);
  return out;
}

std::vector<int> split_tokens(const std::string& s, std::size_t offset) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (ss >> tok) {
    const auto v = text::parse_int<int>(tok);
    if (!v) throw ParseError("bad token '" + tok + "' in manifest", offset);
    out.push_back(*v);
  }
  return out;
}

std::vector<Utterance> generate_split(const SyntheticSpec& spec, const std::string& name, std::size_t count,
                                      std::uint64_t stream, const TokenRemap& remap,
                                      const std::vector<std::vector<float>>& protos,
                                      const std::vector<std::vector<float>>& biases) {
  Rng rng = Rng::derive(spec.seed, stream);
  std::vector<Utterance> out;
  out.reserve(count);
  const int first = kFirstRealToken, last = static_cast<int>(spec.vocab_size) - 1;
  for (std::size_t u = 0; u < count; ++u) {
    Utterance utt;
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%06zu", name.c_str(), u);
    utt.id = id;
    utt.feature_dim = spec.feature_dim;
    const auto n_tok = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min_tokens), static_cast<std::int64_t>(spec.max_tokens)));
    for (std::size_t i = 0; i < n_tok; ++i) utt.source.push_back(static_cast<int>(rng.uniform_int(first, last)));
    utt.target = derive_target(utt.source, spec.mode, remap);
    if (spec.n_classes > 0) {
      utt.class_id = static_cast<int>(rng.uniform_int(0, static_cast<std::int64_t>(spec.n_classes) - 1));
    }
    for (int tok : utt.source) {
      const std::size_t frames =
          spec.mode == TaskMode::kMtLike
              ? kMtFramesPerToken
              : static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(spec.min_frames_per_token),
                                                         static_cast<std::int64_t>(spec.max_frames_per_token)));
      for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t c = 0; c < spec.feature_dim; ++c) {
          double v = protos[static_cast<std::size_t>(tok)][c];
          if (utt.class_id >= 0) v += biases[static_cast<std::size_t>(utt.class_id)][c];
          if (spec.noise_std > 0.0) v += rng.normal(0.0, spec.noise_std);
          utt.features.push_back(static_cast<float>(v));
        }
      }
      utt.frames += frames;
    }
    out.push_back(std::move(utt));
  }
  return out;
}

}  // namespace

std::string task_mode_name(TaskMode mode) {
  switch (mode) {
    case TaskMode::kAsrLike: return "asr_like";
    case TaskMode::kMtLike: return "mt_like";
    case TaskMode::kStLike: return "st_like";
  }
  return "unknown";
}

TaskMode parse_task_mode(const std::string& name) {
  if (name == "asr_like") return TaskMode::kAsrLike;
  if (name == "mt_like") return TaskMode::kMtLike;
  if (name == "st_like") return TaskMode::kStLike;
  throw ConfigError("unknown task mode '" + name + "'; valid modes are asr_like, mt_like, st_like");
}

void SyntheticSpec::validate() const {
  if (vocab_size <= static_cast<std::size_t>(kFirstRealToken)) {
    throw ValidationError("vocab_size must exceed the reserved ids");
  }
  if (min_tokens == 0 || min_tokens > max_tokens) throw ValidationError("token range must satisfy 1 <= min <= max");
  if (min_frames_per_token == 0 || min_frames_per_token > max_frames_per_token) {
    throw ValidationError("frames_per_token range must satisfy 1 <= min <= max");
  }
  if (feature_dim == 0) throw ValidationError("feature_dim must be positive");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be non-negative");
  if (n_classes == 1) throw ValidationError("n_classes must be 0 (unlabeled) or at least 2");
  if (!(class_bias_scale >= 0.0)) throw ValidationError("class_bias_scale must be non-negative");
}

TokenRemap make_remap(std::size_t vocab_size, std::uint64_t seed) {
  TokenRemap r;
  r.forward.resize(vocab_size);
  std::iota(r.forward.begin(), r.forward.end(), 0);
  Rng rng = Rng::derive(seed, kRemapStream);
  // Fisher-Yates over the real ids with our own index draws (portable across
  // standard libraries, unlike std::shuffle).
  for (std::size_t i = vocab_size - 1; i > static_cast<std::size_t>(kFirstRealToken); --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(kFirstRealToken, static_cast<std::int64_t>(i)));
    std::swap(r.forward[i], r.forward[j]);
  }
  r.inverse.resize(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) r.inverse[static_cast<std::size_t>(r.forward[i])] = static_cast<int>(i);
  return r;
}

std::vector<int> reorder_pairs(std::vector<int> tokens) {
  for (std::size_t k = 0; k + 1 < tokens.size(); k += 2) {
    if (tokens[k] % 2 == 1 && tokens[k + 1] % 2 == 1) std::swap(tokens[k], tokens[k + 1]);
  }
  return tokens;
}

std::vector<int> derive_target(const std::vector<int>& source, TaskMode mode, const TokenRemap& remap) {
  if (mode == TaskMode::kAsrLike) return source;
  std::vector<int> mapped;
  mapped.reserve(source.size());
  for (int t : source) {
    if (t < 0 || static_cast<std::size_t>(t) >= remap.forward.size()) {
      throw ValidationError("token " + std::to_string(t) + " outside the vocabulary");
    }
    mapped.push_back(remap.forward[static_cast<std::size_t>(t)]);
  }
  return reorder_pairs(std::move(mapped));
}

std::vector<int> recover_source(const std::vector<int>& target, TaskMode mode, const TokenRemap& remap) {
  if (mode == TaskMode::kAsrLike) return target;
  std::vector<int> out = reorder_pairs(target);
  for (int& t : out) t = remap.inverse[static_cast<std::size_t>(t)];
  return out;
}

std::vector<std::vector<float>> make_prototypes(std::size_t vocab_size, std::size_t feature_dim,
                                                std::uint64_t seed) {
  Rng rng = Rng::derive(seed, kProtoStream);
  std::vector<std::vector<float>> out(vocab_size, std::vector<float>(feature_dim));
  for (auto& row : out) {
    double norm = 0.0;
    std::vector<double> v(feature_dim);
    for (auto& x : v) {
      x = rng.normal(0.0, 1.0);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < feature_dim; ++c) row[c] = static_cast<float>(v[c] / norm);
  }
  return out;
}

std::vector<std::vector<float>> make_class_biases(std::size_t n_classes, std::size_t feature_dim, double scale,
                                                  std::uint64_t seed) {
  auto out = make_prototypes(n_classes, feature_dim, Rng::derive(seed, kClassStream).next());
  for (auto& row : out) {
    for (auto& x : row) x = static_cast<float>(x * scale);
  }
  return out;
}

SyntheticCorpora generate(const SyntheticSpec& spec) {
  spec.validate();
  const TokenRemap remap = make_remap(spec.vocab_size, spec.seed);
  const auto protos = make_prototypes(spec.vocab_size, spec.feature_dim, spec.seed);
  const auto biases = make_class_biases(spec.n_classes, spec.feature_dim, spec.class_bias_scale, spec.seed);
  SyntheticCorpora c;
  c.train = generate_split(spec, "train", spec.n_train, kSplitStream + 0, remap, protos, biases);
  c.dev = generate_split(spec, "dev", spec.n_dev, kSplitStream + 1, remap, protos, biases);
  c.test = generate_split(spec, "test", spec.n_test, kSplitStream + 2, remap, protos, biases);
  return c;
}

void write_corpus(const std::vector<Utterance>& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  std::string blob, manifest;
  for (const auto& u : corpus) {
    if (u.features.size() != u.frames * u.feature_dim) {
      throw ValidationError("utterance " + u.id + " has inconsistent feature storage");
    }
    if (u.id.find_first_of("\t\n") != std::string::npos) throw ValidationError("utterance ids may not hold tabs");
    manifest += u.id + "\t" + std::to_string(blob.size()) + "\t" + join_tokens(u.source) + "\t" +
                join_tokens(u.target) + "\t" + std::to_string(u.class_id) + "\n";
    blob.append(kMagic, 4);
    put_u32(blob, kRecordVersion);
    put_u32(blob, static_cast<std::uint32_t>(u.id.size()));
    blob += u.id;
    put_u32(blob, static_cast<std::uint32_t>(u.frames));
    put_u32(blob, static_cast<std::uint32_t>(u.feature_dim));
    for (float v : u.features) put_u32(blob, std::bit_cast<std::uint32_t>(v));
  }
  std::ofstream(dir / "features.bin", std::ios::binary | std::ios::trunc).write(blob.data(),
                                                                              static_cast<std::streamsize>(blob.size()));
  std::ofstream(dir / "manifest.tsv", std::ios::binary | std::ios::trunc) << manifest;
}

std::vector<Utterance> read_corpus(const fs::path& dir) {
  std::ifstream mf(dir / "manifest.tsv", std::ios::binary);
  if (!mf) throw ValidationError("no manifest.tsv in " + dir.string());
  std::ifstream bf(dir / "features.bin", std::ios::binary);
  if (!bf) throw ValidationError("no features.bin in " + dir.string());
  const std::string blob((std::istreambuf_iterator<char>(bf)), std::istreambuf_iterator<char>());

  std::vector<Utterance> out;
  std::string line;
  std::size_t line_start = 0;
  while (std::getline(mf, line)) {
    const std::size_t here = line_start;
    line_start += line.size() + 1;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() == 4 && line.back() == '\t') fields.emplace_back();
    if (fields.size() != 5) throw ParseError("manifest line needs 5 tab-separated fields", here);
    Utterance u;
    u.id = fields[0];
    const auto offset = text::parse_int<std::size_t>(fields[1]);
    if (!offset) throw ParseError("bad blob offset '" + fields[1] + "'", here);
    u.source = split_tokens(fields[2], here);
    u.target = split_tokens(fields[3], here);
    const auto cls = text::parse_int<int>(fields[4]);
    if (!cls || *cls < -1) throw ParseError("bad class id '" + fields[4] + "'", here);
    u.class_id = *cls;

    std::size_t at = *offset;
    auto need = [&](std::size_t n, const char* what) {
      if (at > blob.size() || n > blob.size() - at) {
        throw ParseError(std::string("features.bin truncated while reading ") + what, at);
      }
    };
    need(12, "record header");
    if (!std::equal(kMagic, kMagic + 4, blob.begin() + static_cast<std::ptrdiff_t>(at))) {
      throw ParseError("bad record magic", at);
    }
    if (get_u32(blob, at + 4) != kRecordVersion) throw ParseError("unsupported record version", at + 4);
    const std::uint32_t id_len = get_u32(blob, at + 8);
    at += 12;
    need(id_len, "utterance id");
    if (blob.compare(at, id_len, u.id) != 0) throw ParseError("record id does not match manifest id " + u.id, at);
    at += id_len;
    need(8, "dimensions");
    u.frames = get_u32(blob, at);
    u.feature_dim = get_u32(blob, at + 4);
    at += 8;
    const std::size_t n = u.frames * u.feature_dim;
    if (n > (blob.size() - std::min(at, blob.size())) / 4) {
      throw ParseError("header declares " + std::to_string(u.frames) + "x" + std::to_string(u.feature_dim) +
                           " floats but the blob is shorter",
                       at);
    }
    u.features.resize(n);
    for (std::size_t i = 0; i < n; ++i) u.features[i] = std::bit_cast<float>(get_u32(blob, at + 4 * i));
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> synthetic_spec_entries(const SyntheticSpec& s) {
  return {
      {"vocab_size", std::to_string(s.vocab_size)},
      {"min_tokens", std::to_string(s.min_tokens)},
      {"max_tokens", std::to_string(s.max_tokens)},
      {"min_frames_per_token", std::to_string(s.min_frames_per_token)},
      {"max_frames_per_token", std::to_string(s.max_frames_per_token)},
      {"feature_dim", std::to_string(s.feature_dim)},
      {"noise_std", text::format_double(s.noise_std)},
      {"mode", task_mode_name(s.mode)},
      {"n_classes", std::to_string(s.n_classes)},
      {"class_bias_scale", text::format_double(s.class_bias_scale)},
      {"n_train", std::to_string(s.n_train)},
      {"n_dev", std::to_string(s.n_dev)},
      {"n_test", std::to_string(s.n_test)},
      {"seed", std::to_string(s.seed)},
  };
}

bool set_synthetic_spec_value(SyntheticSpec& s, const std::string& key, const std::string& value) {
  auto size = [&](std::size_t& field) {
    const auto v = text::parse_int<std::size_t>(value);
    if (!v) throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
    field = *v;
  };
  auto real = [&](double& field) {
    const auto v = text::parse_double(value);
    if (!v) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
    field = *v;
  };
  if (key == "vocab_size") size(s.vocab_size);
  else if (key == "min_tokens") size(s.min_tokens);
  else if (key == "max_tokens") size(s.max_tokens);
  else if (key == "min_frames_per_token") size(s.min_frames_per_token);
  else if (key == "max_frames_per_token") size(s.max_frames_per_token);
  else if (key == "feature_dim") size(s.feature_dim);
  else if (key == "noise_std") real(s.noise_std);
  else if (key == "mode") s.mode = parse_task_mode(std::string(text::trim(value)));
  else if (key == "n_classes") size(s.n_classes);
  else if (key == "class_bias_scale") real(s.class_bias_scale);
  else if (key == "n_train") size(s.n_train);
  else if (key == "n_dev") size(s.n_dev);
  else if (key == "n_test") size(s.n_test);
  else if (key == "seed") {
    const auto v = text::parse_int<std::uint64_t>(value);
    if (!v) throw ConfigError("'seed' expects a non-negative integer, got '" + value + "'");
    s.seed = *v;
  } else {
    return false;
  }
  return true;
}

void write_corpora(const SyntheticCorpora& c, const SyntheticSpec& spec, const fs::path& dir) {
  fs::create_directories(dir);
  write_corpus(c.train, dir / "train");
  write_corpus(c.dev, dir / "dev");
  write_corpus(c.test, dir / "test");
  std::ofstream out(dir / "spec.txt", std::ios::binary | std::ios::trunc);
  for (const auto& [k, v] : synthetic_spec_entries(spec)) out << k << " = " << v << "\n";
}

SyntheticSpec read_corpus_spec(const fs::path& dir) {
  std::ifstream in(dir / "spec.txt");
  if (!in) throw ValidationError("no spec.txt in " + dir.string());
  SyntheticSpec spec;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key(text::trim(std::string_view(line).substr(0, eq)));
    const std::string value(text::trim(std::string_view(line).substr(eq + 1)));
    if (!set_synthetic_spec_value(spec, key, value)) throw ValidationError("unknown key '" + key + "' in spec.txt");
  }
  return spec;
}

}  // namespace adast
