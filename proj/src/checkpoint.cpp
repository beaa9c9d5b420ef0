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

#include "adast/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "adast/text.hpp"

namespace adast {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifest = "manifest.txt";
constexpr const char* kBlob = "tensors.bin";

template <typename T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw CorruptCheckpointError("unknown tensor dtype '" + dtype + "'");
}

template <typename T>
void append_le(std::string& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

template <typename T>
T read_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

std::string shape_field(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out.empty() ? "scalar" : out;
}

Shape parse_shape(const std::string& field) {
  Shape s;
  if (field == "scalar") return s;
  std::stringstream ss(field);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto v = text::parse_int<std::size_t>(part);
    if (!v) throw CorruptCheckpointError("bad shape '" + field + "'");
    s.push_back(*v);
  }
  return s;
}

void write_file_atomically(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct TensorEntry {
  std::string name;
  Shape shape;
  std::string dtype;
  std::size_t offset = 0;
};

struct Manifest {
  ModelConfig config;
  std::string dtype;
  std::map<std::string, std::string> meta;
  std::vector<TensorEntry> tensors;
};

Manifest read_manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifest);
  if (!in) throw CheckpointError("no checkpoint manifest in " + dir.string());
  Manifest m;
  bool have_version = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw CorruptCheckpointError("manifest line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") {
      const auto v = text::parse_int<int>(value);
      if (!v) throw CorruptCheckpointError("bad format_version '" + value + "'");
      if (*v != kCheckpointFormatVersion) {
        throw VersionMismatchError("checkpoint format version " + value + " but this build reads version " +
                                   std::to_string(kCheckpointFormatVersion));
      }
      have_version = true;
    } else if (key == "dtype") {
      dtype_size(value);
      m.dtype = value;
    } else if (key.starts_with("config.")) {
      try {
        if (!set_model_config_value(m.config, key.substr(7), value)) {
          throw CorruptCheckpointError("unknown config key '" + key + "'");
        }
      } catch (const ConfigError& e) {
        throw CorruptCheckpointError(std::string("manifest: ") + e.what());
      }
    } else if (key.starts_with("meta.")) {
      m.meta[key.substr(5)] = value;
    } else if (key == "tensor") {
      std::stringstream ss(value);
      TensorEntry e;
      std::string shape, offset;
      if (!(ss >> e.name >> shape >> e.dtype >> offset)) {
        throw CorruptCheckpointError("manifest line " + std::to_string(line_no) + ": malformed tensor entry");
      }
      e.shape = parse_shape(shape);
      dtype_size(e.dtype);
      const auto off = text::parse_int<std::size_t>(offset);
      if (!off) throw CorruptCheckpointError("bad tensor offset '" + offset + "'");
      e.offset = *off;
      m.tensors.push_back(std::move(e));
    } else {
      throw CorruptCheckpointError("unknown manifest key '" + key + "'");
    }
  }
  if (!have_version) throw CorruptCheckpointError("manifest lacks format_version");
  if (m.dtype.empty()) throw CorruptCheckpointError("manifest lacks dtype");
  return m;
}

}  // namespace

template <typename T>
void save_checkpoint(const Model<T>& model, const fs::path& dir, const CheckpointExtras<T>& extras) {
  fs::create_directories(dir);
  std::string manifest = "format_version=" + std::to_string(kCheckpointFormatVersion) + "\n";
  manifest += std::string("dtype=") + dtype_name<T>() + "\n";
  for (const auto& [k, v] : model_config_entries(model.config())) manifest += "config." + k + "=" + v + "\n";
  for (const auto& [k, v] : extras.meta) {
    if (k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw CheckpointError("metadata may not contain newlines");
    }
    manifest += "meta." + k + "=" + v + "\n";
  }
  std::string blob;
  auto add = [&](const NamedParameter<T>& p) {
    if (p.name.find_first_of(" \n=") != std::string::npos) {
      throw CheckpointError("tensor name '" + p.name + "' contains a reserved character");
    }
    manifest += "tensor=" + p.name + " " + shape_field(p.tensor.shape()) + " " + dtype_name<T>() + " " +
                std::to_string(blob.size()) + "\n";
    for (T v : p.tensor.data()) append_le(blob, v);
  };
  for (const auto& p : model.parameters()) add(p);
  for (const auto& p : model.buffers()) add(p);
  for (const auto& p : extras.tensors) add(p);
  write_file_atomically(dir / kBlob, blob);
  write_file_atomically(dir / kManifest, manifest);
}

template <typename T>
Model<T> load_checkpoint(const fs::path& dir, CheckpointExtras<T>* extras) {
  const Manifest m = read_manifest(dir);
  std::ifstream in(dir / kBlob, std::ios::binary);
  if (!in) throw CorruptCheckpointError("missing " + std::string(kBlob) + " in " + dir.string());
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto read_values = [&](const TensorEntry& e) {
    const std::size_t width = dtype_size(e.dtype);
    const std::size_t n = shape_numel(e.shape);
    if (e.offset > blob.size() || n * width > blob.size() - e.offset) {
      throw CorruptCheckpointError("tensor '" + e.name + "' extends past the end of " + kBlob);
    }
    std::vector<T> values(n);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data()) + e.offset;
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = width == 4 ? static_cast<T>(read_le<float>(p + 4 * i)) : static_cast<T>(read_le<double>(p + 8 * i));
    }
    return values;
  };

  Model<T> model = [&] {
    try {
      return Model<T>(m.config, 0);
    } catch (const ConfigError& e) {
      throw CorruptCheckpointError(std::string("checkpoint config is invalid: ") + e.what());
    }
  }();
  std::map<std::string, const TensorEntry*> by_name;
  for (const auto& e : m.tensors) {
    if (!by_name.emplace(e.name, &e).second) throw CorruptCheckpointError("duplicate tensor '" + e.name + "'");
  }
  std::map<std::string, bool> used;
  auto owned = model.parameters();
  for (const auto& b : model.buffers()) owned.push_back(b);
  for (auto& p : owned) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw CorruptCheckpointError("checkpoint lacks parameter '" + p.name + "'");
    if (it->second->shape != p.tensor.shape()) {
      throw ShapeMismatchError("parameter '" + p.name + "' is " + shape_to_string(it->second->shape) +
                               " in the checkpoint but the config implies " + shape_to_string(p.tensor.shape()));
    }
    const std::vector<T> values = read_values(*it->second);
    auto dst = p.tensor.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
    used[p.name] = true;
  }
  if (extras) {
    extras->meta = m.meta;
    extras->tensors.clear();
    for (const auto& e : m.tensors) {
      if (used.count(e.name)) continue;
      extras->tensors.push_back({e.name, Tensor<T>(e.shape, read_values(e))});
    }
  }
  return model;
}

ModelConfig read_checkpoint_config(const fs::path& dir) { return read_manifest(dir).config; }

std::map<std::string, std::string> read_checkpoint_meta(const fs::path& dir) { return read_manifest(dir).meta; }

template void save_checkpoint(const Model<float>&, const fs::path&, const CheckpointExtras<float>&);
template void save_checkpoint(const Model<double>&, const fs::path&, const CheckpointExtras<double>&);
template Model<float> load_checkpoint(const fs::path&, CheckpointExtras<float>*);
template Model<double> load_checkpoint(const fs::path&, CheckpointExtras<double>*);

}  // namespace adast
