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

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adast/checkpoint.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using adast::Model;
using adast::PadList;
using adast::Variant;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("adast_ckpt_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

void replace_line(const fs::path& manifest, const std::string& prefix, const std::string& replacement) {
  std::stringstream in(slurp(manifest));
  std::string line, out;
  while (std::getline(in, line)) out += (line.starts_with(prefix) ? replacement : line) + "\n";
  spit(manifest, out);
}

}  // namespace

TEST_CASE("checkpoint: save-load-save is byte-identical and forward passes agree") {
  for (auto v : {Variant::kBaseline, Variant::kAdast, Variant::kStaticAblation}) {
    const auto a = scratch("rt_a"), b = scratch("rt_b");
    Model<float> m(fixture::tiny_config(v), 7);
    adast::save_checkpoint(m, a);
    auto loaded = adast::load_checkpoint<float>(a);
    CHECK(loaded.config() == m.config());
    adast::save_checkpoint(loaded, b);
    CHECK(slurp(a / "manifest.txt") == slurp(b / "manifest.txt"));
    CHECK(slurp(a / "tensors.bin") == slurp(b / "tensors.bin"));

    adast::Rng rng(3);
    auto f = fixture::random_features<float>(1, 16, 8, rng);
    auto x = m.decode_train(m.encode(f, {PadList(16, false)}), {{2, 4, 5}}, {PadList(3, false)});
    auto y = loaded.decode_train(loaded.encode(f, {PadList(16, false)}), {{2, 4, 5}}, {PadList(3, false)});
    CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin(), y.data().end()));
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("checkpoint: extras and metadata round-trip") {
  const auto dir = scratch("extras");
  Model<double> m(fixture::tiny_config(Variant::kAdast), 1);
  adast::CheckpointExtras<double> ex;
  ex.meta["step"] = "42";
  ex.tensors.push_back({"optim.m.x", adast::Tensor<double>({2, 2}, {1, 2, 3, 4})});
  adast::save_checkpoint(m, dir, ex);
  adast::CheckpointExtras<double> back;
  auto loaded = adast::load_checkpoint<double>(dir, &back);
  CHECK(back.meta.at("step") == "42");
  REQUIRE(back.tensors.size() == 1);
  CHECK(back.tensors[0].name == "optim.m.x");
  CHECK(back.tensors[0].tensor.data()[3] == 4.0);
  CHECK(adast::read_checkpoint_meta(dir).at("step") == "42");
  CHECK(adast::read_checkpoint_config(dir).variant == Variant::kAdast);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: cross-precision load converts values") {
  const auto dir = scratch("prec");
  Model<float> m(fixture::tiny_config(Variant::kBaseline), 2);
  adast::save_checkpoint(m, dir);
  auto d = adast::load_checkpoint<double>(dir);
  CHECK(d.token_embedding.data()[5] == static_cast<double>(m.token_embedding.data()[5]));
  fs::remove_all(dir);
}

TEST_CASE("checkpoint: distinct load errors") {
  const auto dir = scratch("err");
  Model<float> m(fixture::tiny_config(Variant::kAdast), 3);

  adast::save_checkpoint(m, dir);
  replace_line(dir / "manifest.txt", "config.d_model=", "config.d_model=32");
  CHECK_THROWS_AS(adast::load_checkpoint<float>(dir), adast::ShapeMismatchError);

  adast::save_checkpoint(m, dir);
  replace_line(dir / "manifest.txt", "format_version=", "format_version=99");
  CHECK_THROWS_AS(adast::load_checkpoint<float>(dir), adast::VersionMismatchError);

  adast::save_checkpoint(m, dir);
  replace_line(dir / "manifest.txt", "dtype=", "garbage line");
  CHECK_THROWS_AS(adast::load_checkpoint<float>(dir), adast::CorruptCheckpointError);

  adast::save_checkpoint(m, dir);
  const std::string blob = slurp(dir / "tensors.bin");
  spit(dir / "tensors.bin", blob.substr(0, blob.size() / 2));
  CHECK_THROWS_AS(adast::load_checkpoint<float>(dir), adast::CorruptCheckpointError);

  CHECK_THROWS_AS(adast::load_checkpoint<float>(dir / "missing"), adast::CheckpointError);
  fs::remove_all(dir);
}
