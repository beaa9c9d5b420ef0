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

// Small random models and inputs shared by the model, decoding and acceptance
// suites.

#include <string>
#include <vector>

#include "adast/model.hpp"
#include "adast/rng.hpp"

namespace fixture {

inline adast::ModelConfig tiny_config(adast::Variant variant, std::size_t d = 16, std::size_t n_enc = 2,
                                      std::size_t n_dec = 2) {
  adast::ModelConfig c;
  c.variant = variant;
  c.d_model = d;
  c.n_heads = 2;
  c.d_ff = 2 * d;
  c.n_enc_layers = n_enc;
  c.n_dec_layers = n_dec;
  c.vocab_size = 11;
  c.feature_dim = 8;
  c.subsampler_channels = 4;
  return c;
}

template <typename T>
adast::Tensor<T> random_features(std::size_t batch, std::size_t frames, std::size_t dim, adast::Rng& rng) {
  std::vector<T> v(batch * frames * dim);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return adast::Tensor<T>({batch, frames, dim}, std::move(v));
}

inline std::vector<int> random_tokens(std::size_t n, std::size_t vocab, adast::Rng& rng) {
  std::vector<int> out(n);
  for (auto& t : out) t = rng.uniform_int(adast::kFirstRealToken, static_cast<int>(vocab) - 1);
  return out;
}

// Copy every tensor of `from` into the same-named tensor of `to`.
template <typename T>
void copy_shared_parameters(const adast::Model<T>& from, adast::Model<T>& to) {
  const auto src = from.parameters();
  for (auto& dst : to.parameters()) {
    for (const auto& s : src) {
      if (s.name == dst.name && s.tensor.shape() == dst.tensor.shape()) {
        auto d = dst.tensor.mutable_data();
        std::copy(s.tensor.data().begin(), s.tensor.data().end(), d.begin());
      }
    }
  }
}

}  // namespace fixture
