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
#include <functional>
#include <vector>

#include "adast/tensor.hpp"

namespace adast {

struct GradReport {
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;  // flat index across all checked parameters, in list order
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Tensors larger than this are sub-sampled; never fewer than 32 elements each.
  std::size_t max_elements_per_tensor = 64;
  // Denominator floor for the relative error, multiplied by max(1, |loss|), so
  // near-zero gradients compare on absolute terms.
  double rel_floor = 1e-5;
  std::uint64_t seed = 7;
};

// Compares reverse-mode gradients of `loss_fn` with central differences
// (f(p+h) - f(p-h)) / 2h. Gradients of `params` are cleared first.
GradReport gradient_check(const std::function<Tensor<double>()>& loss_fn,
                          std::vector<Tensor<double>> params, const GradCheckOptions& options = {});

}  // namespace adast
