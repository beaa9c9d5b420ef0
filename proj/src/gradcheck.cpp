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

#include "adast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "adast/rng.hpp"

namespace adast {

GradReport gradient_check(const std::function<Tensor<double>()>& loss_fn,
                          std::vector<Tensor<double>> params, const GradCheckOptions& options) {
  if (options.step < 1e-6 || options.step > 1e-3) {
    throw ConfigError("gradient_check: step must lie in [1e-6, 1e-3]");
  }
  for (auto& p : params) p.zero_grad();
  double base = 0.0;
  {
    Tensor<double> loss = loss_fn();
    base = loss.item();
    loss.backward();
  }
  {
    NoGradGuard no_grad;
    const double again = loss_fn().item();
    if (again != base) {
      throw DeterminismError("gradient_check: loss changed between identical evaluations (" +
                             std::to_string(base) + " vs " + std::to_string(again) + ")");
    }
  }

  // Central differences lose about eps * |f| / h to round-off, so "near zero"
  // is judged against the loss scale.
  const double floor = options.rel_floor * std::max(1.0, std::abs(base));
  Rng rng(options.seed);
  GradReport report;
  std::size_t flat_base = 0;
  NoGradGuard no_grad;
  for (auto& p : params) {
    const std::size_t n = p.numel();
    std::vector<std::size_t> indices(n);
    std::iota(indices.begin(), indices.end(), 0);
    const std::size_t budget = std::max<std::size_t>(options.max_elements_per_tensor, 32);
    if (n > budget) {
      std::shuffle(indices.begin(), indices.end(), rng.engine());
      indices.resize(budget);
      std::sort(indices.begin(), indices.end());
    }
    std::vector<double> analytic(n, 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    for (std::size_t idx : indices) {
      const double original = values[idx];
      values[idx] = original + options.step;
      const double up = loss_fn().item();
      values[idx] = original - options.step;
      const double down = loss_fn().item();
      values[idx] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double abs_err = std::abs(numeric - analytic[idx]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic[idx]), floor});
      const double rel_err = abs_err / denom;
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
      if (rel_err > report.max_rel_err || report.checked == 0) {
        report.max_rel_err = rel_err;
        report.worst_index = flat_base + idx;
        report.analytic = analytic[idx];
        report.numeric = numeric;
      }
      ++report.checked;
    }
    flat_base += n;
  }
  return report;
}

}  // namespace adast
