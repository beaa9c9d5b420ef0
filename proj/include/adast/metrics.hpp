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

#include <array>
#include <cstddef>
#include <vector>

namespace adast {

struct BleuStats {
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches, n = 1..4
  std::array<std::size_t, 4> totals{};   // candidate n-gram counts
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
  double brevity_penalty = 0.0;
  double score = 0.0;  // 0..100
};

// Corpus BLEU-4 with brevity penalty, unsmoothed, over token ids as given.
BleuStats corpus_bleu_stats(const std::vector<std::vector<int>>& candidates,
                            const std::vector<std::vector<int>>& references);
double corpus_bleu(const std::vector<std::vector<int>>& candidates, const std::vector<std::vector<int>>& references);

// Position-wise agreement: matching positions / reference tokens, summed over
// the corpus. Hypothesis tokens past the reference length count as nothing.
double token_accuracy(const std::vector<std::vector<int>>& hypotheses,
                      const std::vector<std::vector<int>>& references);

}  // namespace adast
