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

#include "adast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "adast/errors.hpp"

namespace adast {

namespace {

using Ngram = std::vector<int>;

std::map<Ngram, std::size_t> count_ngrams(const std::vector<int>& s, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Ngram(s.begin() + static_cast<std::ptrdiff_t>(i),
                                                                 s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

void check_corpus(std::size_t a, std::size_t b) {
  if (a != b) {
    throw DimensionError("corpus has " + std::to_string(a) + " hypotheses but " + std::to_string(b) + " references");
  }
  if (a == 0) throw ValidationError("empty corpus");
}

}  // namespace

BleuStats corpus_bleu_stats(const std::vector<std::vector<int>>& candidates,
                            const std::vector<std::vector<int>>& references) {
  check_corpus(candidates.size(), references.size());
  BleuStats st;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    st.candidate_length += candidates[k].size();
    st.reference_length += references[k].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cand = count_ngrams(candidates[k], n);
      const auto ref = count_ngrams(references[k], n);
      for (const auto& [gram, c] : cand) {
        const auto it = ref.find(gram);
        st.matches[n - 1] += std::min(c, it == ref.end() ? std::size_t{0} : it->second);
        st.totals[n - 1] += c;
      }
    }
  }
  if (st.candidate_length == 0) return st;
  st.brevity_penalty = st.candidate_length > st.reference_length
                           ? 1.0
                           : std::exp(1.0 - static_cast<double>(st.reference_length) /
                                                static_cast<double>(st.candidate_length));
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (st.matches[n] == 0) return st;
    log_sum += std::log(static_cast<double>(st.matches[n]) / static_cast<double>(st.totals[n]));
  }
  st.score = 100.0 * st.brevity_penalty * std::exp(log_sum / 4.0);
  return st;
}

double corpus_bleu(const std::vector<std::vector<int>>& candidates, const std::vector<std::vector<int>>& references) {
  return corpus_bleu_stats(candidates, references).score;
}

double token_accuracy(const std::vector<std::vector<int>>& hypotheses,
                      const std::vector<std::vector<int>>& references) {
  check_corpus(hypotheses.size(), references.size());
  std::size_t correct = 0, total = 0;
  for (std::size_t k = 0; k < hypotheses.size(); ++k) {
    total += references[k].size();
    const std::size_t n = std::min(hypotheses[k].size(), references[k].size());
    for (std::size_t i = 0; i < n; ++i) correct += hypotheses[k][i] == references[k][i];
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace adast
