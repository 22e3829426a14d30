// Copyright 2026 The qsynth Authors. All rights reserved.
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
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qsynth/domain.h"
#include "qsynth/language_model.h"

namespace qsynth {

// Weights of the three reward components.
struct RewardWeights {
  double alpha = 1.0;  // semantic relevance
  double beta = 0.5;   // product-language alignment
  double gamma = 0.1;  // diversity

  // Throws std::invalid_argument unless all weights are finite and >= 0.
  void Validate() const;
};

struct RewardBreakdown {
  double qsr = 0.0;
  double pda = 0.0;
  double diversity = 0.0;
  bool format_ok = false;
  double total = 0.0;
};

// Supplies the binary relevance classifier's (yes, no) logits for a
// <query, rewrite> pair.
class QsrLogitProvider {
 public:
  virtual ~QsrLogitProvider() = default;
  virtual std::pair<double, double> Logits(std::string_view query,
                                           std::string_view rewrite) const = 0;
};

// p_yes of a two-way softmax. The minority class probability is computed
// directly and the other as its complement, so QsrReward(a, b) +
// QsrReward(b, a) == 1 exactly. Throws std::invalid_argument on non-finite input.
double QsrReward(double logit_yes, double logit_no);

// exp of the mean log-probability, i.e. 1 / perplexity. Throws on empty input.
double PdaFromLogProbs(std::span<const double> log_probs);

// Reciprocal perplexity of `tokens` (plus the terminal event) under `lm`.
double PdaReward(std::span<const std::string> tokens, const LogProbModel& lm);

// Deduplicated, sorted set of contiguous n-scalar windows of `text`.
// Windows span whitespace; no case folding or punctuation stripping.
std::vector<std::string> CharNgrams(std::string_view text, int n);

// |a ∩ b| / |a ∪ b| over sorted unique ranges. Two empty sets count as
// identical (similarity 1).
double SetJaccard(std::span<const std::string> a, std::span<const std::string> b);

// Character bigrams packed into sorted unique 64-bit keys. Equivalent to
// CharNgrams(text, 2) for set algebra, without the string allocations.
std::vector<uint64_t> BigramKeys(std::string_view text);
double KeyJaccard(std::span<const uint64_t> a, std::span<const uint64_t> b);

// Char-bigram Jaccard similarity of two texts.
double BigramJaccard(std::string_view a, std::string_view b);

// Mean pairwise n-gram Jaccard dissimilarity over all C(k, 2) pairs.
// Throws std::invalid_argument when fewer than two rewrites are given.
double DiversityReward(std::span<const Rewrite> rewrites, int n = 2);

// alpha*qsr + beta*pda + gamma*diversity when format_ok, otherwise 0.
RewardBreakdown TotalReward(double qsr, double pda, double diversity,
                            bool format_ok, const RewardWeights& weights);

// Breakdown for a response that failed to parse.
RewardBreakdown FormatGatedReward();

// Scores one parsed response: mean QSR and mean PDA over its rewrites, list
// diversity, then TotalReward.
RewardBreakdown ResponseReward(const Query& query, const RewriteList& list,
                               const QsrLogitProvider& qsr,
                               const LogProbModel& lm,
                               const RewardWeights& weights);

// ResponseReward with per-<query, rewrite> memoization of the QSR and PDA
// terms. Training revisits the same candidates many times. Thread-safe.
class ResponseScorer {
 public:
  ResponseScorer(const QsrLogitProvider& qsr, const LogProbModel& lm,
                 RewardWeights weights, size_t min_k = kDefaultMinRewrites);

  // Applies the format gate (the list must survive a render/parse round trip
  // with at least min_k entries) before scoring.
  RewardBreakdown Score(const Query& query, const RewriteList& list) const;

  const RewardWeights& weights() const { return weights_; }

 private:
  struct Terms {
    double qsr;
    double pda;
  };
  Terms TermsFor(const Query& query, const std::string& rewrite) const;

  const QsrLogitProvider& qsr_;
  const LogProbModel& lm_;
  RewardWeights weights_;
  size_t min_k_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, Terms> cache_;
};

}  // namespace qsynth
