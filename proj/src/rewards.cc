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

#include "qsynth/rewards.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "qsynth/common/utf8.h"

namespace qsynth {

void RewardWeights::Validate() const {
  for (double w : {alpha, beta, gamma}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("reward weights must be finite and non-negative");
    }
  }
}

double QsrReward(double logit_yes, double logit_no) {
  if (!std::isfinite(logit_yes) || !std::isfinite(logit_no)) {
    throw std::invalid_argument("QSR logits must be finite");
  }
  const double e = std::exp(-std::abs(logit_yes - logit_no));
  const double minority = e / (1.0 + e);
  return logit_yes >= logit_no ? 1.0 - minority : minority;
}

double PdaFromLogProbs(std::span<const double> log_probs) {
  if (log_probs.empty()) {
    throw std::invalid_argument("PDA reward needs at least one scored token");
  }
  double sum = 0.0;
  for (double lp : log_probs) sum += lp;
  return std::exp(sum / static_cast<double>(log_probs.size()));
}

double PdaReward(std::span<const std::string> tokens, const LogProbModel& lm) {
  if (tokens.empty()) {
    throw std::invalid_argument("PDA reward of an empty rewrite is undefined");
  }
  const std::vector<double> lp = lm.SequenceLogProbs(tokens);
  return PdaFromLogProbs(lp);
}

std::vector<std::string> CharNgrams(std::string_view text, int n) {
  if (n < 1) throw std::invalid_argument("n-gram size must be >= 1");
  const std::u32string scalars = DecodeUtf8(text);
  std::vector<std::string> grams;
  const size_t len = static_cast<size_t>(n);
  if (scalars.size() < len) return grams;
  grams.reserve(scalars.size() - len + 1);
  for (size_t i = 0; i + len <= scalars.size(); ++i) {
    grams.push_back(EncodeUtf8(std::u32string_view(scalars).substr(i, len)));
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

namespace {

template <typename T>
double SortedJaccard(std::span<const T> a, std::span<const T> b) {
  if (a.empty() && b.empty()) return 1.0;
  size_t i = 0;
  size_t j = 0;
  size_t inter = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++inter, ++i, ++j;
    }
  }
  const size_t uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

double SetJaccard(std::span<const std::string> a, std::span<const std::string> b) {
  return SortedJaccard(a, b);
}

std::vector<uint64_t> BigramKeys(std::string_view text) {
  const std::u32string s = DecodeUtf8(text);
  std::vector<uint64_t> keys;
  if (s.size() < 2) return keys;
  keys.reserve(s.size() - 1);
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    keys.push_back((static_cast<uint64_t>(s[i]) << 21) | s[i + 1]);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  return keys;
}

double KeyJaccard(std::span<const uint64_t> a, std::span<const uint64_t> b) {
  return SortedJaccard(a, b);
}

double BigramJaccard(std::string_view a, std::string_view b) {
  const auto ka = BigramKeys(a);
  const auto kb = BigramKeys(b);
  return KeyJaccard(ka, kb);
}

double DiversityReward(std::span<const Rewrite> rewrites, int n) {
  const size_t k = rewrites.size();
  if (k < 2) {
    throw std::invalid_argument("diversity needs at least two rewrites");
  }
  double sum = 0.0;
  if (n == 2) {
    std::vector<std::vector<uint64_t>> sets;
    sets.reserve(k);
    for (const Rewrite& r : rewrites) sets.push_back(BigramKeys(r.text));
    for (size_t i = 0; i < k; ++i) {
      for (size_t j = i + 1; j < k; ++j) sum += 1.0 - KeyJaccard(sets[i], sets[j]);
    }
  } else {
    std::vector<std::vector<std::string>> sets;
    sets.reserve(k);
    for (const Rewrite& r : rewrites) sets.push_back(CharNgrams(r.text, n));
    for (size_t i = 0; i < k; ++i) {
      for (size_t j = i + 1; j < k; ++j) sum += 1.0 - SetJaccard(sets[i], sets[j]);
    }
  }
  const double pairs = static_cast<double>(k) * static_cast<double>(k - 1) / 2.0;
  return sum / pairs;
}

RewardBreakdown TotalReward(double qsr, double pda, double diversity,
                            bool format_ok, const RewardWeights& weights) {
  RewardBreakdown b;
  b.qsr = qsr;
  b.pda = pda;
  b.diversity = diversity;
  b.format_ok = format_ok;
  b.total = format_ok ? weights.alpha * qsr + weights.beta * pda +
                            weights.gamma * diversity
                      : 0.0;
  return b;
}

RewardBreakdown FormatGatedReward() { return RewardBreakdown{}; }

RewardBreakdown ResponseReward(const Query& query, const RewriteList& list,
                               const QsrLogitProvider& qsr,
                               const LogProbModel& lm,
                               const RewardWeights& weights) {
  const double diversity = DiversityReward(list.rewrites);
  double qsr_sum = 0.0;
  double pda_sum = 0.0;
  for (const Rewrite& r : list.rewrites) {
    const auto [yes, no] = qsr.Logits(query.text, r.text);
    qsr_sum += QsrReward(yes, no);
    pda_sum += PdaReward(lm.Tokenize(r.text), lm);
  }
  const double k = static_cast<double>(list.k());
  return TotalReward(qsr_sum / k, pda_sum / k, diversity, true, weights);
}

ResponseScorer::ResponseScorer(const QsrLogitProvider& qsr,
                               const LogProbModel& lm, RewardWeights weights,
                               size_t min_k)
    : qsr_(qsr), lm_(lm), weights_(weights), min_k_(min_k) {
  weights_.Validate();
}

ResponseScorer::Terms ResponseScorer::TermsFor(const Query& query,
                                               const std::string& rewrite) const {
  std::string key = query.text;
  key.push_back('\x1f');
  key += rewrite;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const auto [yes, no] = qsr_.Logits(query.text, rewrite);
  Terms t{QsrReward(yes, no), PdaReward(lm_.Tokenize(rewrite), lm_)};
  std::lock_guard<std::mutex> lock(mu_);
  cache_.emplace(std::move(key), t);
  return t;
}

RewardBreakdown ResponseScorer::Score(const Query& query,
                                      const RewriteList& list) const {
  const ParseResult parsed = ParseRewriteList(RenderRewriteList(list), min_k_);
  const auto* ok = std::get_if<RewriteList>(&parsed);
  if (ok == nullptr || ok->k() != list.k() || list.k() < 2) {
    return FormatGatedReward();
  }
  double qsr_sum = 0.0;
  double pda_sum = 0.0;
  for (const Rewrite& r : list.rewrites) {
    const Terms t = TermsFor(query, r.text);
    qsr_sum += t.qsr;
    pda_sum += t.pda;
  }
  const double k = static_cast<double>(list.k());
  return TotalReward(qsr_sum / k, pda_sum / k, DiversityReward(list.rewrites),
                     true, weights_);
}

}  // namespace qsynth
