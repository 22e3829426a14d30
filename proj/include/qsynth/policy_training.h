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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qsynth/common/random.h"
#include "qsynth/domain.h"
#include "qsynth/rewards.h"

namespace qsynth {

// A categorical rewrite policy: each query context owns a row of logits over
// one shared candidate vocabulary, and a response is k independent draws
// (with replacement) from softmax(row). Contexts without their own row use
// the default row.
class CategoricalRewritePolicy {
 public:
  static constexpr int kFormatVersion = 1;

  explicit CategoricalRewritePolicy(std::vector<std::string> candidates,
                                    std::vector<double> default_logits = {});

  size_t num_candidates() const { return candidates_.size(); }
  const std::vector<std::string>& candidates() const { return candidates_; }
  std::optional<size_t> CandidateIndex(std::string_view text) const;

  bool HasContext(std::string_view context) const;
  std::span<const double> Logits(std::string_view context) const;
  // Creates the row from the default row on first access.
  std::span<double> MutableLogits(std::string_view context);
  void SetLogits(std::string_view context, std::vector<double> logits);
  std::span<const double> default_logits() const { return default_logits_; }
  const std::map<std::string, std::vector<double>, std::less<>>& rows() const {
    return rows_;
  }

  std::vector<double> Probabilities(std::string_view context) const;
  std::vector<double> LogProbabilities(std::string_view context) const;

  // The k most probable distinct candidates, ties broken by vocabulary order.
  std::vector<size_t> TopCandidates(std::string_view context, size_t k) const;

  nlohmann::json ToJson() const;
  static CategoricalRewritePolicy FromJson(const nlohmann::json& j);
  void Save(const std::string& path) const;
  static CategoricalRewritePolicy Load(const std::string& path);

  bool operator==(const CategoricalRewritePolicy&) const = default;

 private:
  void Reindex();
  void CheckRow(std::span<const double> row) const;

  std::vector<std::string> candidates_;
  std::vector<double> default_logits_;
  std::map<std::string, std::vector<double>, std::less<>> rows_;
  std::unordered_map<std::string, size_t> index_;
};

// Builds the starting policy from per-query candidate lists. The vocabulary
// is every candidate in first-seen order; a query's row puts logit 0 on its
// own candidates and `masked_logit` elsewhere. The default row is uniform.
CategoricalRewritePolicy BuildPriorPolicy(
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        candidates_by_query,
    double masked_logit = -12.0);

// Reads {"query_id": ..., "candidates": [...]} JSONL.
std::vector<std::pair<std::string, std::vector<std::string>>> ReadCandidatesJsonl(
    const std::string& path);

struct TrainConfig {
  double step_size = 0.5;
  size_t group_size = 8;  // responses per query per iteration
  size_t iterations = 200;
  size_t k = kDefaultMinRewrites;  // rewrites per response
  bool normalize_advantage = true;
  double format_penalty = 0.0;  // reward assigned to unparseable responses is -penalty
  double kl_coef = 0.0;         // KL(pi || initial policy) penalty, off by default
  uint64_t seed = 0;
  size_t jobs = 1;

  void Validate() const;
};

inline constexpr double kAdvantageEpsilon = 1e-8;

struct SampledResponse {
  RewriteList list;
  std::vector<size_t> draws;  // candidate indices, one per rewrite
  double log_prob = 0.0;
};

// k independent draws for the query's context.
SampledResponse SampleResponse(const CategoricalRewritePolicy& policy,
                               const Query& query, size_t k, Rng& rng);

// log p(rewrites | query): sum of per-draw log-softmax terms. Throws
// std::invalid_argument if a rewrite is not in the candidate vocabulary.
double ResponseLogProb(const CategoricalRewritePolicy& policy,
                       const Query& query, const RewriteList& rewrites);

struct BatchEntry {
  Query query;
  RewriteList rewrites;
  double reward = 0.0;
};

// Raw rewards, or (R - mean) / max(std, eps) with population statistics.
// Returns all zeros when normalizing a batch whose std is below eps.
std::vector<double> ComputeAdvantages(std::span<const double> rewards,
                                      bool normalize);

// Sparse gradient: only rows of contexts present in the batch.
struct PolicyGradient {
  std::map<std::string, std::vector<double>, std::less<>> rows;
  double Norm() const;
};

// Loss for one batch with advantages fixed from its rewards:
//   L = (1/|B|) * sum_i [ -A_i * log p(rewrites_i | query_i)
//                         + kl_coef * KL(pi(.|q_i) || reference(.|q_i)) ]
// The KL term is included only when kl_coef > 0 and a reference is given.
double PolicyLoss(const CategoricalRewritePolicy& policy,
                  std::span<const BatchEntry> batch, const TrainConfig& cfg,
                  const CategoricalRewritePolicy* reference = nullptr);

// Exact gradient of PolicyLoss with respect to the touched logits.
PolicyGradient PolicyLossGradient(const CategoricalRewritePolicy& policy,
                                  std::span<const BatchEntry> batch,
                                  const TrainConfig& cfg,
                                  const CategoricalRewritePolicy* reference = nullptr);

// One plain gradient-descent step on PolicyLoss, in place. Returns the
// gradient norm. Throws std::invalid_argument on an empty batch.
double ReinforceUpdate(CategoricalRewritePolicy& policy,
                       std::span<const BatchEntry> batch, const TrainConfig& cfg,
                       const CategoricalRewritePolicy* reference = nullptr);

// Entries where both gradients are smaller than this are rounding noise.
inline constexpr double kGradCheckNoiseFloor = 1e-9;

// Max relative error between PolicyLossGradient and central differences with
// step h, over every logit of every touched row. Entries where both are below
// kGradCheckNoiseFloor contribute zero.
double GradCheck(const CategoricalRewritePolicy& policy,
                 std::span<const BatchEntry> batch, const TrainConfig& cfg,
                 double h, const CategoricalRewritePolicy* reference = nullptr);

struct IterationStats {
  size_t iteration = 0;
  double mean_total = 0.0;
  double mean_qsr = 0.0;
  double mean_pda = 0.0;
  double mean_diversity = 0.0;
  double grad_norm = 0.0;

  bool operator==(const IterationStats&) const = default;
};

struct TrainStats {
  std::vector<IterationStats> iterations;

  std::string ToCsv() const;
  void WriteCsv(const std::string& path) const;
  bool operator==(const TrainStats&) const = default;
};

using RewardFn = std::function<RewardBreakdown(const Query&, const RewriteList&)>;

// Each iteration samples group_size responses per query from the current
// policy, scores them, and applies one update over the mixed batch. Sampling
// streams are keyed by (iteration, query position, group slot), so the run is
// a pure function of the inputs and cfg.seed. reward_fn must be thread-safe
// when cfg.jobs > 1.
TrainStats Train(CategoricalRewritePolicy& policy, std::span<const Query> queries,
                 const RewardFn& reward_fn, const TrainConfig& cfg);

}  // namespace qsynth
