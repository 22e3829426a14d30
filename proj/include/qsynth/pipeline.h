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
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "qsynth/domain.h"
#include "qsynth/language_model.h"
#include "qsynth/policy_training.h"
#include "qsynth/retrieval.h"
#include "qsynth/rewards.h"
#include "qsynth/scorers.h"

namespace qsynth {

enum class OnRemoteError { kDrop, kFail };
enum class GeneratorKind { kPolicy, kRemote };
enum class DecodeMode { kGreedy, kSample };

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::kPolicy;
  std::string policy;  // policy artifact path, resolved against the config dir
  DecodeMode mode = DecodeMode::kGreedy;
  size_t k = kDefaultMinRewrites;
  ScorerBinding binding;  // used when kind is kRemote
};

struct IndexConfig {
  size_t dim = kDefaultEmbeddingDim;
  size_t partitions = 96;
  size_t probes = 20;
  size_t kmeans_iterations = 25;
  uint64_t seed = 0;

  IndexParams params() const { return {dim, partitions, kmeans_iterations, seed}; }
};

// Settings for the train-policy command.
struct TrainingConfig {
  std::string candidates;  // candidates JSONL, resolved against the config dir
  TrainConfig train;
  RewardWeights weights;
  double masked_logit = -12.0;
  int lm_order = 3;
  double lm_delta = 0.1;
  TokenMode lm_mode = TokenMode::kChar;
  ScorerBinding qsr;
};

struct PipelineConfig {
  size_t min_k = kDefaultMinRewrites;
  size_t top_k = kDefaultTopK;
  double business_threshold = 0.35;
  uint64_t seed = 0;
  size_t jobs = 1;
  OnRemoteError on_remote_error = OnRemoteError::kDrop;
  LabelThresholds thresholds;
  GeneratorConfig generator;
  ScorerBinding rewrite_filter;
  ScorerBinding business;
  ScorerBinding general_filter;
  IndexConfig index;
  TrainingConfig training;
  std::map<std::string, std::string> prompt_templates;

  // Throws ValidationError on the first bad field.
  void Validate() const;
  nlohmann::json ToJson() const;
  // Unknown keys are rejected. Relative paths resolve against base_dir.
  static PipelineConfig FromJson(const nlohmann::json& j, const std::string& base_dir = "");
  static PipelineConfig Load(const std::string& path);

  // Points every remote binding at `endpoint`.
  void OverrideRemoteEndpoint(const std::string& endpoint);
};

inline constexpr const char* kRemoteEndpointEnv = "QSYNTH_REMOTE_ENDPOINT";

// ---- Generators -------------------------------------------------------------

class RewriteGenerator {
 public:
  virtual ~RewriteGenerator() = default;
  // Raw generator output, before format parsing.
  virtual std::string Generate(const Query& query) const = 0;
};

// Greedy mode renders the k most probable candidates; sample mode draws k
// with replacement from a stream keyed by (seed, query id).
class PolicyGenerator final : public RewriteGenerator {
 public:
  PolicyGenerator(const CategoricalRewritePolicy& policy, DecodeMode mode, size_t k,
                  uint64_t seed);
  std::string Generate(const Query& query) const override;

 private:
  const CategoricalRewritePolicy& policy_;
  DecodeMode mode_;
  size_t k_;
  uint64_t seed_;
};

class RemoteGenerator final : public RewriteGenerator {
 public:
  RemoteGenerator(RemoteClient& client, size_t k) : client_(client), k_(k) {}
  std::string Generate(const Query& query) const override;

 private:
  RemoteClient& client_;
  size_t k_;
};

// ---- Stages -----------------------------------------------------------------

// Drop reasons, as written to the stats file.
namespace drop {
inline constexpr const char* kFormatEmpty = "format_empty";
inline constexpr const char* kFormatTooFew = "format_too_few";
inline constexpr const char* kFormatUnparseable = "format_unparseable";
inline constexpr const char* kRemoteError = "remote_error";
inline constexpr const char* kIrrelevant = "irrelevant";
inline constexpr const char* kDuplicateRewrite = "duplicate_rewrite";
inline constexpr const char* kNoHits = "no_hits";
inline constexpr const char* kBelowThreshold = "below_threshold";
inline constexpr const char* kGeneralVeto = "general_veto";
inline constexpr const char* kDuplicate = "duplicate";
}  // namespace drop

struct StageStats {
  std::string name;
  uint64_t input = 0;
  uint64_t output = 0;
  uint64_t dropped = 0;
  std::map<std::string, uint64_t> reasons;

  void Drop(const std::string& reason, uint64_t n = 1);
  void Merge(const StageStats& other);
  // input == output + dropped == output + sum(reasons).
  bool Conserved() const;
  bool operator==(const StageStats&) const = default;
};

// Stage order: generate, filter_rewrites, retrieve, assemble,
// score_and_filter, dedupe. Units are queries, rewrites, rewrites, drafts,
// drafts and pairs respectively.
struct PipelineStats {
  uint64_t queries = 0;
  uint64_t queries_fully_filtered = 0;
  uint64_t pairs = 0;
  std::vector<StageStats> stages;

  static PipelineStats Empty();
  const StageStats& stage(std::string_view name) const;
  StageStats& stage(std::string_view name);
  nlohmann::json ToJson() const;
  static PipelineStats FromJson(const nlohmann::json& j);
  bool operator==(const PipelineStats&) const = default;
};

ParseResult GenerateRewrites(const RewriteGenerator& generator, const Query& query,
                             size_t min_k);

// Keeps non-Irrelevant rewrites in order.
RewriteList FilterRewrites(const Query& query, const RewriteList& list,
                           const RewriteClassifier& classifier);

struct RewriteHits {
  std::string rewrite;
  std::vector<CandidateHit> hits;
};

// Approximate top_k per distinct rewrite, in list order.
std::vector<RewriteHits> RetrieveForRewrites(const RewriteList& list,
                                             const VectorIndex& index,
                                             const Embedder& embedder, size_t top_k,
                                             size_t probes);

// One draft per hit, carrying the original query text. Scores are unset.
std::vector<SyntheticPair> AssemblePairs(const Query& original,
                                         std::span<const RewriteHits> hits);

enum class DraftOutcome { kKept, kBelowThreshold, kGeneralVeto };

// Records both scores on the draft. The general filter is consulted only when
// the business score clears the threshold.
DraftOutcome ScoreDraft(SyntheticPair& draft, const Product& product,
                        const BusinessScorer& business, const GeneralFilter& general,
                        double threshold);

// Unique by (query_id, product_id), keeping the highest business score and
// then the smallest via_rewrite. Output sorted by (query_id, product_id).
std::vector<SyntheticPair> Dedupe(std::vector<SyntheticPair> pairs);

struct TraceEntry {
  SyntheticPair draft;
  std::string outcome;  // "kept" or a drop reason
};

struct PipelineResult {
  std::vector<SyntheticPair> pairs;
  PipelineStats stats;
  std::vector<TraceEntry> trace;  // score_and_filter decisions, when requested
};

// Scorers, generator and index bound to one config. Owns everything it
// builds.
class Pipeline {
 public:
  // `policy` is required for the policy generator. When `index` is absent it
  // is built from the products.
  Pipeline(PipelineConfig cfg, std::vector<Product> products,
           std::optional<CategoricalRewritePolicy> policy,
           std::optional<VectorIndex> index = std::nullopt);
  ~Pipeline();

  PipelineResult Run(std::span<const Query> queries, bool trace = false) const;

  const PipelineConfig& config() const { return cfg_; }
  const VectorIndex& index() const { return *index_; }
  const Embedder& embedder() const { return *embedder_; }
  const std::vector<Product>& products() const { return products_; }
  std::vector<RemoteStats> remote_stats() const;

 private:
  struct QueryResult;
  QueryResult RunQuery(const Query& query, bool trace) const;

  PipelineConfig cfg_;
  std::vector<Product> products_;
  std::unordered_map<std::string, size_t> product_pos_;
  std::optional<CategoricalRewritePolicy> policy_;
  std::unique_ptr<Embedder> embedder_;
  std::optional<VectorIndex> index_;
  std::vector<std::unique_ptr<RemoteClient>> clients_;
  std::unique_ptr<RewriteGenerator> generator_;
  std::unique_ptr<RewriteClassifier> rewrite_filter_;
  std::unique_ptr<BusinessScorer> business_;
  std::unique_ptr<GeneralFilter> general_;
};

}  // namespace qsynth
