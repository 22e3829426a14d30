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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsynth/domain.h"

namespace qsynth {

enum class Verdict { kGood, kSame, kBad };

std::string_view ToString(Verdict verdict);
std::optional<Verdict> ParseVerdict(std::string_view name);

struct JudgedItem {
  std::string product_id;
  bool relevant = false;

  bool operator==(const JudgedItem&) const = default;
};

// One query's ranked retrieval list with relevance labels. `verdict` is set
// only for side-by-side records.
struct EvalJudgment {
  std::string query_id;
  std::optional<QueryType> query_type;
  std::vector<JudgedItem> items;
  std::optional<Verdict> verdict;

  bool operator==(const EvalJudgment&) const = default;
};

// Mean over queries of the relevant share of each list, in percent. Throws
// ValidationError on an empty set or an empty list.
double ItemGoodrate(std::span<const EvalJudgment> judgments);

// Percent of queries with at least n relevant items among their first top_k.
// 0 for an empty set. Throws ValidationError when n < 1.
double QueryGoodrateAtN(std::span<const EvalJudgment> judgments, size_t n,
                        size_t top_k = 200);

struct GsbResult {
  double good = 0.0;
  double same = 0.0;
  double bad = 0.0;
  double delta = 0.0;  // good - bad

  bool operator==(const GsbResult&) const = default;
};

// Throws ValidationError on an empty list.
GsbResult Gsb(std::span<const Verdict> verdicts);

// correct / total in percent. Throws ValidationError on an empty list.
double SampleAccuracy(const std::vector<bool>& correct);

struct LabeledSample {
  std::optional<QueryType> query_type;
  bool correct = false;
};

struct MetricsRow {
  std::string name;  // query type, or "all"
  size_t queries = 0;
  size_t labeled = 0;
  std::optional<double> item_goodrate;  // set when the row has judgments
  std::map<size_t, double> query_goodrate_at;
  std::optional<GsbResult> gsb;
  std::optional<double> accuracy;
};

struct MetricsReport {
  std::vector<size_t> n_values;
  size_t top_k = 200;
  std::vector<MetricsRow> rows;  // one per query type present, then "all"

  nlohmann::json ToJson() const;
  static MetricsReport FromJson(const nlohmann::json& j);
  // Aligned plain-text table, one row per query type.
  std::string ToTable() const;
};

MetricsReport ComputeReport(std::span<const EvalJudgment> judgments,
                            std::span<const LabeledSample> labels,
                            std::vector<size_t> n_values = {10, 100},
                            size_t top_k = 200);

// {"query_id", "query_type"?, "items": [{"product_id", "relevant"}], "verdict"?}
std::vector<EvalJudgment> ReadJudgmentsJsonl(const std::string& path);
// {"correct": bool, "query_type"?}
std::vector<LabeledSample> ReadLabelsJsonl(const std::string& path);

}  // namespace qsynth
