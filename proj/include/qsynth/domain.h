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

#include <array>
#include <functional>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace qsynth {

// Long-tail knowledge-intensive query taxonomy.
enum class QueryType { kQa, kAlternative, kNegative, kKnowledge };

inline constexpr std::array<QueryType, 4> kAllQueryTypes = {
    QueryType::kQa, QueryType::kAlternative, QueryType::kNegative,
    QueryType::kKnowledge};

std::string_view ToString(QueryType type);
std::optional<QueryType> ParseQueryType(std::string_view name);

// Three-way relevance judgment shared by the rewrite classifier and the
// general-purpose query-product filter.
enum class RelevanceLabel { kRelevant, kPartiallyRelevant, kIrrelevant };

std::string_view ToString(RelevanceLabel label);
std::optional<RelevanceLabel> ParseRelevanceLabel(std::string_view name);

struct Query {
  std::string id;
  std::string text;
  QueryType type = QueryType::kQa;

  bool operator==(const Query&) const = default;
};

struct Rewrite {
  std::string text;

  bool operator==(const Rewrite&) const = default;
};

// The k-candidate response for one query. k is the list length.
struct RewriteList {
  std::string source_query_id;
  std::vector<Rewrite> rewrites;

  size_t k() const { return rewrites.size(); }
  bool operator==(const RewriteList&) const = default;
};

struct Product {
  std::string id;
  std::string title;
  std::map<std::string, std::string> attributes;

  bool operator==(const Product&) const = default;
};

// One emitted training instance. query_text is always the original query,
// never the rewrite that retrieved the product.
struct SyntheticPair {
  std::string query_id;
  std::string query_text;
  std::string product_id;
  double business_score = 0.0;
  RelevanceLabel general_label = RelevanceLabel::kIrrelevant;
  std::string via_rewrite;

  bool operator==(const SyntheticPair&) const = default;
};

inline constexpr size_t kDefaultMinRewrites = 5;

enum class FormatError { kEmpty, kTooFew, kUnparseable };

std::string_view ToString(FormatError error);

using ParseResult = std::variant<RewriteList, FormatError>;

// Parses generator output into a rewrite list. Two layouts are accepted:
// numbered ("1. text" or "1) text", one per line) and bare (one rewrite per
// non-blank line). The layout is fixed by the first non-blank line; in
// numbered mode every non-blank line must carry a distinct number. Entries
// are whitespace-trimmed and entries that are empty after trimming are
// skipped. Duplicate texts are kept.
ParseResult ParseRewriteList(std::string_view raw,
                             size_t min_k = kDefaultMinRewrites,
                             std::string source_query_id = {});

// Canonical numbered rendering; ParseRewriteList inverts it.
std::string RenderRewriteList(const RewriteList& list);

// JSONL records. Parsing validates field presence and the type invariants and
// throws ValidationError on violation.
nlohmann::json ToJson(const Query& query);
nlohmann::json ToJson(const Product& product);
nlohmann::json ToJson(const SyntheticPair& pair);
Query QueryFromJson(const nlohmann::json& j);
Product ProductFromJson(const nlohmann::json& j);
SyntheticPair SyntheticPairFromJson(const nlohmann::json& j);

// File readers check id uniqueness in addition to per-record validation.
std::vector<Query> ReadQueriesJsonl(const std::string& path);
std::vector<Product> ReadProductsJsonl(const std::string& path);
std::vector<SyntheticPair> ReadPairsJsonl(const std::string& path);
void WriteQueriesJsonl(const std::string& path, const std::vector<Query>& queries);
void WriteProductsJsonl(const std::string& path,
                        const std::vector<Product>& products);
void WritePairsJsonl(const std::string& path,
                     const std::vector<SyntheticPair>& pairs);

// Calls fn(json, line_number) for every non-blank line of a JSONL file.
void ForEachJsonLine(const std::string& path,
                     const std::function<void(const nlohmann::json&, size_t)>& fn);

}  // namespace qsynth
