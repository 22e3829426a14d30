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

#include "qsynth/domain.h"

#include <cctype>
#include <fstream>
#include <set>
#include <unordered_set>

#include "qsynth/common/errors.h"
#include "qsynth/common/utf8.h"

namespace qsynth {

using nlohmann::json;

std::string_view ToString(QueryType type) {
  switch (type) {
    case QueryType::kQa:
      return "qa";
    case QueryType::kAlternative:
      return "alternative";
    case QueryType::kNegative:
      return "negative";
    case QueryType::kKnowledge:
      return "knowledge";
  }
  return "unknown";
}

std::optional<QueryType> ParseQueryType(std::string_view name) {
  for (QueryType t : kAllQueryTypes) {
    if (ToString(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view ToString(RelevanceLabel label) {
  switch (label) {
    case RelevanceLabel::kRelevant:
      return "relevant";
    case RelevanceLabel::kPartiallyRelevant:
      return "partially_relevant";
    case RelevanceLabel::kIrrelevant:
      return "irrelevant";
  }
  return "unknown";
}

std::optional<RelevanceLabel> ParseRelevanceLabel(std::string_view name) {
  if (name == "relevant") return RelevanceLabel::kRelevant;
  if (name == "partially_relevant" || name == "partially relevant" ||
      name == "partial") {
    return RelevanceLabel::kPartiallyRelevant;
  }
  if (name == "irrelevant") return RelevanceLabel::kIrrelevant;
  return std::nullopt;
}

std::string_view ToString(FormatError error) {
  switch (error) {
    case FormatError::kEmpty:
      return "empty";
    case FormatError::kTooFew:
      return "too_few";
    case FormatError::kUnparseable:
      return "unparseable";
  }
  return "unknown";
}

namespace {

// Recognizes a list marker "<digits>." or "<digits>)" followed by whitespace
// or end of line. On success stores the number and the remaining text.
bool SplitNumberedLine(std::string_view line, uint64_t* number,
                       std::string_view* rest) {
  size_t i = 0;
  uint64_t n = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
    if (i >= 9) return false;  // absurd numbering, treat as text
    n = n * 10 + static_cast<uint64_t>(line[i] - '0');
    ++i;
  }
  if (i == 0 || i >= line.size() || (line[i] != '.' && line[i] != ')')) {
    return false;
  }
  ++i;
  if (i < line.size() && line[i] != ' ' && line[i] != '\t') return false;
  *number = n;
  *rest = TrimWhitespace(line.substr(i));
  return true;
}

std::vector<std::string_view> SplitLines(std::string_view raw) {
  std::vector<std::string_view> lines;
  size_t start = 0;
  for (size_t i = 0; i <= raw.size(); ++i) {
    if (i == raw.size() || raw[i] == '\n') {
      std::string_view line = raw.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = i + 1;
    }
  }
  return lines;
}

}  // namespace

ParseResult ParseRewriteList(std::string_view raw, size_t min_k,
                             std::string source_query_id) {
  if (TrimWhitespace(raw).empty()) return FormatError::kEmpty;
  if (!IsValidUtf8(raw)) return FormatError::kUnparseable;

  RewriteList list;
  list.source_query_id = std::move(source_query_id);

  std::optional<bool> numbered;
  std::set<uint64_t> seen_numbers;
  for (std::string_view line : SplitLines(raw)) {
    line = TrimWhitespace(line);
    if (line.empty()) continue;
    uint64_t number = 0;
    std::string_view rest;
    const bool is_numbered = SplitNumberedLine(line, &number, &rest);
    if (!numbered.has_value()) numbered = is_numbered;
    if (*numbered) {
      if (!is_numbered) return FormatError::kUnparseable;
      if (!seen_numbers.insert(number).second) return FormatError::kUnparseable;
      if (rest.empty()) continue;
      list.rewrites.push_back(Rewrite{std::string(rest)});
    } else {
      list.rewrites.push_back(Rewrite{std::string(line)});
    }
  }
  if (list.rewrites.empty()) return FormatError::kEmpty;
  if (list.rewrites.size() < min_k) return FormatError::kTooFew;
  return list;
}

std::string RenderRewriteList(const RewriteList& list) {
  std::string out;
  for (size_t i = 0; i < list.rewrites.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += std::to_string(i + 1);
    out += ". ";
    out += list.rewrites[i].text;
  }
  return out;
}

namespace {

const json& RequireField(const json& j, const char* name) {
  if (!j.is_object()) throw ValidationError("expected a JSON object");
  auto it = j.find(name);
  if (it == j.end()) {
    throw ValidationError(std::string("missing field \"") + name + "\"");
  }
  return *it;
}

std::string RequireString(const json& j, const char* name) {
  const json& v = RequireField(j, name);
  if (!v.is_string()) {
    throw ValidationError(std::string("field \"") + name + "\" must be a string");
  }
  return v.get<std::string>();
}

std::string RequireNonEmpty(const json& j, const char* name) {
  std::string s = RequireString(j, name);
  if (TrimWhitespace(s).empty()) {
    throw ValidationError(std::string("field \"") + name + "\" is empty");
  }
  return s;
}

}  // namespace

json ToJson(const Query& query) {
  return json{{"id", query.id},
              {"text", query.text},
              {"query_type", std::string(ToString(query.type))}};
}

json ToJson(const Product& product) {
  json j{{"id", product.id}, {"title", product.title}};
  j["attributes"] = product.attributes;
  return j;
}

json ToJson(const SyntheticPair& pair) {
  return json{{"query_id", pair.query_id},
              {"query_text", pair.query_text},
              {"product_id", pair.product_id},
              {"business_score", pair.business_score},
              {"general_label", std::string(ToString(pair.general_label))},
              {"via_rewrite", pair.via_rewrite}};
}

Query QueryFromJson(const json& j) {
  Query q;
  q.id = RequireNonEmpty(j, "id");
  q.text = RequireNonEmpty(j, "text");
  const std::string type = RequireString(j, "query_type");
  auto parsed = ParseQueryType(type);
  if (!parsed) throw ValidationError("unknown query_type \"" + type + "\"");
  q.type = *parsed;
  return q;
}

Product ProductFromJson(const json& j) {
  Product p;
  p.id = RequireNonEmpty(j, "id");
  p.title = RequireNonEmpty(j, "title");
  if (auto it = j.find("attributes"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw ValidationError("\"attributes\" must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) {
        throw ValidationError("attribute \"" + key + "\" must be a string");
      }
      p.attributes.emplace(key, value.get<std::string>());
    }
  }
  return p;
}

SyntheticPair SyntheticPairFromJson(const json& j) {
  SyntheticPair p;
  p.query_id = RequireNonEmpty(j, "query_id");
  p.query_text = RequireNonEmpty(j, "query_text");
  p.product_id = RequireNonEmpty(j, "product_id");
  const json& score = RequireField(j, "business_score");
  if (!score.is_number()) throw ValidationError("business_score must be a number");
  p.business_score = score.get<double>();
  if (!(p.business_score >= 0.0 && p.business_score <= 1.0)) {
    throw ValidationError("business_score outside [0, 1]");
  }
  const std::string label = RequireString(j, "general_label");
  auto parsed = ParseRelevanceLabel(label);
  if (!parsed) throw ValidationError("unknown general_label \"" + label + "\"");
  p.general_label = *parsed;
  p.via_rewrite = RequireNonEmpty(j, "via_rewrite");
  return p;
}

void ForEachJsonLine(const std::string& path,
                     const std::function<void(const json&, size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (TrimWhitespace(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) +
                            ": invalid JSON: " + e.what());
    }
    try {
      fn(j, line_no);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": " +
                            e.what());
    }
  }
}

std::vector<Query> ReadQueriesJsonl(const std::string& path) {
  std::vector<Query> out;
  std::unordered_set<std::string> ids;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    Query q = QueryFromJson(j);
    if (!ids.insert(q.id).second) {
      throw ValidationError("duplicate query id \"" + q.id + "\"");
    }
    out.push_back(std::move(q));
  });
  return out;
}

std::vector<Product> ReadProductsJsonl(const std::string& path) {
  std::vector<Product> out;
  std::unordered_set<std::string> ids;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    Product p = ProductFromJson(j);
    if (!ids.insert(p.id).second) {
      throw ValidationError("duplicate product id \"" + p.id + "\"");
    }
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<SyntheticPair> ReadPairsJsonl(const std::string& path) {
  std::vector<SyntheticPair> out;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    out.push_back(SyntheticPairFromJson(j));
  });
  return out;
}

namespace {

template <typename T>
void WriteJsonl(const std::string& path, const std::vector<T>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const T& r : records) out << ToJson(r).dump() << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace

void WriteQueriesJsonl(const std::string& path, const std::vector<Query>& queries) {
  WriteJsonl(path, queries);
}

void WriteProductsJsonl(const std::string& path,
                        const std::vector<Product>& products) {
  WriteJsonl(path, products);
}

void WritePairsJsonl(const std::string& path,
                     const std::vector<SyntheticPair>& pairs) {
  WriteJsonl(path, pairs);
}

}  // namespace qsynth
