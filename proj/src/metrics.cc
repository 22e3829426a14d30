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

#include "qsynth/metrics.h"

#include <algorithm>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "qsynth/common/errors.h"

namespace qsynth {

using nlohmann::json;

std::string_view ToString(Verdict verdict) {
  switch (verdict) {
    case Verdict::kGood: return "good";
    case Verdict::kSame: return "same";
    case Verdict::kBad: return "bad";
  }
  return "unknown";
}

std::optional<Verdict> ParseVerdict(std::string_view name) {
  if (name == "good" || name == "G") return Verdict::kGood;
  if (name == "same" || name == "S") return Verdict::kSame;
  if (name == "bad" || name == "B") return Verdict::kBad;
  return std::nullopt;
}

double ItemGoodrate(std::span<const EvalJudgment> judgments) {
  if (judgments.empty()) throw ValidationError("item goodrate of an empty judgment set");
  double sum = 0.0;
  for (const EvalJudgment& j : judgments) {
    if (j.items.empty()) {
      throw ValidationError("query " + j.query_id + " has no retrieved items");
    }
    const auto relevant = std::count_if(j.items.begin(), j.items.end(),
                                        [](const JudgedItem& it) { return it.relevant; });
    sum += static_cast<double>(relevant) / static_cast<double>(j.items.size());
  }
  return 100.0 * sum / static_cast<double>(judgments.size());
}

double QueryGoodrateAtN(std::span<const EvalJudgment> judgments, size_t n, size_t top_k) {
  if (n < 1) throw ValidationError("N must be >= 1");
  if (judgments.empty()) return 0.0;
  size_t hits = 0;
  for (const EvalJudgment& j : judgments) {
    const size_t len = std::min(top_k, j.items.size());
    size_t relevant = 0;
    for (size_t i = 0; i < len; ++i) relevant += j.items[i].relevant ? 1 : 0;
    if (relevant >= n) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(judgments.size());
}

GsbResult Gsb(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) throw ValidationError("GSB of an empty verdict list");
  size_t g = 0, s = 0, b = 0;
  for (Verdict v : verdicts) {
    switch (v) {
      case Verdict::kGood: ++g; break;
      case Verdict::kSame: ++s; break;
      case Verdict::kBad: ++b; break;
    }
  }
  const double total = static_cast<double>(verdicts.size());
  GsbResult r;
  r.good = 100.0 * static_cast<double>(g) / total;
  r.same = 100.0 * static_cast<double>(s) / total;
  r.bad = 100.0 * static_cast<double>(b) / total;
  r.delta = r.good - r.bad;
  return r;
}

double SampleAccuracy(const std::vector<bool>& correct) {
  if (correct.empty()) throw ValidationError("accuracy of an empty sample");
  const auto ok = std::count(correct.begin(), correct.end(), true);
  return 100.0 * static_cast<double>(ok) / static_cast<double>(correct.size());
}

namespace {

MetricsRow ComputeRow(std::string name, std::span<const EvalJudgment> judgments,
                      std::span<const LabeledSample> labels,
                      const std::vector<size_t>& n_values, size_t top_k) {
  MetricsRow row;
  row.name = std::move(name);
  row.queries = judgments.size();
  row.labeled = labels.size();
  if (!judgments.empty()) {
    row.item_goodrate = ItemGoodrate(judgments);
    for (size_t n : n_values) row.query_goodrate_at[n] = QueryGoodrateAtN(judgments, n, top_k);
    std::vector<Verdict> verdicts;
    for (const EvalJudgment& j : judgments) {
      if (j.verdict) verdicts.push_back(*j.verdict);
    }
    if (!verdicts.empty()) row.gsb = Gsb(verdicts);
  }
  if (!labels.empty()) {
    std::vector<bool> correct;
    for (const LabeledSample& l : labels) correct.push_back(l.correct);
    row.accuracy = SampleAccuracy(correct);
  }
  return row;
}

}  // namespace

MetricsReport ComputeReport(std::span<const EvalJudgment> judgments,
                            std::span<const LabeledSample> labels,
                            std::vector<size_t> n_values, size_t top_k) {
  if (judgments.empty() && labels.empty()) {
    throw ValidationError("nothing to evaluate: no judgments and no labels");
  }
  MetricsReport report;
  std::sort(n_values.begin(), n_values.end());
  n_values.erase(std::unique(n_values.begin(), n_values.end()), n_values.end());
  report.n_values = n_values;
  report.top_k = top_k;
  for (QueryType type : kAllQueryTypes) {
    std::vector<EvalJudgment> js;
    for (const EvalJudgment& j : judgments) {
      if (j.query_type == type) js.push_back(j);
    }
    std::vector<LabeledSample> ls;
    for (const LabeledSample& l : labels) {
      if (l.query_type == type) ls.push_back(l);
    }
    if (js.empty() && ls.empty()) continue;
    report.rows.push_back(ComputeRow(std::string(ToString(type)), js, ls, n_values, top_k));
  }
  report.rows.push_back(ComputeRow("all", judgments, labels, n_values, top_k));
  return report;
}

json MetricsReport::ToJson() const {
  json j;
  j["top_k"] = top_k;
  j["n_values"] = n_values;
  json rows_json = json::array();
  for (const MetricsRow& r : rows) {
    json row = {{"name", r.name}, {"queries", r.queries}, {"labeled", r.labeled}};
    if (r.item_goodrate) {
      row["item_goodrate"] = *r.item_goodrate;
      json qg = json::object();
      for (const auto& [n, v] : r.query_goodrate_at) qg[std::to_string(n)] = v;
      row["query_goodrate_at"] = qg;
    }
    if (r.gsb) {
      row["gsb"] = {{"good", r.gsb->good},
                    {"same", r.gsb->same},
                    {"bad", r.gsb->bad},
                    {"delta", r.gsb->delta}};
    }
    if (r.accuracy) row["accuracy"] = *r.accuracy;
    rows_json.push_back(row);
  }
  j["rows"] = rows_json;
  return j;
}

MetricsReport MetricsReport::FromJson(const json& j) {
  MetricsReport m;
  try {
    m.top_k = j.at("top_k").get<size_t>();
    m.n_values = j.at("n_values").get<std::vector<size_t>>();
    for (const json& row : j.at("rows")) {
      MetricsRow r;
      r.name = row.at("name").get<std::string>();
      r.queries = row.at("queries").get<size_t>();
      r.labeled = row.value("labeled", size_t{0});
      if (row.contains("item_goodrate")) {
        r.item_goodrate = row["item_goodrate"].get<double>();
        for (const auto& [n, v] : row.at("query_goodrate_at").items()) {
          r.query_goodrate_at[std::stoul(n)] = v.get<double>();
        }
      }
      if (row.contains("gsb")) {
        const json& g = row["gsb"];
        r.gsb = GsbResult{g.at("good").get<double>(), g.at("same").get<double>(),
                          g.at("bad").get<double>(), g.at("delta").get<double>()};
      }
      if (row.contains("accuracy")) r.accuracy = row["accuracy"].get<double>();
      m.rows.push_back(std::move(r));
    }
  } catch (const std::exception& e) {
    throw ValidationError(std::string("bad metrics report: ") + e.what());
  }
  return m;
}

namespace {

std::string Fixed(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::string FormatTable(const std::vector<std::vector<std::string>>& cells) {
  std::vector<size_t> width;
  for (const auto& row : cells) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  for (size_t r = 0; r < cells.size(); ++r) {
    for (size_t c = 0; c < cells[r].size(); ++c) {
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << cells[r][c];
      } else {
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[r][c];
      }
    }
    os << '\n';
    if (r == 0) {
      size_t total = 0;
      for (size_t w : width) total += w + 2;
      os << std::string(total - 2, '-') << '\n';
    }
  }
  return os.str();
}

}  // namespace

std::string MetricsReport::ToTable() const {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Query Type", "Queries", "Item Goodrate"};
  for (size_t n : n_values) header.push_back("Query Goodrate@" + std::to_string(n));
  header.insert(header.end(), {"GSB (G/S/B)", "GSB delta", "Accuracy"});
  cells.push_back(header);
  for (const MetricsRow& r : rows) {
    std::vector<std::string> line = {r.name, std::to_string(r.queries),
                                     r.item_goodrate ? Fixed(*r.item_goodrate) : "-"};
    for (size_t n : n_values) {
      auto it = r.query_goodrate_at.find(n);
      line.push_back(it == r.query_goodrate_at.end() ? "-" : Fixed(it->second));
    }
    if (r.gsb) {
      line.push_back(Fixed(r.gsb->good, 1) + "/" + Fixed(r.gsb->same, 1) + "/" +
                     Fixed(r.gsb->bad, 1));
      line.push_back((r.gsb->delta >= 0 ? "+" : "") + Fixed(r.gsb->delta));
    } else {
      line.insert(line.end(), {"-", "-"});
    }
    line.push_back(r.accuracy ? Fixed(*r.accuracy, 1) + "%" : "-");
    cells.push_back(std::move(line));
  }
  return FormatTable(cells);
}

std::vector<EvalJudgment> ReadJudgmentsJsonl(const std::string& path) {
  std::vector<EvalJudgment> out;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    if (!j.is_object()) throw ValidationError("judgment must be an object");
    EvalJudgment e;
    try {
      e.query_id = j.at("query_id").get<std::string>();
      if (j.contains("query_type")) {
        const std::string t = j["query_type"].get<std::string>();
        e.query_type = ParseQueryType(t);
        if (!e.query_type) throw ValidationError("unknown query_type \"" + t + "\"");
      }
      for (const json& it : j.at("items")) {
        e.items.push_back({it.at("product_id").get<std::string>(),
                           it.at("relevant").get<bool>()});
      }
      if (j.contains("verdict")) {
        const std::string v = j["verdict"].get<std::string>();
        e.verdict = ParseVerdict(v);
        if (!e.verdict) throw ValidationError("unknown verdict \"" + v + "\"");
      }
    } catch (const json::exception& ex) {
      throw ValidationError(std::string("bad judgment: ") + ex.what());
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<LabeledSample> ReadLabelsJsonl(const std::string& path) {
  std::vector<LabeledSample> out;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    LabeledSample s;
    try {
      s.correct = j.at("correct").get<bool>();
      if (j.contains("query_type")) {
        const std::string t = j["query_type"].get<std::string>();
        s.query_type = ParseQueryType(t);
        if (!s.query_type) throw ValidationError("unknown query_type \"" + t + "\"");
      }
    } catch (const json::exception& ex) {
      throw ValidationError(std::string("bad label: ") + ex.what());
    }
    out.push_back(s);
  });
  return out;
}

}  // namespace qsynth
