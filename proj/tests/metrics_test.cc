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

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsynth/common/errors.h"
#include "qsynth/metrics.h"

namespace qsynth {
namespace {

namespace fs = std::filesystem;

EvalJudgment Judgment(std::string id, size_t len, size_t relevant_prefix) {
  EvalJudgment j{std::move(id), std::nullopt, {}, std::nullopt};
  for (size_t i = 0; i < len; ++i) j.items.push_back({"p" + std::to_string(i), i < relevant_prefix});
  return j;
}

std::vector<Verdict> Verdicts(size_t g, size_t s, size_t b) {
  std::vector<Verdict> v(g, Verdict::kGood);
  v.insert(v.end(), s, Verdict::kSame);
  v.insert(v.end(), b, Verdict::kBad);
  return v;
}

TEST(ItemGoodrateTest, Examples) {
  const std::vector<EvalJudgment> half = {Judgment("q", 200, 100)};
  EXPECT_DOUBLE_EQ(ItemGoodrate(half), 50.0);
  // Macro: 1/2 and 10/10 average to 75, pooled would be 11/12.
  const std::vector<EvalJudgment> two = {Judgment("a", 2, 1), Judgment("b", 10, 10)};
  EXPECT_DOUBLE_EQ(ItemGoodrate(two), 75.0);
  const std::vector<EvalJudgment> all = {Judgment("a", 7, 7)};
  EXPECT_DOUBLE_EQ(ItemGoodrate(all), 100.0);
  EXPECT_THROW(ItemGoodrate({}), ValidationError);
  const std::vector<EvalJudgment> empty_list = {Judgment("a", 0, 0)};
  EXPECT_THROW(ItemGoodrate(empty_list), ValidationError);
}

TEST(QueryGoodrateTest, Examples) {
  const std::vector<EvalJudgment> exact = {Judgment("a", 20, 10)};
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(exact, 10), 100.0);
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(exact, 11), 0.0);
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(exact, 500), 0.0);

  const std::vector<EvalJudgment> four = {Judgment("a", 50, 10), Judgment("b", 50, 12),
                                          Judgment("c", 50, 30), Judgment("d", 50, 9)};
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(four, 10), 75.0);
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN({}, 10), 0.0);
  EXPECT_THROW(QueryGoodrateAtN(four, 0), ValidationError);
}

TEST(QueryGoodrateTest, OnlyTopKCounts) {
  EvalJudgment j = Judgment("a", 300, 0);
  for (size_t i = 195; i < 205; ++i) j.items[i].relevant = true;
  const std::vector<EvalJudgment> js = {j};
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(js, 5), 100.0);
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(js, 6), 0.0);
  EXPECT_DOUBLE_EQ(QueryGoodrateAtN(js, 10, 300), 100.0);
}

TEST(GsbTest, Examples) {
  EXPECT_EQ(Gsb(Verdicts(0, 9, 0)), (GsbResult{0, 100, 0, 0}));
  const GsbResult r = Gsb(Verdicts(30, 50, 20));
  EXPECT_DOUBLE_EQ(r.good, 30.0);
  EXPECT_DOUBLE_EQ(r.same, 50.0);
  EXPECT_DOUBLE_EQ(r.bad, 20.0);
  EXPECT_DOUBLE_EQ(r.delta, 10.0);
  EXPECT_EQ(Gsb(Verdicts(4, 0, 0)), (GsbResult{100, 0, 0, 100}));
  EXPECT_THROW(Gsb({}), ValidationError);
}

TEST(SampleAccuracyTest, Examples) {
  EXPECT_DOUBLE_EQ(SampleAccuracy(std::vector<bool>(5, true)), 100.0);
  std::vector<bool> c(1000, false);
  std::fill(c.begin(), c.begin() + 906, true);
  EXPECT_NEAR(SampleAccuracy(c), 90.6, 1e-12);
  EXPECT_DOUBLE_EQ(SampleAccuracy({true, false}), 50.0);
  EXPECT_THROW(SampleAccuracy({}), ValidationError);
}

// ---- Properties on random judgment sets ---------------------------------------

std::vector<EvalJudgment> RandomJudgments(std::mt19937_64& rng) {
  std::uniform_int_distribution<size_t> nq(1, 12), len(1, 260);
  std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0, 1)(rng));
  std::vector<EvalJudgment> js(nq(rng));
  for (size_t q = 0; q < js.size(); ++q) {
    js[q].query_id = "q" + std::to_string(q);
    const size_t n = len(rng);
    for (size_t i = 0; i < n; ++i) js[q].items.push_back({"p", coin(rng)});
  }
  return js;
}

TEST(MetricsPropertyTest, MatchBruteForce) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const auto js = RandomJudgments(rng);
    double ratio_sum = 0.0;
    for (const auto& j : js) {
      int rel = 0;
      for (const auto& it : j.items) rel += it.relevant;
      ratio_sum += 100.0 * rel / static_cast<double>(j.items.size());
    }
    EXPECT_NEAR(ItemGoodrate(js), ratio_sum / js.size(), 1e-9);

    for (size_t n : {1, 5, 50, 150, 201}) {
      int ok = 0;
      for (const auto& j : js) {
        int rel = 0;
        for (size_t i = 0; i < j.items.size() && i < 200; ++i) rel += j.items[i].relevant;
        ok += rel >= static_cast<int>(n);
      }
      EXPECT_NEAR(QueryGoodrateAtN(js, n), 100.0 * ok / js.size(), 1e-9);
    }
  }
}

TEST(MetricsPropertyTest, GoodrateNonIncreasingInN) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto js = RandomJudgments(rng);
    double prev = 101.0;
    for (size_t n = 1; n <= 210; ++n) {
      const double g = QueryGoodrateAtN(js, n);
      EXPECT_LE(g, prev);
      prev = g;
    }
  }
}

TEST(MetricsPropertyTest, GsbSwapFlipsDeltaAndSameIsNeutral) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<size_t> count(0, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t g = count(rng), s = count(rng) + 1, b = count(rng);
    const GsbResult r = Gsb(Verdicts(g, s, b));
    const GsbResult swapped = Gsb(Verdicts(b, s, g));
    EXPECT_NEAR(swapped.delta, -r.delta, 1e-12);
    EXPECT_NEAR(r.good + r.same + r.bad, 100.0, 1e-9);
    if (g == 0 && b == 0) {
      EXPECT_EQ(r.delta, 0.0);
    } else {
      // Scaling the Good/Bad counts with Same fixed keeps the delta's sign.
      const GsbResult more_same = Gsb(Verdicts(g, s * 3, b));
      EXPECT_EQ(more_same.delta > 0, r.delta > 0);
      EXPECT_EQ(more_same.delta < 0, r.delta < 0);
    }
  }
}

// ---- Report -----------------------------------------------------------------------

TEST(MetricsReportTest, RowsPerQueryTypeThenAll) {
  std::vector<EvalJudgment> js = {Judgment("a", 4, 4), Judgment("b", 4, 2), Judgment("c", 4, 0)};
  js[0].query_type = QueryType::kQa;
  js[1].query_type = QueryType::kQa;
  js[2].query_type = QueryType::kNegative;
  js[0].verdict = Verdict::kGood;
  js[2].verdict = Verdict::kBad;
  const std::vector<LabeledSample> labels = {{QueryType::kQa, true}, {QueryType::kQa, false}};

  const MetricsReport r = ComputeReport(js, labels, {3, 1, 3}, 200);
  EXPECT_EQ(r.n_values, (std::vector<size_t>{1, 3}));
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].name, "qa");
  EXPECT_DOUBLE_EQ(*r.rows[0].item_goodrate, 75.0);
  EXPECT_DOUBLE_EQ(r.rows[0].query_goodrate_at.at(3), 50.0);
  EXPECT_DOUBLE_EQ(*r.rows[0].accuracy, 50.0);
  EXPECT_EQ(r.rows[1].name, "negative");
  EXPECT_FALSE(r.rows[1].accuracy.has_value());
  EXPECT_EQ(r.rows[2].name, "all");
  EXPECT_EQ(r.rows[2].queries, 3u);
  EXPECT_DOUBLE_EQ(r.rows[2].gsb->delta, 0.0);

  const MetricsReport back = MetricsReport::FromJson(r.ToJson());
  EXPECT_EQ(back.ToJson(), r.ToJson());

  const std::string table = r.ToTable();
  EXPECT_NE(table.find("Query Goodrate@3"), std::string::npos);
  EXPECT_NE(table.find("75.00"), std::string::npos);
  EXPECT_NE(table.find("50.0%"), std::string::npos);
  EXPECT_THROW(ComputeReport({}, {}), ValidationError);
}

TEST(MetricsIoTest, ReadJsonl) {
  const fs::path dir = fs::temp_directory_path() / "qsynth_metrics_io";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "j.jsonl");
    out << R"({"query_id":"a","query_type":"qa","items":[{"product_id":"p1","relevant":true}],"verdict":"G"})"
        << "\n"
        << R"({"query_id":"b","items":[{"product_id":"p2","relevant":false}]})" << "\n";
  }
  const auto js = ReadJudgmentsJsonl((dir / "j.jsonl").string());
  ASSERT_EQ(js.size(), 2u);
  EXPECT_EQ(js[0].query_type, QueryType::kQa);
  EXPECT_EQ(js[0].verdict, Verdict::kGood);
  EXPECT_FALSE(js[1].verdict.has_value());
  EXPECT_FALSE(js[1].items[0].relevant);

  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"query_id":"a","items":[],"verdict":"meh"})" << "\n";
  }
  EXPECT_THROW(ReadJudgmentsJsonl((dir / "bad.jsonl").string()), ValidationError);
  {
    std::ofstream out(dir / "l.jsonl");
    out << R"({"correct":true,"query_type":"knowledge"})" << "\n" << R"({"correct":false})" << "\n";
  }
  const auto ls = ReadLabelsJsonl((dir / "l.jsonl").string());
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0].query_type, QueryType::kKnowledge);
  EXPECT_FALSE(ls[1].correct);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace qsynth
