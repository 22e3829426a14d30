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
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsynth/cli.h"
#include "qsynth/pipeline.h"

namespace qsynth {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void Write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("qsynth_cli_" + std::string(
                                ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Write(dir_ / "cfg.json", R"({
  "min_k": 2, "top_k": 5, "seed": 3,
  "generator": {"k": 3, "mode": "sample"},
  "index": {"dim": 64, "partitions": 3, "probes": 3},
  "training": {"candidates": "cands.jsonl", "iterations": 4, "group_size": 4, "k": 3}
})");
    Write(dir_ / "queries.jsonl",
          R"({"id":"q1","query_type":"qa","text":"frying pan for eggs"}
{"id":"q2","query_type":"alternative","text":"garden hose for lawn"}
)");
    Write(dir_ / "products.jsonl",
          R"({"id":"p1","title":"steel frying pan","attributes":{"category":"frying pan"}}
{"id":"p2","title":"nonstick frying pan","attributes":{"category":"frying pan"}}
{"id":"p3","title":"frying pan cleaning brush","attributes":{"category":"cleaning brush"}}
{"id":"p4","title":"expandable garden hose","attributes":{"category":"garden hose"}}
{"id":"p5","title":"garden hose reel","attributes":{"category":"hose reel"}}
{"id":"p6","title":"thick yoga mat","attributes":{"category":"yoga mat"}}
)");
    Write(dir_ / "cands.jsonl",
          R"({"query_id":"q1","candidates":["frying pan eggs","nonstick frying pan","steel pan","yoga mat"]}
{"query_id":"q2","candidates":["garden hose","lawn hose","expandable garden hose","pan"]}
)");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const char* name) const { return (dir_ / name).string(); }

  Outcome Train(const char* out, const std::string& seed = "11") {
    return Cli({"train-policy", "--config", P("cfg.json"), "--queries", P("queries.jsonl"),
                "--products", P("products.jsonl"), "--out", P(out), "--stats",
                P("train.csv"), "--seed", seed});
  }
  Outcome Synth(const char* out, const std::string& seed = "5") {
    return Cli({"synth", "--config", P("cfg.json"), "--queries", P("queries.jsonl"),
                "--products", P("products.jsonl"), "--policy", P("policy.json"), "--out", P(out),
                "--seed", seed});
  }

  fs::path dir_;
};

TEST_F(CliTest, HelpOnEveryCommandDocumentsFlags) {
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"train-policy", {"--config", "--queries", "--products", "--candidates", "--out",
                        "--stats", "--iterations", "--seed", "--jobs"}},
      {"build-index", {"--config", "--products", "--out", "--seed"}},
      {"synth", {"--config", "--queries", "--products", "--out", "--stats", "--policy",
                 "--index", "--top-k", "--threshold", "--seed", "--jobs"}},
      {"eval", {"--judgments", "--labels", "--out", "--top-k", "--n"}},
      {"gradcheck", {"--seed", "--step"}},
      {"report", {"--stats", "--metrics"}},
  };
  for (const auto& [cmd, flags] : commands) {
    const Outcome o = Cli({cmd, "--help"});
    EXPECT_EQ(o.code, cli::kExitOk) << cmd;
    for (const auto& f : flags) EXPECT_NE(o.out.find(f), std::string::npos) << cmd << " " << f;
  }
  EXPECT_EQ(Cli({"--help"}).code, cli::kExitOk);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  Outcome o = Cli({"synth", "--queries", P("queries.jsonl"), "--products",
                   P("products.jsonl"), "--out", P("x.jsonl")});
  EXPECT_EQ(o.code, cli::kExitValidation);
  EXPECT_NE(o.err.find("--config"), std::string::npos);
  EXPECT_NE(o.err.find("Usage"), std::string::npos);

  EXPECT_EQ(Cli({}).code, cli::kExitValidation);
  EXPECT_EQ(Cli({"frobnicate"}).code, cli::kExitValidation);
  EXPECT_EQ(Cli({"gradcheck", "--bogus"}).code, cli::kExitValidation);
  o = Cli({"build-index", "--config", P("cfg.json"), "--products", P("missing.jsonl"), "--out",
           P("i.bin")});
  EXPECT_EQ(o.code, cli::kExitValidation);
  EXPECT_NE(o.err.find("missing.jsonl"), std::string::npos);

  Write(dir_ / "broken.json", "{\"top_k\": ");
  o = Cli({"build-index", "--config", P("broken.json"), "--products", P("products.jsonl"),
           "--out", P("i.bin")});
  EXPECT_EQ(o.code, cli::kExitValidation);
  EXPECT_NE(o.err.find("error:"), std::string::npos);

  o = Cli({"synth", "--config", P("cfg.json"), "--queries", P("queries.jsonl"), "--products",
           P("products.jsonl"), "--out", P("x.jsonl")});
  EXPECT_EQ(o.code, cli::kExitValidation);
  EXPECT_NE(o.err.find("policy"), std::string::npos);
}

TEST_F(CliTest, GradCheckPassesForSeedSeven) {
  const Outcome o = Cli({"gradcheck", "--seed", "7"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  const double e = std::stod(o.out.substr(o.out.find(':') + 1));
  EXPECT_LT(e, 1e-4);
  EXPECT_EQ(Cli({"gradcheck", "--seed", "7"}).out, o.out);
}

TEST_F(CliTest, SeededCommandsAreBitIdentical) {
  ASSERT_EQ(Train("policy.json").code, cli::kExitOk);
  ASSERT_EQ(Train("policy2.json").code, cli::kExitOk);
  EXPECT_EQ(Slurp(dir_ / "policy.json"), Slurp(dir_ / "policy2.json"));
  EXPECT_EQ(Slurp(dir_ / "train.csv").empty(), false);

  ASSERT_EQ(Synth("a.jsonl").code, cli::kExitOk);
  ASSERT_EQ(Synth("b.jsonl").code, cli::kExitOk);
  EXPECT_FALSE(Slurp(dir_ / "a.jsonl").empty());
  EXPECT_EQ(Slurp(dir_ / "a.jsonl"), Slurp(dir_ / "b.jsonl"));
  EXPECT_EQ(Slurp(dir_ / "a.jsonl.stats.json"), Slurp(dir_ / "b.jsonl.stats.json"));

  for (const char* out : {"i1.bin", "i2.bin"}) {
    ASSERT_EQ(Cli({"build-index", "--config", P("cfg.json"), "--products", P("products.jsonl"),
                   "--out", P(out), "--seed", "9"})
                  .code,
              cli::kExitOk);
  }
  EXPECT_EQ(Slurp(dir_ / "i1.bin"), Slurp(dir_ / "i2.bin"));
}

TEST_F(CliTest, SynthWithPrebuiltIndexMatchesInMemoryIndex) {
  ASSERT_EQ(Train("policy.json").code, cli::kExitOk);
  ASSERT_EQ(Cli({"build-index", "--config", P("cfg.json"), "--products", P("products.jsonl"),
                 "--out", P("idx.bin")})
                .code,
            cli::kExitOk);
  ASSERT_EQ(Synth("mem.jsonl").code, cli::kExitOk);
  const Outcome o = Cli({"synth", "--config", P("cfg.json"), "--queries", P("queries.jsonl"),
                         "--products", P("products.jsonl"), "--policy", P("policy.json"),
                         "--index", P("idx.bin"), "--out", P("disk.jsonl"), "--seed", "5"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_EQ(Slurp(dir_ / "mem.jsonl"), Slurp(dir_ / "disk.jsonl"));

  for (const auto& p : ReadPairsJsonl(P("mem.jsonl"))) EXPECT_NE(p.product_id, "p3");
  const Outcome report = Cli({"report", "--stats", P("mem.jsonl.stats.json")});
  EXPECT_EQ(report.code, cli::kExitOk);
  EXPECT_NE(report.out.find("score_and_filter"), std::string::npos);
}

TEST_F(CliTest, ThresholdFlagOverridesConfig) {
  ASSERT_EQ(Train("policy.json").code, cli::kExitOk);
  const Outcome o = Cli({"synth", "--config", P("cfg.json"), "--queries", P("queries.jsonl"),
                         "--products", P("products.jsonl"), "--policy", P("policy.json"),
                         "--out", P("t.jsonl"), "--threshold", "1.0"});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  for (const auto& p : ReadPairsJsonl(P("t.jsonl"))) EXPECT_EQ(p.business_score, 1.0);
  EXPECT_EQ(Cli({"synth", "--config", P("cfg.json"), "--queries", P("queries.jsonl"),
                 "--products", P("products.jsonl"), "--policy", P("policy.json"), "--out",
                 P("t.jsonl"), "--threshold", "1.5"})
                .code,
            cli::kExitValidation);
}

TEST_F(CliTest, EvalAndReport) {
  Write(dir_ / "j.jsonl",
        R"({"query_id":"a","query_type":"qa","items":[{"product_id":"p1","relevant":true},{"product_id":"p2","relevant":false}],"verdict":"good"}
{"query_id":"b","query_type":"qa","items":[{"product_id":"p1","relevant":true}],"verdict":"bad"}
)");
  Outcome o = Cli({"eval", "--judgments", P("j.jsonl"), "--n", "1", "--out", P("m.json")});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  EXPECT_NE(o.out.find("75.00"), std::string::npos);
  o = Cli({"report", "--metrics", P("m.json")});
  EXPECT_EQ(o.code, cli::kExitOk);
  EXPECT_NE(o.out.find("Query Goodrate@1"), std::string::npos);
  EXPECT_EQ(Cli({"eval"}).code, cli::kExitValidation);
  EXPECT_EQ(Cli({"report"}).code, cli::kExitValidation);
}

TEST(CliFixtureTest, TrainingRaisesMeanRewardByThirtyPercent) {
  const std::string fixtures = QSYNTH_FIXTURE_DIR;
  const fs::path dir = fs::temp_directory_path() / "qsynth_cli_fixture_train";
  fs::create_directories(dir);
  const Outcome o = Cli({"train-policy", "--config", fixtures + "/fixture.json", "--queries",
                         fixtures + "/queries.jsonl", "--products", fixtures + "/products.jsonl",
                         "--out", (dir / "policy.json").string(), "--stats",
                         (dir / "stats.csv").string()});
  ASSERT_EQ(o.code, cli::kExitOk) << o.err;
  std::ifstream in(dir / "stats.csv");
  std::string line;
  std::vector<double> totals;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const size_t a = line.find(',');
    totals.push_back(std::stod(line.substr(a + 1, line.find(',', a + 1) - a - 1)));
  }
  fs::remove_all(dir);
  ASSERT_EQ(totals.size(), 150u);
  EXPECT_GE(totals.back(), 1.3 * totals.front());
}

}  // namespace
}  // namespace qsynth
