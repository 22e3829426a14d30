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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsynth/common/errors.h"
#include "qsynth/common/random.h"
#include "qsynth/common/utf8.h"
#include "qsynth/retrieval.h"

namespace qsynth {
namespace {

namespace fs = std::filesystem;

std::string RandomText(Rng& rng, size_t max_len) {
  static const char* kPieces[] = {"a", "b", "c", "d", "e", " ", "s", "\xc3\xa9", "1"};
  std::string s;
  for (size_t i = rng.Below(max_len + 1); i > 0; --i) s += kPieces[rng.Below(9)];
  return s;
}

std::vector<Product> RandomCorpus(Rng& rng, size_t n) {
  std::vector<Product> out;
  for (size_t i = 0; i < n; ++i) {
    out.push_back({"p" + std::to_string(i), RandomText(rng, 16), {}});
  }
  return out;
}

// Independent restatement of the feature hash: seeded FNV-1a over the bytes.
std::pair<size_t, int> RefBucket(const std::string& feature, size_t dim, uint64_t seed) {
  uint64_t x = seed + 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  uint64_t h = x ^ (x >> 31);
  for (unsigned char c : feature) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return {h % dim, (h >> 63) ? -1 : 1};
}

TEST(EmbeddingTest, IdenticalStringsGiveIdenticalVectors) {
  const auto a = EmbedText("stainless steel pan");
  const auto b = EmbedText("stainless steel pan");
  EXPECT_EQ(a, b);
  EXPECT_NEAR(Dot(a, b), 1.0, 1e-12);
}

TEST(EmbeddingTest, SingleBigramCosineFromHashedBuckets) {
  const HashedBigramEmbedder e;
  const auto [ba, sa] = RefBucket("aa", e.dim(), e.seed());
  const auto [bb, sb] = RefBucket("bb", e.dim(), e.seed());
  EXPECT_EQ(e.Bucket("aa"), std::make_pair(ba, sa));
  const double want = ba == bb ? static_cast<double>(sa * sb) : 0.0;
  EXPECT_EQ(Dot(e.Embed("aa"), e.Embed("bb")), want);
  const auto v = e.Embed("aa");
  EXPECT_EQ(v[ba], static_cast<double>(sa));
}

TEST(EmbeddingTest, MatchesReferenceAccumulation) {
  const HashedBigramEmbedder e(64, 99);
  Rng rng(1, "embed.ref");
  for (int trial = 0; trial < 200; ++trial) {
    const std::string text = RandomText(rng, 12);
    const auto scalars = SplitScalars(text);
    std::vector<double> ref(64, 0.0);
    for (size_t i = 0; i + 1 < scalars.size(); ++i) {
      const auto [b, s] = RefBucket(scalars[i] + scalars[i + 1], 64, 99);
      ref[b] += s;
    }
    double norm = 0.0;
    for (double x : ref) norm += x * x;
    if (norm == 0.0) continue;
    const auto got = e.Embed(text);
    for (size_t i = 0; i < 64; ++i) ASSERT_NEAR(got[i], ref[i] / std::sqrt(norm), 1e-15);
  }
}

TEST(EmbeddingTest, UnitNormIncludingDegenerateTexts) {
  Rng rng(2, "embed.norm");
  for (int trial = 0; trial < 1000; ++trial) {
    const auto v = EmbedText(RandomText(rng, 20));
    ASSERT_NEAR(std::sqrt(Dot(v, v)), 1.0, 1e-9);
  }
  EXPECT_EQ(EmbedText(""), EmbedText("x"));
  EXPECT_THROW(HashedBigramEmbedder(4), std::invalid_argument);
}

IndexParams Params(size_t dim, size_t partitions) {
  IndexParams p;
  p.dim = dim;
  p.partitions = partitions;
  return p;
}

TEST(VectorIndexTest, HandPlacedVectorsOrderedByCosine) {
  const double s = std::sqrt(0.5);
  const auto index = VectorIndex::FromVectors(
      {"x", "diag", "y"}, {{1, 0, 0}, {s, s, 0}, {0, 1, 0}}, Params(3, 1));
  // cos to (0.8, 0.6, 0): x 0.8, diag 0.9899, y 0.6
  const std::vector<double> q = {0.8, 0.6, 0.0};
  const auto hits = index.SearchExact(q, 3);
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_EQ(hits[0].product_id, "diag");
  EXPECT_EQ(hits[1].product_id, "x");
  EXPECT_EQ(hits[2].product_id, "y");
  EXPECT_NEAR(hits[0].similarity, 1.4 * s, 1e-15);
  EXPECT_EQ(index.SearchExact(q, 1).size(), 1u);
}

TEST(VectorIndexTest, TiesBreakById) {
  const auto index = VectorIndex::FromVectors({"b", "c", "a"}, {{1, 0}, {1, 0}, {1, 0}},
                                              Params(2, 1));
  const std::vector<double> q = {1, 0};
  const auto hits = index.SearchExact(q, 3);
  EXPECT_EQ(hits[0].product_id, "a");
  EXPECT_EQ(hits[1].product_id, "b");
  EXPECT_EQ(hits[2].product_id, "c");
}

TEST(VectorIndexTest, ExactSearchPropertiesOnRandomCorpus) {
  Rng rng(3, "index.exact");
  const auto products = RandomCorpus(rng, 300);
  const HashedBigramEmbedder e(64);
  const auto index = VectorIndex::Build(products, Params(64, 8), e);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = e.Embed(RandomText(rng, 10));
    const auto hits = index.SearchExact(q, 50);
    for (size_t i = 1; i < hits.size(); ++i) {
      ASSERT_GE(hits[i - 1].similarity, hits[i].similarity);
      if (hits[i - 1].similarity == hits[i].similarity) {
        ASSERT_LT(hits[i - 1].product_id, hits[i].product_id);
      }
    }
    ASSERT_EQ(index.SearchExact(q, 50), hits);
  }
  const auto all = index.SearchExact(e.Embed("abc"), 1000);
  EXPECT_EQ(all.size(), products.size());
}

TEST(VectorIndexTest, StoredVectorRanksFirst) {
  Rng rng(4, "index.self");
  auto products = RandomCorpus(rng, 100);
  products[42].title = "unique zebra title";
  const HashedBigramEmbedder e(128);
  const auto index = VectorIndex::Build(products, Params(128, 4), e);
  const auto hits = index.SearchExact(e.Embed("unique zebra title"), 5);
  EXPECT_EQ(hits[0].product_id, "p42");
  EXPECT_NEAR(hits[0].similarity, 1.0, 1e-12);
}

TEST(VectorIndexTest, PartitionsCoverCorpusExactlyOnce) {
  Rng rng(5, "index.cover");
  const auto products = RandomCorpus(rng, 10);
  const HashedBigramEmbedder e(32);
  const auto index = VectorIndex::Build(products, Params(32, 2), e);
  ASSERT_EQ(index.num_partitions(), 2u);
  std::multiset<uint32_t> seen;
  for (size_t p = 0; p < 2; ++p) seen.insert(index.members(p).begin(), index.members(p).end());
  EXPECT_EQ(seen.size(), 10u);
  for (uint32_t r = 0; r < 10; ++r) EXPECT_EQ(seen.count(r), 1u);
}

TEST(VectorIndexTest, BuildIsDeterministic) {
  Rng rng(6, "index.det");
  const auto products = RandomCorpus(rng, 200);
  const HashedBigramEmbedder e(64);
  const auto a = VectorIndex::Build(products, Params(64, 6), e);
  const auto b = VectorIndex::Build(products, Params(64, 6), e);
  EXPECT_EQ(a, b);
  for (size_t p = 0; p < a.num_partitions(); ++p) {
    const auto ca = a.centroid(p);
    const auto cb = b.centroid(p);
    EXPECT_TRUE(std::equal(ca.begin(), ca.end(), cb.begin()));
  }
}

TEST(VectorIndexTest, ApproxSearchContracts) {
  Rng rng(7, "index.approx");
  const auto products = RandomCorpus(rng, 400);
  const HashedBigramEmbedder e(64);
  const auto flat = VectorIndex::Build(products, Params(64, 1), e);
  const auto ivf = VectorIndex::Build(products, Params(64, 8), e);
  for (int trial = 0; trial < 30; ++trial) {
    const auto q = e.Embed(RandomText(rng, 10));
    EXPECT_EQ(flat.SearchApprox(q, 20, 1), flat.SearchExact(q, 20));
    EXPECT_EQ(ivf.SearchApprox(q, 20, 8), ivf.SearchExact(q, 20));

    const auto one = ivf.ProbedPartitions(q, 1);
    const auto two = ivf.ProbedPartitions(q, 2);
    EXPECT_EQ(one[0], two[0]);

    for (size_t probes : {1u, 3u}) {
      std::set<std::string> scanned;
      for (size_t p : ivf.ProbedPartitions(q, probes)) {
        for (uint32_t r : ivf.members(p)) scanned.insert(ivf.ids()[r]);
      }
      for (const auto& h : ivf.SearchApprox(q, 50, probes)) {
        ASSERT_TRUE(scanned.count(h.product_id)) << h.product_id;
      }
    }
    const double r1 = RecallAtK(ivf.SearchApprox(q, 20, 1), ivf.SearchExact(q, 20));
    const double r8 = RecallAtK(ivf.SearchApprox(q, 20, 8), ivf.SearchExact(q, 20));
    EXPECT_LE(r1, r8);
  }
  const auto q = e.Embed("abc");
  EXPECT_THROW(ivf.SearchApprox(q, 5, 0), std::invalid_argument);
  EXPECT_THROW(ivf.SearchApprox(q, 5, 9), std::invalid_argument);
  EXPECT_THROW(ivf.SearchApprox(std::vector<double>(3, 0.0), 5, 1), std::invalid_argument);
}

TEST(VectorIndexTest, SaveLoadReproducesSearches) {
  Rng rng(8, "index.io");
  const auto products = RandomCorpus(rng, 150);
  const HashedBigramEmbedder e(64);
  const auto index = VectorIndex::Build(products, Params(64, 5), e);
  const fs::path dir = fs::temp_directory_path() / "qsynth_retrieval_test";
  fs::create_directories(dir);
  const std::string path = (dir / "index.bin").string();
  index.Save(path);
  const auto back = VectorIndex::Load(path);
  EXPECT_EQ(back, index);
  for (int trial = 0; trial < 20; ++trial) {
    const auto q = e.Embed(RandomText(rng, 10));
    EXPECT_EQ(back.SearchApprox(q, 30, 2), index.SearchApprox(q, 30, 2));
  }

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto write = [&](const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
  };
  write(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(VectorIndex::Load(path), ValidationError);
  std::string bad = bytes;
  bad[0] = 'X';
  write(bad);
  EXPECT_THROW(VectorIndex::Load(path), ValidationError);
  bad = bytes;
  bad[8] = 7;  // version
  write(bad);
  EXPECT_THROW(VectorIndex::Load(path), ValidationError);
  EXPECT_THROW(VectorIndex::Load((dir / "missing.bin").string()), ValidationError);
  fs::remove_all(dir);
}

TEST(VectorIndexTest, RejectsBadInputs) {
  const HashedBigramEmbedder e(16);
  EXPECT_THROW(VectorIndex::Build({}, Params(16, 1), e), std::invalid_argument);
  const std::vector<Product> dup = {{"a", "x y", {}}, {"a", "z w", {}}};
  EXPECT_THROW(VectorIndex::Build(dup, Params(16, 1), e), std::invalid_argument);
  const std::vector<Product> ok = {{"a", "x y", {}}};
  EXPECT_THROW(VectorIndex::Build(ok, Params(32, 1), e), std::invalid_argument);
  EXPECT_EQ(VectorIndex::Build(ok, Params(16, 5), e).num_partitions(), 1u);
}

std::vector<CandidateHit> Hits(int from, int to) {
  std::vector<CandidateHit> out;
  for (int i = from; i < to; ++i) out.push_back({"p" + std::to_string(i), 0.0});
  return out;
}

TEST(RecallTest, Examples) {
  EXPECT_EQ(RecallAtK(Hits(0, 200), Hits(0, 200)), 1.0);
  EXPECT_EQ(RecallAtK(Hits(0, 200), Hits(200, 400)), 0.0);
  EXPECT_EQ(RecallAtK(Hits(50, 250), Hits(0, 200)), 0.75);
  EXPECT_EQ(RecallAtK(Hits(0, 0), Hits(0, 0)), 1.0);
}

}  // namespace
}  // namespace qsynth
