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

#include <atomic>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "qsynth/common/hash.h"
#include "qsynth/common/parallel.h"
#include "qsynth/common/random.h"
#include "qsynth/common/utf8.h"

namespace qsynth {
namespace {

TEST(HashTest, Fnv1aReferenceVectors) {
  EXPECT_EQ(Fnv1a64(""), kFnvOffsetBasis);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(Fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(RandomTest, SameSeedAndStreamReproduce) {
  Rng a(42, "stage", 3);
  Rng b(42, "stage", 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.NextU64(), b.NextU64());
}

TEST(RandomTest, StreamsAndIndicesAreSeparated) {
  EXPECT_NE(DeriveSeed(1, "a"), DeriveSeed(1, "b"));
  EXPECT_NE(DeriveSeed(1, "a", 0), DeriveSeed(1, "a", 1));
  EXPECT_NE(DeriveSeed(1, "a"), DeriveSeed(2, "a"));
}

TEST(RandomTest, UniformStaysInUnitInterval) {
  Rng rng(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.Uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(RandomTest, BelowIsRoughlyUniform) {
  Rng rng(11);
  std::vector<int> counts(6, 0);
  const int n = 60000;
  for (int i = 0; i < n; ++i) ++counts[rng.Below(6)];
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - n / 6.0) * (c - n / 6.0) / (n / 6.0);
  // 5 degrees of freedom, p = 0.001.
  EXPECT_LT(chi2, 20.52);
}

TEST(RandomTest, NormalMoments) {
  Rng rng(3);
  double sum = 0.0, sq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.Normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Utf8Test, DecodesMultiByteScalars) {
  EXPECT_EQ(DecodeUtf8("a\xc3\xa9\xe2\x82\xac\xf0\x9f\x98\x80"),
            (std::u32string{U'a', 0xE9, 0x20AC, 0x1F600}));
  EXPECT_EQ(SplitScalars("h\xc3\xa9").size(), 2u);
}

TEST(Utf8Test, MalformedBytesBecomeReplacement) {
  EXPECT_FALSE(IsValidUtf8("\xff"));
  EXPECT_FALSE(IsValidUtf8("\xc0\xaf"));      // overlong
  EXPECT_FALSE(IsValidUtf8("\xed\xa0\x80"));  // surrogate
  EXPECT_FALSE(IsValidUtf8("\xe2\x82"));      // truncated
  EXPECT_EQ(DecodeUtf8("a\xffz"), (std::u32string{U'a', 0xFFFD, U'z'}));
}

TEST(Utf8Test, RoundTripRandomScalars) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::u32string s;
    const size_t len = rng.Below(12);
    for (size_t i = 0; i < len; ++i) {
      char32_t cp;
      do {
        cp = static_cast<char32_t>(rng.Below(0x110000));
      } while (cp >= 0xD800 && cp <= 0xDFFF);
      s.push_back(cp);
    }
    const std::string bytes = EncodeUtf8(s);
    ASSERT_TRUE(IsValidUtf8(bytes));
    ASSERT_EQ(DecodeUtf8(bytes), s);
  }
}

TEST(Utf8Test, WhitespaceHelpers) {
  EXPECT_EQ(TrimWhitespace("  a b\t\n"), "a b");
  EXPECT_EQ(TrimWhitespace(" \t "), "");
  EXPECT_EQ(SplitWhitespace("  red   shoes\tsize 9 "),
            (std::vector<std::string>{"red", "shoes", "size", "9"}));
}

TEST(ParallelForTest, VisitsEveryIndexOnce) {
  std::vector<std::atomic<int>> hits(500);
  ParallelFor(hits.size(), 4, [&](size_t i) { hits[i].fetch_add(1); });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelForTest, PropagatesWorkerException) {
  EXPECT_THROW(ParallelFor(100, 3,
                           [](size_t i) {
                             if (i == 37) throw std::runtime_error("boom");
                           }),
               std::runtime_error);
}

}  // namespace
}  // namespace qsynth
