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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsynth/domain.h"

namespace qsynth {

// Unit-norm dense vector.
using Embedding = std::vector<double>;

inline constexpr size_t kDefaultEmbeddingDim = 256;
inline constexpr size_t kDefaultTopK = 200;

// Text encoder. Implementations must return unit vectors of dim() entries.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding Embed(std::string_view text) const = 0;
  virtual size_t dim() const = 0;
};

// Signed feature hashing of character bigrams: each bigram's UTF-8 bytes are
// hashed with seeded FNV-1a, the low bits pick a bucket and the top bit a
// sign, and the accumulated vector is L2-normalized. Texts with no bigram
// embed the reserved UNK feature instead.
class HashedBigramEmbedder final : public Embedder {
 public:
  static constexpr uint64_t kDefaultSeed = 0x71736e7468ULL;
  static constexpr std::string_view kUnkFeature = "\x01<unk>";

  explicit HashedBigramEmbedder(size_t dim = kDefaultEmbeddingDim,
                                uint64_t seed = kDefaultSeed);

  Embedding Embed(std::string_view text) const override;
  size_t dim() const override { return dim_; }
  uint64_t seed() const { return seed_; }

  // Bucket and sign (+1/-1) a feature string hashes to.
  std::pair<size_t, int> Bucket(std::string_view feature) const;

 private:
  size_t dim_;
  uint64_t seed_;
};

// Convenience wrapper over HashedBigramEmbedder with the default seed.
Embedding EmbedText(std::string_view text, size_t dim = kDefaultEmbeddingDim);

double Dot(std::span<const double> a, std::span<const double> b);

struct CandidateHit {
  std::string product_id;
  double similarity = 0.0;

  bool operator==(const CandidateHit&) const = default;
};

struct IndexParams {
  size_t dim = kDefaultEmbeddingDim;
  size_t partitions = 1;
  size_t kmeans_iterations = 25;
  uint64_t seed = 0;
};

// Flat vector store with an optional inverted-file partitioning built by
// spherical k-means. Immutable after construction; concurrent searches are
// safe.
class VectorIndex {
 public:
  static constexpr int kFormatVersion = 1;

  // Embeds every title. Throws std::invalid_argument on an empty corpus or a
  // duplicate product id.
  static VectorIndex Build(std::span<const Product> products,
                           const IndexParams& params, const Embedder& embedder);

  // Indexes caller-supplied unit vectors.
  static VectorIndex FromVectors(std::vector<std::string> ids,
                                 std::vector<Embedding> vectors,
                                 const IndexParams& params);

  // Exact top-k by cosine over all vectors. Hits are sorted by similarity
  // descending, ties by product id ascending.
  std::vector<CandidateHit> SearchExact(std::span<const double> query,
                                        size_t k) const;

  // Exact search restricted to the `probes` partitions whose centroids are
  // most similar to the query. Requires 1 <= probes <= num_partitions().
  std::vector<CandidateHit> SearchApprox(std::span<const double> query, size_t k,
                                         size_t probes) const;

  // Partition ids SearchApprox scans, best centroid first.
  std::vector<size_t> ProbedPartitions(std::span<const double> query,
                                       size_t probes) const;

  size_t size() const { return ids_.size(); }
  size_t dim() const { return dim_; }
  size_t num_partitions() const { return members_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(size_t i) const;
  std::span<const double> centroid(size_t p) const;
  const std::vector<uint32_t>& members(size_t p) const { return members_[p]; }

  // Versioned little-endian binary artifact.
  void Save(const std::string& path) const;
  static VectorIndex Load(const std::string& path);

  bool operator==(const VectorIndex&) const = default;

 private:
  VectorIndex() = default;
  void BuildPartitions(size_t partitions, size_t iterations, uint64_t seed);
  std::vector<CandidateHit> TopK(std::span<const double> query, size_t k,
                                 std::span<const uint32_t> candidates) const;

  size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> matrix_;     // size() x dim_, row-major
  std::vector<double> centroids_;  // num_partitions() x dim_
  std::vector<std::vector<uint32_t>> members_;
};

// |approx ∩ exact| / |exact| by product id; 1.0 when exact is empty.
double RecallAtK(std::span<const CandidateHit> approx,
                 std::span<const CandidateHit> exact);

}  // namespace qsynth
