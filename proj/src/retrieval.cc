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

#include "qsynth/retrieval.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "qsynth/common/errors.h"
#include "qsynth/common/hash.h"
#include "qsynth/common/random.h"
#include "qsynth/common/utf8.h"

namespace qsynth {

static_assert(std::endian::native == std::endian::little,
              "index artifacts are written in host order and assume little-endian");

HashedBigramEmbedder::HashedBigramEmbedder(size_t dim, uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim < 8) throw std::invalid_argument("embedding dim must be >= 8");
}

std::pair<size_t, int> HashedBigramEmbedder::Bucket(std::string_view feature) const {
  const uint64_t h = Fnv1a64(feature, Mix64(seed_));
  return {static_cast<size_t>(h % dim_), (h >> 63) ? -1 : 1};
}

Embedding HashedBigramEmbedder::Embed(std::string_view text) const {
  Embedding v(dim_, 0.0);
  const std::u32string s = DecodeUtf8(text);
  std::string feature;
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    feature.clear();
    AppendUtf8(feature, s[i]);
    AppendUtf8(feature, s[i + 1]);
    const auto [bucket, sign] = Bucket(feature);
    v[bucket] += sign;
  }
  double norm = std::sqrt(Dot(v, v));
  if (norm == 0.0) {
    // No bigrams, or every bigram cancelled out in its bucket.
    std::fill(v.begin(), v.end(), 0.0);
    const auto [bucket, sign] = Bucket(kUnkFeature);
    v[bucket] = sign;
    norm = 1.0;
  }
  for (double& x : v) x /= norm;
  return v;
}

Embedding EmbedText(std::string_view text, size_t dim) {
  return HashedBigramEmbedder(dim).Embed(text);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

VectorIndex VectorIndex::Build(std::span<const Product> products,
                               const IndexParams& params, const Embedder& embedder) {
  if (products.empty()) throw std::invalid_argument("cannot index an empty corpus");
  if (embedder.dim() != params.dim) {
    throw std::invalid_argument("embedder dim does not match index dim");
  }
  std::vector<std::string> ids;
  std::vector<Embedding> vectors;
  ids.reserve(products.size());
  vectors.reserve(products.size());
  for (const Product& p : products) {
    ids.push_back(p.id);
    vectors.push_back(embedder.Embed(p.title));
  }
  return FromVectors(std::move(ids), std::move(vectors), params);
}

VectorIndex VectorIndex::FromVectors(std::vector<std::string> ids,
                                     std::vector<Embedding> vectors,
                                     const IndexParams& params) {
  if (ids.empty()) throw std::invalid_argument("cannot index an empty corpus");
  if (ids.size() != vectors.size()) {
    throw std::invalid_argument("ids and vectors differ in length");
  }
  if (params.partitions < 1) throw std::invalid_argument("partitions must be >= 1");
  std::unordered_set<std::string> seen;
  for (const std::string& id : ids) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument("duplicate product id \"" + id + "\"");
    }
  }
  VectorIndex index;
  index.dim_ = params.dim;
  index.ids_ = std::move(ids);
  index.matrix_.reserve(index.ids_.size() * index.dim_);
  for (const Embedding& v : vectors) {
    if (v.size() != index.dim_) throw std::invalid_argument("vector dim mismatch");
    index.matrix_.insert(index.matrix_.end(), v.begin(), v.end());
  }
  index.BuildPartitions(std::min(params.partitions, index.ids_.size()),
                        params.kmeans_iterations, params.seed);
  return index;
}

namespace {

// Nonzero coordinates of a row, used to speed up k-means on hashed features.
struct SparseRow {
  std::vector<uint32_t> idx;
  std::vector<double> val;
};

double SparseDot(const SparseRow& r, std::span<const double> dense) {
  double s = 0.0;
  for (size_t i = 0; i < r.idx.size(); ++i) s += r.val[i] * dense[r.idx[i]];
  return s;
}

}  // namespace

void VectorIndex::BuildPartitions(size_t partitions, size_t iterations,
                                  uint64_t seed) {
  const size_t n = ids_.size();
  members_.assign(partitions, {});
  if (partitions == 1) {
    centroids_.assign(dim_, 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t d = 0; d < dim_; ++d) centroids_[d] += matrix_[i * dim_ + d];
    }
    const double norm = std::sqrt(Dot(centroids_, centroids_));
    if (norm > 0.0) {
      for (double& x : centroids_) x /= norm;
    }
    members_[0].resize(n);
    std::iota(members_[0].begin(), members_[0].end(), 0u);
    return;
  }

  std::vector<SparseRow> rows(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t d = 0; d < dim_; ++d) {
      const double x = matrix_[i * dim_ + d];
      if (x != 0.0) {
        rows[i].idx.push_back(static_cast<uint32_t>(d));
        rows[i].val.push_back(x);
      }
    }
  }

  // k-means++ seeding on cosine distance.
  Rng rng(seed, "index.kmeans");
  centroids_.assign(partitions * dim_, 0.0);
  std::vector<double> best_sim(n, -2.0);
  auto add_center = [&](size_t c, size_t point) {
    std::copy_n(matrix_.begin() + static_cast<ptrdiff_t>(point * dim_), dim_,
                centroids_.begin() + static_cast<ptrdiff_t>(c * dim_));
    std::span<const double> cen = centroid(c);
    for (size_t i = 0; i < n; ++i) best_sim[i] = std::max(best_sim[i], SparseDot(rows[i], cen));
  };
  add_center(0, rng.Below(n));
  for (size_t c = 1; c < partitions; ++c) {
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += std::max(0.0, 1.0 - best_sim[i]);
    size_t pick = 0;
    if (total <= 0.0) {
      pick = rng.Below(n);
    } else {
      double u = rng.Uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        u -= std::max(0.0, 1.0 - best_sim[pick]);
        if (u < 0.0) break;
      }
    }
    add_center(c, pick);
  }

  std::vector<uint32_t> assign(n, UINT32_MAX);
  for (size_t iter = 0; iter < std::max<size_t>(1, iterations); ++iter) {
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      uint32_t best = 0;
      double best_s = -std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < partitions; ++c) {
        const double s = SparseDot(rows[i], centroid(c));
        if (s > best_s) best_s = s, best = static_cast<uint32_t>(c);
      }
      if (assign[i] != best) assign[i] = best, changed = true;
    }
    if (!changed || iter + 1 == iterations) break;
    std::vector<double> sums(partitions * dim_, 0.0);
    std::vector<size_t> sizes(partitions, 0);
    for (size_t i = 0; i < n; ++i) {
      double* dst = sums.data() + assign[i] * dim_;
      for (size_t t = 0; t < rows[i].idx.size(); ++t) dst[rows[i].idx[t]] += rows[i].val[t];
      ++sizes[assign[i]];
    }
    for (size_t c = 0; c < partitions; ++c) {
      if (sizes[c] == 0) continue;  // keep the previous centroid
      std::span<double> s(sums.data() + c * dim_, dim_);
      const double norm = std::sqrt(Dot(s, s));
      if (norm == 0.0) continue;
      for (size_t d = 0; d < dim_; ++d) centroids_[c * dim_ + d] = s[d] / norm;
    }
  }
  for (size_t i = 0; i < n; ++i) members_[assign[i]].push_back(static_cast<uint32_t>(i));
}

std::span<const double> VectorIndex::vector(size_t i) const {
  return {matrix_.data() + i * dim_, dim_};
}

std::span<const double> VectorIndex::centroid(size_t p) const {
  return {centroids_.data() + p * dim_, dim_};
}

std::vector<CandidateHit> VectorIndex::TopK(std::span<const double> query, size_t k,
                                            std::span<const uint32_t> candidates) const {
  if (query.size() != dim_) throw std::invalid_argument("query dim mismatch");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  struct Scored {
    double sim;
    uint32_t row;
  };
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (uint32_t r : candidates) scored.push_back({Dot(vector(r), query), r});
  auto better = [&](const Scored& a, const Scored& b) {
    if (a.sim != b.sim) return a.sim > b.sim;
    return ids_[a.row] < ids_[b.row];
  };
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<ptrdiff_t>(k),
                    scored.end(), better);
  std::vector<CandidateHit> hits;
  hits.reserve(k);
  for (size_t i = 0; i < k; ++i) hits.push_back({ids_[scored[i].row], scored[i].sim});
  return hits;
}

std::vector<CandidateHit> VectorIndex::SearchExact(std::span<const double> query,
                                                   size_t k) const {
  std::vector<uint32_t> all(ids_.size());
  std::iota(all.begin(), all.end(), 0u);
  return TopK(query, k, all);
}

std::vector<size_t> VectorIndex::ProbedPartitions(std::span<const double> query,
                                                  size_t probes) const {
  if (probes < 1 || probes > num_partitions()) {
    throw std::invalid_argument("probes must be in [1, partitions]");
  }
  if (query.size() != dim_) throw std::invalid_argument("query dim mismatch");
  std::vector<std::pair<double, size_t>> sims;
  sims.reserve(num_partitions());
  for (size_t p = 0; p < num_partitions(); ++p) sims.emplace_back(Dot(centroid(p), query), p);
  std::partial_sort(sims.begin(), sims.begin() + static_cast<ptrdiff_t>(probes),
                    sims.end(), [](const auto& a, const auto& b) {
                      return a.first != b.first ? a.first > b.first : a.second < b.second;
                    });
  std::vector<size_t> out;
  out.reserve(probes);
  for (size_t i = 0; i < probes; ++i) out.push_back(sims[i].second);
  return out;
}

std::vector<CandidateHit> VectorIndex::SearchApprox(std::span<const double> query,
                                                    size_t k, size_t probes) const {
  std::vector<uint32_t> pool;
  for (size_t p : ProbedPartitions(query, probes)) {
    pool.insert(pool.end(), members_[p].begin(), members_[p].end());
  }
  if (pool.empty()) return {};
  return TopK(query, k, pool);
}

namespace {

constexpr char kMagic[8] = {'Q', 'S', 'Y', 'N', 'I', 'D', 'X', '\0'};

template <typename T>
void Put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("truncated index artifact");
  return v;
}

void PutDoubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> GetDoubles(std::istream& in, size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ValidationError("truncated index artifact");
  return v;
}

}  // namespace

void VectorIndex::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kFormatVersion);
  Put<uint64_t>(out, dim_);
  Put<uint64_t>(out, ids_.size());
  Put<uint64_t>(out, members_.size());
  for (const std::string& id : ids_) {
    Put<uint32_t>(out, static_cast<uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  PutDoubles(out, matrix_);
  PutDoubles(out, centroids_);
  for (const auto& m : members_) {
    Put<uint64_t>(out, m.size());
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(uint32_t)));
  }
  if (!out) throw std::runtime_error("write failed for " + path);
}

VectorIndex VectorIndex::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError(path + " is not an index artifact");
  }
  const auto version = Get<uint32_t>(in);
  if (version != kFormatVersion) {
    throw ValidationError("unsupported index version " + std::to_string(version));
  }
  VectorIndex index;
  index.dim_ = Get<uint64_t>(in);
  const auto n = Get<uint64_t>(in);
  const auto p = Get<uint64_t>(in);
  if (index.dim_ == 0 || n == 0 || p == 0 || p > n) {
    throw ValidationError("corrupt index header");
  }
  index.ids_.reserve(n);
  for (uint64_t i = 0; i < n; ++i) {
    std::string id(Get<uint32_t>(in), '\0');
    in.read(id.data(), static_cast<std::streamsize>(id.size()));
    if (!in) throw ValidationError("truncated index artifact");
    index.ids_.push_back(std::move(id));
  }
  index.matrix_ = GetDoubles(in, n * index.dim_);
  index.centroids_ = GetDoubles(in, p * index.dim_);
  index.members_.resize(p);
  size_t covered = 0;
  for (auto& m : index.members_) {
    m.resize(Get<uint64_t>(in));
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(uint32_t)));
    if (!in) throw ValidationError("truncated index artifact");
    for (uint32_t r : m) {
      if (r >= n) throw ValidationError("corrupt partition member");
    }
    covered += m.size();
  }
  if (covered != n) throw ValidationError("partitions do not cover the corpus");
  return index;
}

double RecallAtK(std::span<const CandidateHit> approx,
                 std::span<const CandidateHit> exact) {
  if (exact.empty()) return 1.0;
  std::unordered_set<std::string> truth;
  for (const CandidateHit& h : exact) truth.insert(h.product_id);
  size_t found = 0;
  std::unordered_set<std::string> counted;
  for (const CandidateHit& h : approx) {
    if (truth.count(h.product_id) && counted.insert(h.product_id).second) ++found;
  }
  return static_cast<double>(found) / static_cast<double>(truth.size());
}

}  // namespace qsynth
