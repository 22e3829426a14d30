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

#include "qsynth/policy_training.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "qsynth/common/errors.h"
#include "qsynth/common/parallel.h"

namespace qsynth {

using nlohmann::json;

namespace {

constexpr std::string_view kFormatName = "qsynth.policy";

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double x : logits) z += std::exp(x - m);
  const double lse = m + std::log(z);
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p = LogSoftmax(logits);
  for (double& x : p) x = std::exp(x);
  return p;
}

// Sampling table for one context: log-probabilities and the running CDF.
struct RowSampler {
  std::vector<double> log_probs;
  std::vector<double> cdf;

  explicit RowSampler(std::span<const double> logits)
      : log_probs(LogSoftmax(logits)), cdf(log_probs.size()) {
    double acc = 0.0;
    for (size_t i = 0; i < log_probs.size(); ++i) {
      acc += std::exp(log_probs[i]);
      cdf[i] = acc;
    }
  }

  size_t Draw(Rng& rng) const {
    const double u = rng.Uniform() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    size_t i = it == cdf.end() ? cdf.size() - 1 : static_cast<size_t>(it - cdf.begin());
    // Never land on a zero-mass candidate through rounding at the boundary.
    while (i > 0 && cdf[i] == cdf[i - 1]) --i;
    return i;
  }
};

SampledResponse SampleFrom(const CategoricalRewritePolicy& policy,
                           const RowSampler& sampler, const Query& query,
                           size_t k, Rng& rng) {
  SampledResponse out;
  out.list.source_query_id = query.id;
  out.draws.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    const size_t c = sampler.Draw(rng);
    out.draws.push_back(c);
    out.list.rewrites.push_back(Rewrite{policy.candidates()[c]});
    out.log_prob += sampler.log_probs[c];
  }
  return out;
}

std::vector<size_t> ResolveDraws(const CategoricalRewritePolicy& policy,
                                 const RewriteList& rewrites) {
  std::vector<size_t> draws;
  draws.reserve(rewrites.k());
  for (const Rewrite& r : rewrites.rewrites) {
    auto idx = policy.CandidateIndex(r.text);
    if (!idx) {
      throw std::invalid_argument("rewrite \"" + r.text +
                                  "\" is not in the candidate vocabulary");
    }
    draws.push_back(*idx);
  }
  return draws;
}

double KlDivergence(std::span<const double> log_p, std::span<const double> log_r) {
  double kl = 0.0;
  for (size_t j = 0; j < log_p.size(); ++j) {
    kl += std::exp(log_p[j]) * (log_p[j] - log_r[j]);
  }
  return kl;
}

bool UseKl(const TrainConfig& cfg, const CategoricalRewritePolicy* reference) {
  return cfg.kl_coef != 0.0 && reference != nullptr;
}

}  // namespace

CategoricalRewritePolicy::CategoricalRewritePolicy(
    std::vector<std::string> candidates, std::vector<double> default_logits)
    : candidates_(std::move(candidates)), default_logits_(std::move(default_logits)) {
  if (candidates_.empty()) {
    throw std::invalid_argument("policy needs at least one candidate");
  }
  if (default_logits_.empty()) default_logits_.assign(candidates_.size(), 0.0);
  CheckRow(default_logits_);
  Reindex();
}

void CategoricalRewritePolicy::Reindex() {
  index_.clear();
  for (size_t i = 0; i < candidates_.size(); ++i) {
    if (!index_.emplace(candidates_[i], i).second) {
      throw std::invalid_argument("duplicate candidate \"" + candidates_[i] + "\"");
    }
  }
}

void CategoricalRewritePolicy::CheckRow(std::span<const double> row) const {
  if (row.size() != candidates_.size()) {
    throw std::invalid_argument("logit row size does not match the vocabulary");
  }
  for (double x : row) {
    if (!std::isfinite(x)) throw std::invalid_argument("logits must be finite");
  }
}

std::optional<size_t> CategoricalRewritePolicy::CandidateIndex(
    std::string_view text) const {
  auto it = index_.find(std::string(text));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool CategoricalRewritePolicy::HasContext(std::string_view context) const {
  return rows_.find(context) != rows_.end();
}

std::span<const double> CategoricalRewritePolicy::Logits(
    std::string_view context) const {
  auto it = rows_.find(context);
  return it == rows_.end() ? std::span<const double>(default_logits_)
                           : std::span<const double>(it->second);
}

std::span<double> CategoricalRewritePolicy::MutableLogits(std::string_view context) {
  auto it = rows_.find(context);
  if (it == rows_.end()) {
    it = rows_.emplace(std::string(context), default_logits_).first;
  }
  return it->second;
}

void CategoricalRewritePolicy::SetLogits(std::string_view context,
                                         std::vector<double> logits) {
  CheckRow(logits);
  rows_.insert_or_assign(std::string(context), std::move(logits));
}

std::vector<double> CategoricalRewritePolicy::Probabilities(
    std::string_view context) const {
  return Softmax(Logits(context));
}

std::vector<double> CategoricalRewritePolicy::LogProbabilities(
    std::string_view context) const {
  return LogSoftmax(Logits(context));
}

std::vector<size_t> CategoricalRewritePolicy::TopCandidates(
    std::string_view context, size_t k) const {
  std::span<const double> row = Logits(context);
  std::vector<size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<ptrdiff_t>(k),
                    order.end(), [&](size_t a, size_t b) {
                      return row[a] != row[b] ? row[a] > row[b] : a < b;
                    });
  order.resize(k);
  return order;
}

json CategoricalRewritePolicy::ToJson() const {
  json contexts = json::object();
  for (const auto& [ctx, row] : rows_) contexts[ctx] = row;
  return json{{"format", kFormatName},
              {"version", kFormatVersion},
              {"candidates", candidates_},
              {"default_logits", default_logits_},
              {"contexts", contexts}};
}

CategoricalRewritePolicy CategoricalRewritePolicy::FromJson(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      throw ValidationError("not a policy artifact");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw ValidationError("unsupported policy version " + j.at("version").dump());
    }
    CategoricalRewritePolicy policy(
        j.at("candidates").get<std::vector<std::string>>(),
        j.at("default_logits").get<std::vector<double>>());
    for (const auto& [ctx, row] : j.at("contexts").items()) {
      policy.SetLogits(ctx, row.get<std::vector<double>>());
    }
    return policy;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed policy: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("invalid policy: ") + e.what());
  }
}

void CategoricalRewritePolicy::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToJson().dump() << '\n';
}

CategoricalRewritePolicy CategoricalRewritePolicy::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": invalid JSON: " + e.what());
  }
  return FromJson(j);
}

CategoricalRewritePolicy BuildPriorPolicy(
    const std::vector<std::pair<std::string, std::vector<std::string>>>&
        candidates_by_query,
    double masked_logit) {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, size_t> seen;
  for (const auto& [qid, cands] : candidates_by_query) {
    for (const std::string& c : cands) {
      if (seen.emplace(c, vocab.size()).second) vocab.push_back(c);
    }
  }
  CategoricalRewritePolicy policy(vocab);
  for (const auto& [qid, cands] : candidates_by_query) {
    std::vector<double> row(vocab.size(), masked_logit);
    for (const std::string& c : cands) row[seen.at(c)] = 0.0;
    policy.SetLogits(qid, std::move(row));
  }
  return policy;
}

std::vector<std::pair<std::string, std::vector<std::string>>> ReadCandidatesJsonl(
    const std::string& path) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  ForEachJsonLine(path, [&](const json& j, size_t) {
    if (!j.is_object() || !j.contains("query_id") || !j.contains("candidates")) {
      throw ValidationError("candidate records need query_id and candidates");
    }
    auto cands = j.at("candidates").get<std::vector<std::string>>();
    if (cands.empty()) throw ValidationError("empty candidate list");
    out.emplace_back(j.at("query_id").get<std::string>(), std::move(cands));
  });
  return out;
}

void TrainConfig::Validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw std::invalid_argument("step_size must be positive");
  }
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (!std::isfinite(format_penalty) || !std::isfinite(kl_coef) || kl_coef < 0.0) {
    throw std::invalid_argument("format_penalty and kl_coef must be finite, kl_coef >= 0");
  }
}

SampledResponse SampleResponse(const CategoricalRewritePolicy& policy,
                               const Query& query, size_t k, Rng& rng) {
  const RowSampler sampler(policy.Logits(query.id));
  return SampleFrom(policy, sampler, query, k, rng);
}

double ResponseLogProb(const CategoricalRewritePolicy& policy,
                       const Query& query, const RewriteList& rewrites) {
  const std::vector<size_t> draws = ResolveDraws(policy, rewrites);
  const std::vector<double> lp = policy.LogProbabilities(query.id);
  double sum = 0.0;
  for (size_t c : draws) sum += lp[c];
  return sum;
}

std::vector<double> ComputeAdvantages(std::span<const double> rewards,
                                      bool normalize) {
  std::vector<double> adv(rewards.begin(), rewards.end());
  if (!normalize || adv.empty()) return adv;
  const double n = static_cast<double>(adv.size());
  double mean = 0.0;
  for (double r : adv) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : adv) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  if (sd < kAdvantageEpsilon) {
    std::fill(adv.begin(), adv.end(), 0.0);
    return adv;
  }
  for (double& a : adv) a = (a - mean) / sd;
  return adv;
}

double PolicyGradient::Norm() const {
  double sq = 0.0;
  for (const auto& [ctx, row] : rows) {
    for (double g : row) sq += g * g;
  }
  return std::sqrt(sq);
}

namespace {

std::vector<double> BatchRewards(std::span<const BatchEntry> batch) {
  std::vector<double> r;
  r.reserve(batch.size());
  for (const BatchEntry& e : batch) r.push_back(e.reward);
  return r;
}

}  // namespace

double PolicyLoss(const CategoricalRewritePolicy& policy,
                  std::span<const BatchEntry> batch, const TrainConfig& cfg,
                  const CategoricalRewritePolicy* reference) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::vector<double> adv =
      ComputeAdvantages(BatchRewards(batch), cfg.normalize_advantage);
  const bool kl = UseKl(cfg, reference);
  std::map<std::string, std::vector<double>, std::less<>> log_probs;
  double loss = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const BatchEntry& e = batch[i];
    auto it = log_probs.find(e.query.id);
    if (it == log_probs.end()) {
      it = log_probs.emplace(e.query.id, policy.LogProbabilities(e.query.id)).first;
    }
    double lp = 0.0;
    for (size_t c : ResolveDraws(policy, e.rewrites)) lp += it->second[c];
    loss -= adv[i] * lp;
    if (kl) {
      loss += cfg.kl_coef *
              KlDivergence(it->second, reference->LogProbabilities(e.query.id));
    }
  }
  return loss / static_cast<double>(batch.size());
}

PolicyGradient PolicyLossGradient(const CategoricalRewritePolicy& policy,
                                  std::span<const BatchEntry> batch,
                                  const TrainConfig& cfg,
                                  const CategoricalRewritePolicy* reference) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  const std::vector<double> adv =
      ComputeAdvantages(BatchRewards(batch), cfg.normalize_advantage);
  const bool kl = UseKl(cfg, reference);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const size_t m = policy.num_candidates();

  PolicyGradient grad;
  std::map<std::string, std::vector<double>, std::less<>> probs;
  std::vector<double> counts(m);
  for (size_t i = 0; i < batch.size(); ++i) {
    const BatchEntry& e = batch[i];
    const std::vector<size_t> draws = ResolveDraws(policy, e.rewrites);
    auto pit = probs.find(e.query.id);
    if (pit == probs.end()) {
      pit = probs.emplace(e.query.id, policy.Probabilities(e.query.id)).first;
    }
    const std::vector<double>& p = pit->second;
    auto git = grad.rows.find(e.query.id);
    if (git == grad.rows.end()) {
      git = grad.rows.emplace(e.query.id, std::vector<double>(m, 0.0)).first;
    }
    std::vector<double>& g = git->second;

    // d(-A log p)/d logit_j = -A * (count_j - k * softmax_j)
    if (adv[i] != 0.0) {
      std::fill(counts.begin(), counts.end(), 0.0);
      for (size_t c : draws) counts[c] += 1.0;
      const double scale = -adv[i] * inv_n;
      const double k = static_cast<double>(draws.size());
      for (size_t j = 0; j < m; ++j) g[j] += scale * (counts[j] - k * p[j]);
    }
    if (kl) {
      // dKL/d logit_j = p_j * ((log p_j - log r_j) - KL)
      const std::vector<double> lp = policy.LogProbabilities(e.query.id);
      const std::vector<double> lr = reference->LogProbabilities(e.query.id);
      const double div = KlDivergence(lp, lr);
      const double scale = cfg.kl_coef * inv_n;
      for (size_t j = 0; j < m; ++j) g[j] += scale * p[j] * ((lp[j] - lr[j]) - div);
    }
  }
  return grad;
}

double ReinforceUpdate(CategoricalRewritePolicy& policy,
                       std::span<const BatchEntry> batch, const TrainConfig& cfg,
                       const CategoricalRewritePolicy* reference) {
  const PolicyGradient grad = PolicyLossGradient(policy, batch, cfg, reference);
  for (const auto& [ctx, g] : grad.rows) {
    std::span<double> row = policy.MutableLogits(ctx);
    for (size_t j = 0; j < g.size(); ++j) row[j] -= cfg.step_size * g[j];
  }
  return grad.Norm();
}

double GradCheck(const CategoricalRewritePolicy& policy,
                 std::span<const BatchEntry> batch, const TrainConfig& cfg,
                 double h, const CategoricalRewritePolicy* reference) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  const PolicyGradient analytic = PolicyLossGradient(policy, batch, cfg, reference);
  CategoricalRewritePolicy probe = policy;
  double max_err = 0.0;
  for (const auto& [ctx, g] : analytic.rows) {
    for (size_t j = 0; j < g.size(); ++j) {
      std::span<double> row = probe.MutableLogits(ctx);
      const double saved = row[j];
      row[j] = saved + h;
      const double up = PolicyLoss(probe, batch, cfg, reference);
      row = probe.MutableLogits(ctx);
      row[j] = saved - h;
      const double down = PolicyLoss(probe, batch, cfg, reference);
      probe.MutableLogits(ctx)[j] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max(std::abs(g[j]), std::abs(numeric));
      if (denom < kGradCheckNoiseFloor) continue;
      max_err = std::max(max_err, std::abs(g[j] - numeric) / denom);
    }
  }
  return max_err;
}

std::string TrainStats::ToCsv() const {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,mean_total,mean_qsr,mean_pda,mean_div,grad_norm\n";
  for (const IterationStats& s : iterations) {
    out << s.iteration << ',' << s.mean_total << ',' << s.mean_qsr << ','
        << s.mean_pda << ',' << s.mean_diversity << ',' << s.grad_norm << '\n';
  }
  return out.str();
}

void TrainStats::WriteCsv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToCsv();
}

TrainStats Train(CategoricalRewritePolicy& policy, std::span<const Query> queries,
                 const RewardFn& reward_fn, const TrainConfig& cfg) {
  cfg.Validate();
  TrainStats stats;
  if (queries.empty()) return stats;
  std::optional<CategoricalRewritePolicy> reference;
  if (cfg.kl_coef != 0.0) reference = policy;

  const size_t nq = queries.size();
  const size_t group = cfg.group_size;
  std::vector<BatchEntry> batch(nq * group);
  std::vector<RewardBreakdown> breakdowns(nq * group);

  for (size_t it = 0; it < cfg.iterations; ++it) {
    ParallelFor(nq, cfg.jobs, [&](size_t qi) {
      const Query& q = queries[qi];
      const RowSampler sampler(policy.Logits(q.id));
      for (size_t g = 0; g < group; ++g) {
        const size_t slot = qi * group + g;
        Rng rng(cfg.seed, "train.sample", (it * nq + qi) * group + g);
        SampledResponse s = SampleFrom(policy, sampler, q, cfg.k, rng);
        const RewardBreakdown b = reward_fn(q, s.list);
        BatchEntry& e = batch[slot];
        e.query = q;
        e.rewrites = std::move(s.list);
        e.reward = b.format_ok ? b.total : -cfg.format_penalty;
        breakdowns[slot] = b;
      }
    });

    IterationStats row;
    row.iteration = it;
    const double n = static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      row.mean_total += batch[i].reward;
      row.mean_qsr += breakdowns[i].qsr;
      row.mean_pda += breakdowns[i].pda;
      row.mean_diversity += breakdowns[i].diversity;
    }
    row.mean_total /= n;
    row.mean_qsr /= n;
    row.mean_pda /= n;
    row.mean_diversity /= n;
    row.grad_norm =
        ReinforceUpdate(policy, batch, cfg, reference ? &*reference : nullptr);
    stats.iterations.push_back(row);
  }
  return stats;
}

}  // namespace qsynth
