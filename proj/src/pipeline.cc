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

#include "qsynth/pipeline.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <unordered_set>

#include "qsynth/common/errors.h"
#include "qsynth/common/parallel.h"
#include "qsynth/common/random.h"

namespace qsynth {

namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::string& where, const std::set<std::string>& keys) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) {
      throw ValidationError("unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string Resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty() || base_dir.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

}  // namespace

void PipelineConfig::Validate() const {
  if (min_k < 1) throw ValidationError("min_k must be >= 1");
  if (top_k < 1) throw ValidationError("top_k must be >= 1");
  if (!(business_threshold >= 0.0 && business_threshold <= 1.0)) {
    throw ValidationError("business_threshold must be in [0, 1]");
  }
  if (jobs < 1) throw ValidationError("jobs must be >= 1");
  thresholds.Validate();
  if (generator.k < 1) throw ValidationError("generator.k must be >= 1");
  auto check_binding = [&](const ScorerBinding& b, const std::string& name) {
    b.Validate();
    if (b.kind == ScorerKind::kRemote && !b.prompt_template_id.empty() &&
        !prompt_templates.count(b.prompt_template_id)) {
      throw ValidationError(name + " names unknown prompt template \"" +
                            b.prompt_template_id + "\"");
    }
  };
  if (generator.kind == GeneratorKind::kRemote) {
    check_binding(generator.binding, "generator.binding");
    if (generator.binding.kind != ScorerKind::kRemote) {
      throw ValidationError("remote generator needs a remote binding");
    }
  }
  check_binding(rewrite_filter, "rewrite_filter");
  check_binding(business, "business");
  check_binding(general_filter, "general_filter");
  check_binding(training.qsr, "training.qsr");
  if (index.dim < 8) throw ValidationError("index.dim must be >= 8");
  if (index.partitions < 1) throw ValidationError("index.partitions must be >= 1");
  if (index.probes < 1 || index.probes > index.partitions) {
    throw ValidationError("index.probes must be in [1, index.partitions]");
  }
  try {
    training.train.Validate();
    training.weights.Validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(std::string("training: ") + e.what());
  }
  if (training.lm_order < 1) throw ValidationError("training.lm.order must be >= 1");
  if (!(training.lm_delta > 0.0)) throw ValidationError("training.lm.delta must be > 0");
}

json PipelineConfig::ToJson() const {
  json j;
  j["min_k"] = min_k;
  j["top_k"] = top_k;
  j["business_threshold"] = business_threshold;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["on_remote_error"] = on_remote_error == OnRemoteError::kFail ? "fail" : "drop";
  j["label_thresholds"] = {{"relevant", thresholds.relevant},
                           {"partial", thresholds.partial}};
  json gen;
  gen["kind"] = generator.kind == GeneratorKind::kRemote ? "remote" : "policy";
  if (!generator.policy.empty()) gen["policy"] = generator.policy;
  gen["mode"] = generator.mode == DecodeMode::kSample ? "sample" : "greedy";
  gen["k"] = generator.k;
  gen["binding"] = generator.binding.ToJson();
  j["generator"] = gen;
  j["rewrite_filter"] = rewrite_filter.ToJson();
  j["business"] = business.ToJson();
  j["general_filter"] = general_filter.ToJson();
  j["index"] = {{"dim", index.dim},
                {"partitions", index.partitions},
                {"probes", index.probes},
                {"kmeans_iterations", index.kmeans_iterations},
                {"seed", index.seed}};
  const TrainConfig& t = training.train;
  json tr = {{"step_size", t.step_size},
             {"group_size", t.group_size},
             {"iterations", t.iterations},
             {"k", t.k},
             {"normalize_advantage", t.normalize_advantage},
             {"format_penalty", t.format_penalty},
             {"kl_coef", t.kl_coef},
             {"alpha", training.weights.alpha},
             {"beta", training.weights.beta},
             {"gamma", training.weights.gamma},
             {"masked_logit", training.masked_logit},
             {"lm",
              {{"order", training.lm_order},
               {"delta", training.lm_delta},
               {"mode", ToString(training.lm_mode)}}},
             {"qsr", training.qsr.ToJson()}};
  if (!training.candidates.empty()) tr["candidates"] = training.candidates;
  j["training"] = tr;
  j["prompt_templates"] = prompt_templates;
  return j;
}

PipelineConfig PipelineConfig::FromJson(const json& j, const std::string& base_dir) {
  CheckKeys(j, "config",
            {"min_k", "top_k", "business_threshold", "seed", "jobs", "on_remote_error",
             "label_thresholds", "generator", "rewrite_filter", "business",
             "general_filter", "index", "training", "prompt_templates"});
  PipelineConfig c;
  try {
    Read(j, "min_k", c.min_k);
    Read(j, "top_k", c.top_k);
    Read(j, "business_threshold", c.business_threshold);
    Read(j, "seed", c.seed);
    Read(j, "jobs", c.jobs);
    if (j.contains("on_remote_error")) {
      const std::string v = j.at("on_remote_error").get<std::string>();
      if (v == "fail") {
        c.on_remote_error = OnRemoteError::kFail;
      } else if (v != "drop") {
        throw ValidationError("on_remote_error must be \"drop\" or \"fail\"");
      }
    }
    if (j.contains("label_thresholds")) {
      const json& t = j.at("label_thresholds");
      CheckKeys(t, "label_thresholds", {"relevant", "partial"});
      Read(t, "relevant", c.thresholds.relevant);
      Read(t, "partial", c.thresholds.partial);
    }
    if (j.contains("generator")) {
      const json& g = j.at("generator");
      CheckKeys(g, "generator", {"kind", "policy", "mode", "k", "binding"});
      const std::string kind = g.value("kind", "policy");
      if (kind == "remote") {
        c.generator.kind = GeneratorKind::kRemote;
      } else if (kind != "policy") {
        throw ValidationError("generator.kind must be \"policy\" or \"remote\"");
      }
      c.generator.policy = Resolve(g.value("policy", ""), base_dir);
      const std::string mode = g.value("mode", "greedy");
      if (mode == "sample") {
        c.generator.mode = DecodeMode::kSample;
      } else if (mode != "greedy") {
        throw ValidationError("generator.mode must be \"greedy\" or \"sample\"");
      }
      Read(g, "k", c.generator.k);
      if (g.contains("binding")) c.generator.binding = ScorerBinding::FromJson(g.at("binding"));
    }
    if (j.contains("rewrite_filter")) c.rewrite_filter = ScorerBinding::FromJson(j.at("rewrite_filter"));
    if (j.contains("business")) c.business = ScorerBinding::FromJson(j.at("business"));
    if (j.contains("general_filter")) c.general_filter = ScorerBinding::FromJson(j.at("general_filter"));
    if (j.contains("index")) {
      const json& ix = j.at("index");
      CheckKeys(ix, "index", {"dim", "partitions", "probes", "kmeans_iterations", "seed"});
      Read(ix, "dim", c.index.dim);
      Read(ix, "partitions", c.index.partitions);
      Read(ix, "probes", c.index.probes);
      Read(ix, "kmeans_iterations", c.index.kmeans_iterations);
      Read(ix, "seed", c.index.seed);
    }
    if (j.contains("training")) {
      const json& tr = j.at("training");
      CheckKeys(tr, "training",
                {"candidates", "step_size", "group_size", "iterations", "k",
                 "normalize_advantage", "format_penalty", "kl_coef", "alpha", "beta",
                 "gamma", "masked_logit", "lm", "qsr"});
      TrainingConfig& t = c.training;
      t.candidates = Resolve(tr.value("candidates", ""), base_dir);
      Read(tr, "step_size", t.train.step_size);
      Read(tr, "group_size", t.train.group_size);
      Read(tr, "iterations", t.train.iterations);
      Read(tr, "k", t.train.k);
      Read(tr, "normalize_advantage", t.train.normalize_advantage);
      Read(tr, "format_penalty", t.train.format_penalty);
      Read(tr, "kl_coef", t.train.kl_coef);
      Read(tr, "alpha", t.weights.alpha);
      Read(tr, "beta", t.weights.beta);
      Read(tr, "gamma", t.weights.gamma);
      Read(tr, "masked_logit", t.masked_logit);
      if (tr.contains("lm")) {
        const json& lm = tr.at("lm");
        CheckKeys(lm, "training.lm", {"order", "delta", "mode"});
        Read(lm, "order", t.lm_order);
        Read(lm, "delta", t.lm_delta);
        if (lm.contains("mode")) t.lm_mode = ParseTokenMode(lm.at("mode").get<std::string>());
      }
      if (tr.contains("qsr")) t.qsr = ScorerBinding::FromJson(tr.at("qsr"));
    }
    if (j.contains("prompt_templates")) {
      c.prompt_templates = j.at("prompt_templates").get<std::map<std::string, std::string>>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  c.Validate();
  return c;
}

PipelineConfig PipelineConfig::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError("config " + path + " is not valid JSON");
  return FromJson(j, std::filesystem::path(path).parent_path().string());
}

void PipelineConfig::OverrideRemoteEndpoint(const std::string& endpoint) {
  for (ScorerBinding* b : {&generator.binding, &rewrite_filter, &business,
                           &general_filter, &training.qsr}) {
    if (b->kind == ScorerKind::kRemote) b->endpoint = endpoint;
  }
}

// ---- Generators ---------------------------------------------------------------

PolicyGenerator::PolicyGenerator(const CategoricalRewritePolicy& policy, DecodeMode mode,
                                 size_t k, uint64_t seed)
    : policy_(policy), mode_(mode), k_(k), seed_(seed) {}

std::string PolicyGenerator::Generate(const Query& query) const {
  RewriteList list;
  list.source_query_id = query.id;
  if (mode_ == DecodeMode::kGreedy) {
    for (size_t c : policy_.TopCandidates(query.id, k_)) {
      list.rewrites.push_back({policy_.candidates()[c]});
    }
  } else {
    Rng rng(seed_, "synth.generate." + query.id);
    list = SampleResponse(policy_, query, k_, rng).list;
  }
  return RenderRewriteList(list);
}

std::string RemoteGenerator::Generate(const Query& query) const {
  return client_.Text(RemoteTask::kGenerate, {{"query", query.text},
                                              {"query_id", query.id},
                                              {"query_type", std::string(ToString(query.type))},
                                              {"k", std::to_string(k_)}});
}

// ---- Stages ---------------------------------------------------------------------

void StageStats::Drop(const std::string& reason, uint64_t n) {
  if (n == 0) return;
  dropped += n;
  reasons[reason] += n;
}

void StageStats::Merge(const StageStats& other) {
  input += other.input;
  output += other.output;
  dropped += other.dropped;
  for (const auto& [reason, n] : other.reasons) reasons[reason] += n;
}

bool StageStats::Conserved() const {
  uint64_t sum = 0;
  for (const auto& [_, n] : reasons) sum += n;
  return input == output + dropped && dropped == sum;
}

namespace {
constexpr const char* kStageNames[] = {"generate", "filter_rewrites", "retrieve",
                                       "assemble", "score_and_filter", "dedupe"};
}  // namespace

PipelineStats PipelineStats::Empty() {
  PipelineStats s;
  for (const char* name : kStageNames) s.stages.push_back({name, 0, 0, 0, {}});
  return s;
}

StageStats& PipelineStats::stage(std::string_view name) {
  for (StageStats& s : stages) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no stage named " + std::string(name));
}

const StageStats& PipelineStats::stage(std::string_view name) const {
  return const_cast<PipelineStats*>(this)->stage(name);
}

json PipelineStats::ToJson() const {
  json j;
  j["queries"] = queries;
  j["queries_fully_filtered"] = queries_fully_filtered;
  j["pairs"] = pairs;
  json arr = json::array();
  for (const StageStats& s : stages) {
    arr.push_back({{"name", s.name},
                   {"input", s.input},
                   {"output", s.output},
                   {"dropped", s.dropped},
                   {"reasons", s.reasons}});
  }
  j["stages"] = arr;
  return j;
}

PipelineStats PipelineStats::FromJson(const json& j) {
  PipelineStats s;
  try {
    s.queries = j.at("queries").get<uint64_t>();
    s.queries_fully_filtered = j.at("queries_fully_filtered").get<uint64_t>();
    s.pairs = j.at("pairs").get<uint64_t>();
    for (const json& st : j.at("stages")) {
      s.stages.push_back({st.at("name").get<std::string>(), st.at("input").get<uint64_t>(),
                          st.at("output").get<uint64_t>(), st.at("dropped").get<uint64_t>(),
                          st.at("reasons").get<std::map<std::string, uint64_t>>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad stats file: ") + e.what());
  }
  return s;
}

ParseResult GenerateRewrites(const RewriteGenerator& generator, const Query& query,
                             size_t min_k) {
  return ParseRewriteList(generator.Generate(query), min_k, query.id);
}

RewriteList FilterRewrites(const Query& query, const RewriteList& list,
                           const RewriteClassifier& classifier) {
  RewriteList kept;
  kept.source_query_id = list.source_query_id;
  for (const Rewrite& r : list.rewrites) {
    if (classifier.Classify(query.text, r.text) != RelevanceLabel::kIrrelevant) {
      kept.rewrites.push_back(r);
    }
  }
  return kept;
}

std::vector<RewriteHits> RetrieveForRewrites(const RewriteList& list,
                                             const VectorIndex& index,
                                             const Embedder& embedder, size_t top_k,
                                             size_t probes) {
  std::vector<RewriteHits> out;
  std::unordered_set<std::string> seen;
  for (const Rewrite& r : list.rewrites) {
    if (!seen.insert(r.text).second) continue;
    const Embedding q = embedder.Embed(r.text);
    out.push_back({r.text, index.SearchApprox(q, top_k, probes)});
  }
  return out;
}

std::vector<SyntheticPair> AssemblePairs(const Query& original,
                                         std::span<const RewriteHits> hits) {
  std::vector<SyntheticPair> drafts;
  for (const RewriteHits& rh : hits) {
    for (const CandidateHit& h : rh.hits) {
      SyntheticPair p;
      p.query_id = original.id;
      p.query_text = original.text;
      p.product_id = h.product_id;
      p.via_rewrite = rh.rewrite;
      p.general_label = RelevanceLabel::kIrrelevant;
      drafts.push_back(std::move(p));
    }
  }
  return drafts;
}

DraftOutcome ScoreDraft(SyntheticPair& draft, const Product& product,
                        const BusinessScorer& business, const GeneralFilter& general,
                        double threshold) {
  draft.business_score = business.Score(draft.query_text, product);
  if (!(draft.business_score >= threshold)) {
    draft.general_label = RelevanceLabel::kIrrelevant;
    return DraftOutcome::kBelowThreshold;
  }
  draft.general_label = general.Judge(draft.query_text, product);
  return draft.general_label == RelevanceLabel::kIrrelevant ? DraftOutcome::kGeneralVeto
                                                            : DraftOutcome::kKept;
}

std::vector<SyntheticPair> Dedupe(std::vector<SyntheticPair> pairs) {
  std::sort(pairs.begin(), pairs.end(), [](const SyntheticPair& a, const SyntheticPair& b) {
    if (a.query_id != b.query_id) return a.query_id < b.query_id;
    if (a.product_id != b.product_id) return a.product_id < b.product_id;
    if (a.business_score != b.business_score) return a.business_score > b.business_score;
    return a.via_rewrite < b.via_rewrite;
  });
  std::vector<SyntheticPair> out;
  for (SyntheticPair& p : pairs) {
    if (!out.empty() && out.back().query_id == p.query_id &&
        out.back().product_id == p.product_id) {
      continue;
    }
    out.push_back(std::move(p));
  }
  return out;
}

// ---- Pipeline -------------------------------------------------------------------

struct Pipeline::QueryResult {
  PipelineStats stats = PipelineStats::Empty();
  bool fully_filtered = false;
  std::vector<SyntheticPair> kept;
  std::vector<TraceEntry> trace;
};

Pipeline::Pipeline(PipelineConfig cfg, std::vector<Product> products,
                   std::optional<CategoricalRewritePolicy> policy,
                   std::optional<VectorIndex> index)
    : cfg_(std::move(cfg)), products_(std::move(products)), policy_(std::move(policy)) {
  cfg_.Validate();
  for (size_t i = 0; i < products_.size(); ++i) {
    if (!product_pos_.emplace(products_[i].id, i).second) {
      throw ValidationError("duplicate product id \"" + products_[i].id + "\"");
    }
  }
  embedder_ = std::make_unique<HashedBigramEmbedder>(cfg_.index.dim);
  if (index) {
    if (index->dim() != cfg_.index.dim) {
      throw ValidationError("index dim " + std::to_string(index->dim()) +
                            " does not match config index.dim " +
                            std::to_string(cfg_.index.dim));
    }
    if (cfg_.index.probes > index->num_partitions()) {
      throw ValidationError("index has fewer partitions than index.probes");
    }
    if (index->size() != products_.size()) {
      throw ValidationError("index and product file differ in size");
    }
    for (const std::string& id : index->ids()) {
      if (!product_pos_.count(id)) {
        throw ValidationError("index holds unknown product id \"" + id + "\"");
      }
    }
    index_ = std::move(index);
  } else if (!products_.empty()) {
    IndexParams params = cfg_.index.params();
    index_ = VectorIndex::Build(products_, params, *embedder_);
    if (cfg_.index.probes > index_->num_partitions()) {
      throw ValidationError("corpus too small for index.probes");
    }
  }

  auto client_for = [&](const ScorerBinding& b) -> RemoteClient& {
    std::string tmpl;
    if (auto it = cfg_.prompt_templates.find(b.prompt_template_id);
        it != cfg_.prompt_templates.end()) {
      tmpl = it->second;
    }
    clients_.push_back(std::make_unique<RemoteClient>(b, tmpl));
    return *clients_.back();
  };

  if (cfg_.generator.kind == GeneratorKind::kRemote) {
    generator_ = std::make_unique<RemoteGenerator>(client_for(cfg_.generator.binding),
                                                   cfg_.generator.k);
  } else {
    if (!policy_) throw ValidationError("the policy generator needs a policy file");
    generator_ = std::make_unique<PolicyGenerator>(*policy_, cfg_.generator.mode,
                                                   cfg_.generator.k, cfg_.seed);
  }
  if (cfg_.rewrite_filter.kind == ScorerKind::kRemote) {
    rewrite_filter_ = std::make_unique<RemoteRewriteClassifier>(client_for(cfg_.rewrite_filter));
  } else {
    rewrite_filter_ = std::make_unique<LexicalRewriteClassifier>(cfg_.thresholds);
  }
  if (cfg_.business.kind == ScorerKind::kRemote) {
    business_ = std::make_unique<RemoteBusinessScorer>(client_for(cfg_.business));
  } else {
    business_ = std::make_unique<LexicalBusinessScorer>();
  }
  if (cfg_.general_filter.kind == ScorerKind::kRemote) {
    general_ = std::make_unique<RemoteGeneralFilter>(client_for(cfg_.general_filter));
  } else {
    general_ = std::make_unique<LexicalGeneralFilter>(cfg_.thresholds);
  }
}

Pipeline::~Pipeline() = default;

std::vector<RemoteStats> Pipeline::remote_stats() const {
  std::vector<RemoteStats> out;
  for (const auto& c : clients_) out.push_back(c->stats());
  return out;
}

Pipeline::QueryResult Pipeline::RunQuery(const Query& query, bool trace) const {
  QueryResult r;
  const bool fail_fast = cfg_.on_remote_error == OnRemoteError::kFail;

  StageStats& gen = r.stats.stage("generate");
  gen.input = 1;
  ParseResult parsed = FormatError::kEmpty;
  try {
    parsed = GenerateRewrites(*generator_, query, cfg_.min_k);
  } catch (const RemoteError&) {
    if (fail_fast) throw;
    gen.Drop(drop::kRemoteError);
    return r;
  }
  if (const FormatError* err = std::get_if<FormatError>(&parsed)) {
    switch (*err) {
      case FormatError::kEmpty: gen.Drop(drop::kFormatEmpty); break;
      case FormatError::kTooFew: gen.Drop(drop::kFormatTooFew); break;
      case FormatError::kUnparseable: gen.Drop(drop::kFormatUnparseable); break;
    }
    return r;
  }
  gen.output = 1;
  const RewriteList& list = std::get<RewriteList>(parsed);

  StageStats& filt = r.stats.stage("filter_rewrites");
  RewriteList kept;
  kept.source_query_id = query.id;
  for (const Rewrite& rw : list.rewrites) {
    ++filt.input;
    try {
      if (rewrite_filter_->Classify(query.text, rw.text) == RelevanceLabel::kIrrelevant) {
        filt.Drop(drop::kIrrelevant);
        continue;
      }
    } catch (const RemoteError&) {
      if (fail_fast) throw;
      filt.Drop(drop::kRemoteError);
      continue;
    }
    ++filt.output;
    kept.rewrites.push_back(rw);
  }
  if (kept.rewrites.empty()) {
    r.fully_filtered = true;
    return r;
  }

  StageStats& ret = r.stats.stage("retrieve");
  ret.input = kept.k();
  if (!index_) {
    ret.Drop(drop::kNoHits, kept.k());
    return r;
  }
  std::vector<RewriteHits> hits =
      RetrieveForRewrites(kept, *index_, *embedder_, cfg_.top_k, cfg_.index.probes);
  ret.Drop(drop::kDuplicateRewrite, kept.k() - hits.size());
  std::erase_if(hits, [&](const RewriteHits& h) {
    if (!h.hits.empty()) return false;
    ret.Drop(drop::kNoHits);
    return true;
  });
  ret.output = hits.size();

  std::vector<SyntheticPair> drafts = AssemblePairs(query, hits);
  StageStats& asm_stage = r.stats.stage("assemble");
  asm_stage.input = drafts.size();
  asm_stage.output = drafts.size();

  StageStats& score = r.stats.stage("score_and_filter");
  score.input = drafts.size();
  for (SyntheticPair& d : drafts) {
    const Product& product = products_[product_pos_.at(d.product_id)];
    const char* outcome = "kept";
    try {
      switch (ScoreDraft(d, product, *business_, *general_, cfg_.business_threshold)) {
        case DraftOutcome::kKept: break;
        case DraftOutcome::kBelowThreshold: outcome = drop::kBelowThreshold; break;
        case DraftOutcome::kGeneralVeto: outcome = drop::kGeneralVeto; break;
      }
    } catch (const RemoteError&) {
      if (fail_fast) throw;
      outcome = drop::kRemoteError;
    }
    if (trace) r.trace.push_back({d, outcome});
    if (std::string_view(outcome) == "kept") {
      ++score.output;
      r.kept.push_back(std::move(d));
    } else {
      score.Drop(outcome);
    }
  }
  return r;
}

PipelineResult Pipeline::Run(std::span<const Query> queries, bool trace) const {
  std::vector<QueryResult> results(queries.size());
  ParallelFor(queries.size(), cfg_.jobs,
              [&](size_t i) { results[i] = RunQuery(queries[i], trace); });

  PipelineResult out;
  out.stats = PipelineStats::Empty();
  out.stats.queries = queries.size();
  std::vector<SyntheticPair> kept;
  for (QueryResult& r : results) {
    for (size_t s = 0; s < r.stats.stages.size(); ++s) {
      out.stats.stages[s].Merge(r.stats.stages[s]);
    }
    if (r.fully_filtered) ++out.stats.queries_fully_filtered;
    std::move(r.kept.begin(), r.kept.end(), std::back_inserter(kept));
    std::move(r.trace.begin(), r.trace.end(), std::back_inserter(out.trace));
  }
  StageStats& dd = out.stats.stage("dedupe");
  dd.input = kept.size();
  out.pairs = Dedupe(std::move(kept));
  dd.output = out.pairs.size();
  dd.Drop(drop::kDuplicate, dd.input - dd.output);
  out.stats.pairs = out.pairs.size();
  return out;
}

}  // namespace qsynth
