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

#include "qsynth/cli.h"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "qsynth/common/errors.h"
#include "qsynth/common/random.h"
#include "qsynth/language_model.h"
#include "qsynth/metrics.h"
#include "qsynth/pipeline.h"
#include "qsynth/retrieval.h"
#include "qsynth/rewards.h"
#include "qsynth/scorers.h"

namespace qsynth::cli {

namespace {

constexpr double kGradCheckTolerance = 1e-4;

struct Options {
  std::string config;
  std::string queries;
  std::string products;
  std::string candidates;
  std::string policy;
  std::string index;
  std::string out;
  std::string stats;
  std::string judgments;
  std::string labels;
  std::string metrics;
  uint64_t seed = 0;
  size_t jobs = 1;
  size_t iterations = 0;
  size_t top_k = kDefaultTopK;
  double threshold = 0.0;
  double h = 1e-5;
  std::vector<size_t> n_values = {10, 100};
};

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

nlohmann::json ReadJsonFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(path + " is not valid JSON");
  return j;
}

PipelineConfig LoadConfig(const std::string& path) {
  PipelineConfig cfg = PipelineConfig::Load(path);
  if (const char* endpoint = std::getenv(kRemoteEndpointEnv); endpoint && *endpoint) {
    cfg.OverrideRemoteEndpoint(endpoint);
  }
  return cfg;
}

int TrainPolicy(const Options& o, const CLI::App& sub, std::ostream& out) {
  PipelineConfig cfg = LoadConfig(o.config);
  const std::string candidates_path =
      sub.count("--candidates") ? o.candidates : cfg.training.candidates;
  if (candidates_path.empty()) {
    throw ValidationError("no candidates file: pass --candidates or set training.candidates");
  }
  const std::vector<Query> queries = ReadQueriesJsonl(o.queries);
  const std::vector<Product> products = ReadProductsJsonl(o.products);
  if (products.empty()) throw ValidationError(o.products + " holds no products");

  std::vector<std::string> titles;
  titles.reserve(products.size());
  for (const Product& p : products) titles.push_back(p.title);
  const NGramLM lm = NGramLM::FitTexts(titles, cfg.training.lm_order, cfg.training.lm_delta,
                                       cfg.training.lm_mode);

  CategoricalRewritePolicy policy =
      BuildPriorPolicy(ReadCandidatesJsonl(candidates_path), cfg.training.masked_logit);

  std::unique_ptr<RemoteClient> client;
  std::unique_ptr<QsrLogitProvider> qsr;
  if (cfg.training.qsr.kind == ScorerKind::kRemote) {
    auto it = cfg.prompt_templates.find(cfg.training.qsr.prompt_template_id);
    client = std::make_unique<RemoteClient>(
        cfg.training.qsr, it == cfg.prompt_templates.end() ? "" : it->second);
    qsr = std::make_unique<RemoteQsrLogitProvider>(*client);
  } else {
    qsr = std::make_unique<LexicalQsrLogitProvider>();
  }
  const ResponseScorer scorer(*qsr, lm, cfg.training.weights, cfg.min_k);

  TrainConfig tc = cfg.training.train;
  tc.seed = sub.count("--seed") ? o.seed : cfg.seed;
  tc.jobs = sub.count("--jobs") ? o.jobs : cfg.jobs;
  if (sub.count("--iterations")) tc.iterations = o.iterations;
  const TrainStats stats = Train(
      policy, queries,
      [&](const Query& q, const RewriteList& l) { return scorer.Score(q, l); }, tc);

  policy.Save(o.out);
  if (!o.stats.empty()) stats.WriteCsv(o.stats);
  out << "trained " << stats.iterations.size() << " iterations over " << queries.size()
      << " queries";
  if (!stats.iterations.empty()) {
    out << "; last mean reward " << stats.iterations.back().mean_total;
  }
  out << "\nwrote " << o.out << '\n';
  return kExitOk;
}

int BuildIndex(const Options& o, const CLI::App& sub, std::ostream& out) {
  PipelineConfig cfg = LoadConfig(o.config);
  const std::vector<Product> products = ReadProductsJsonl(o.products);
  if (products.empty()) throw ValidationError(o.products + " holds no products");
  IndexParams params = cfg.index.params();
  if (sub.count("--seed")) params.seed = o.seed;
  const VectorIndex index =
      VectorIndex::Build(products, params, HashedBigramEmbedder(params.dim));
  index.Save(o.out);
  out << "indexed " << index.size() << " products in " << index.num_partitions()
      << " partitions\nwrote " << o.out << '\n';
  return kExitOk;
}

int Synth(const Options& o, const CLI::App& sub, std::ostream& out) {
  PipelineConfig cfg = LoadConfig(o.config);
  if (sub.count("--seed")) cfg.seed = o.seed;
  if (sub.count("--jobs")) cfg.jobs = o.jobs;
  if (sub.count("--top-k")) cfg.top_k = o.top_k;
  if (sub.count("--threshold")) cfg.business_threshold = o.threshold;
  if (sub.count("--policy")) cfg.generator.policy = o.policy;
  cfg.Validate();

  const std::vector<Query> queries = ReadQueriesJsonl(o.queries);
  std::vector<Product> products = ReadProductsJsonl(o.products);
  std::optional<CategoricalRewritePolicy> policy;
  if (cfg.generator.kind == GeneratorKind::kPolicy) {
    if (cfg.generator.policy.empty()) {
      throw ValidationError("no policy: pass --policy or set generator.policy");
    }
    policy = CategoricalRewritePolicy::Load(cfg.generator.policy);
  }
  std::optional<VectorIndex> index;
  if (!o.index.empty()) index = VectorIndex::Load(o.index);

  const Pipeline pipeline(cfg, std::move(products), std::move(policy), std::move(index));
  const PipelineResult result = pipeline.Run(queries);
  WritePairsJsonl(o.out, result.pairs);
  const std::string stats_path = o.stats.empty() ? o.out + ".stats.json" : o.stats;
  WriteText(stats_path, result.stats.ToJson().dump(2) + "\n");
  out << "emitted " << result.pairs.size() << " pairs from " << queries.size()
      << " queries\nwrote " << o.out << " and " << stats_path << '\n';
  return kExitOk;
}

int Eval(const Options& o, std::ostream& out) {
  if (o.judgments.empty() && o.labels.empty()) {
    throw ValidationError("eval needs --judgments, --labels, or both");
  }
  std::vector<EvalJudgment> judgments;
  if (!o.judgments.empty()) judgments = ReadJudgmentsJsonl(o.judgments);
  std::vector<LabeledSample> labels;
  if (!o.labels.empty()) labels = ReadLabelsJsonl(o.labels);
  const MetricsReport report = ComputeReport(judgments, labels, o.n_values, o.top_k);
  if (!o.out.empty()) WriteText(o.out, report.ToJson().dump(2) + "\n");
  out << report.ToTable();
  return kExitOk;
}

int RunGradCheck(const Options& o, std::ostream& out, std::ostream& err) {
  const GradCheckProblem p = MakeGradCheckProblem(o.seed);
  const double e = GradCheck(p.policy, p.batch, p.cfg, o.h, &p.reference);
  out << "max relative error: " << e << '\n';
  if (!(e < kGradCheckTolerance)) {
    err << "gradient check failed: error " << e << " >= " << kGradCheckTolerance << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

std::string StageTable(const PipelineStats& s) {
  std::ostringstream os;
  os << "queries " << s.queries << ", fully filtered " << s.queries_fully_filtered
     << ", pairs " << s.pairs << "\n\n";
  std::vector<std::vector<std::string>> cells = {
      {"Stage", "Input", "Output", "Dropped", "Reasons"}};
  for (const StageStats& st : s.stages) {
    std::string reasons;
    for (const auto& [r, n] : st.reasons) {
      if (!reasons.empty()) reasons += ", ";
      reasons += r + "=" + std::to_string(n);
    }
    cells.push_back({st.name, std::to_string(st.input), std::to_string(st.output),
                     std::to_string(st.dropped), reasons.empty() ? "-" : reasons});
  }
  std::vector<size_t> w(5, 0);
  for (const auto& row : cells) {
    for (size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], row[c].size());
  }
  for (size_t r = 0; r < cells.size(); ++r) {
    for (size_t c = 0; c < cells[r].size(); ++c) {
      const std::string& v = cells[r][c];
      const std::string pad(w[c] - v.size(), ' ');
      if (c == 0 || c == 4) {
        os << (c ? "  " : "") << v << (c == 4 ? "" : pad);
      } else {
        os << "  " << pad << v;
      }
    }
    os << '\n';
  }
  return os.str();
}

int Report(const Options& o, std::ostream& out) {
  if (o.stats.empty() && o.metrics.empty()) {
    throw ValidationError("report needs --stats or --metrics");
  }
  if (!o.stats.empty()) out << StageTable(PipelineStats::FromJson(ReadJsonFile(o.stats)));
  if (!o.stats.empty() && !o.metrics.empty()) out << '\n';
  if (!o.metrics.empty()) out << MetricsReport::FromJson(ReadJsonFile(o.metrics)).ToTable();
  return kExitOk;
}

}  // namespace

GradCheckProblem MakeGradCheckProblem(uint64_t seed) {
  Rng rng(seed, "gradcheck");
  constexpr size_t kCandidates = 12;
  constexpr size_t kContexts = 3;
  std::vector<std::string> candidates;
  for (size_t c = 0; c < kCandidates; ++c) candidates.push_back("c" + std::to_string(c));
  auto random_row = [&] {
    std::vector<double> row(kCandidates);
    for (double& x : row) x = rng.Normal();
    return row;
  };
  GradCheckProblem p{CategoricalRewritePolicy(candidates, random_row()),
                     CategoricalRewritePolicy(candidates, random_row()),
                     {},
                     {}};
  std::vector<Query> queries;
  for (size_t q = 0; q < kContexts; ++q) {
    const std::string id = "q" + std::to_string(q);
    queries.push_back({id, "query " + id, QueryType::kQa});
    p.policy.SetLogits(id, random_row());
    p.reference.SetLogits(id, random_row());
  }
  p.cfg.k = 3;
  p.cfg.kl_coef = 0.05;
  for (size_t i = 0; i < 8; ++i) {
    const Query& q = queries[rng.Below(kContexts)];
    SampledResponse r = SampleResponse(p.policy, q, p.cfg.k, rng);
    p.batch.push_back({q, std::move(r.list), rng.Normal()});
  }
  return p;
}

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic query-product training data from multi-candidate rewrites",
               "qsynth"};
  app.require_subcommand(1, 1);
  Options o;

  auto add_config = [&](CLI::App* s, bool required) {
    auto* opt = s->add_option("--config", o.config, "Pipeline config JSON")
                    ->check(CLI::ExistingFile);
    if (required) opt->required();
  };
  auto add_seed = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Root random seed (overrides the config)");
  };
  auto add_jobs = [&](CLI::App* s) {
    s->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  };

  CLI::App* train = app.add_subcommand("train-policy", "Train the rewrite policy");
  add_config(train, true);
  train->add_option("--queries", o.queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--products", o.products, "Products JSONL for the product-side LM")
      ->required()->check(CLI::ExistingFile);
  train->add_option("--candidates", o.candidates, "Candidate rewrites JSONL")
      ->check(CLI::ExistingFile);
  train->add_option("--out", o.out, "Policy output path")->required();
  train->add_option("--stats", o.stats, "Per-iteration CSV output path");
  train->add_option("--iterations", o.iterations, "Training iterations")
      ->check(CLI::NonNegativeNumber);
  add_seed(train);
  add_jobs(train);

  CLI::App* build = app.add_subcommand("build-index", "Embed products and build the ANN index");
  add_config(build, true);
  build->add_option("--products", o.products, "Products JSONL")->required()->check(CLI::ExistingFile);
  build->add_option("--out", o.out, "Index output path")->required();
  add_seed(build);

  CLI::App* synth = app.add_subcommand("synth", "Run the data synthesis pipeline");
  add_config(synth, true);
  synth->add_option("--queries", o.queries, "Queries JSONL")->required()->check(CLI::ExistingFile);
  synth->add_option("--products", o.products, "Products JSONL")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", o.out, "Pairs JSONL output path")->required();
  synth->add_option("--stats", o.stats, "Stats JSON output path (default: <out>.stats.json)");
  synth->add_option("--policy", o.policy, "Policy file (overrides generator.policy)")
      ->check(CLI::ExistingFile);
  synth->add_option("--index", o.index, "Prebuilt index (default: build in memory)")
      ->check(CLI::ExistingFile);
  synth->add_option("--top-k", o.top_k, "Products retrieved per rewrite")->check(CLI::PositiveNumber);
  synth->add_option("--threshold", o.threshold, "Business score threshold")
      ->check(CLI::Range(0.0, 1.0));
  add_seed(synth);
  add_jobs(synth);

  CLI::App* eval = app.add_subcommand("eval", "Compute retrieval metrics from judgments");
  add_config(eval, false);
  eval->add_option("--judgments", o.judgments, "Judgments JSONL")->check(CLI::ExistingFile);
  eval->add_option("--labels", o.labels, "Labeled samples JSONL")->check(CLI::ExistingFile);
  eval->add_option("--out", o.out, "Metrics report JSON output path");
  eval->add_option("--top-k", o.top_k, "Rank cutoff for Query Goodrate")->check(CLI::PositiveNumber);
  eval->add_option("--n", o.n_values, "N values for Query Goodrate@N")->check(CLI::PositiveNumber);
  add_seed(eval);

  CLI::App* grad = app.add_subcommand("gradcheck", "Check the policy gradient numerically");
  add_config(grad, false);
  grad->add_option("--step", o.h, "Central difference step")->check(CLI::PositiveNumber);
  add_seed(grad);

  CLI::App* report = app.add_subcommand("report", "Render stats or metrics as tables");
  add_config(report, false);
  report->add_option("--stats", o.stats, "Pipeline stats JSON")->check(CLI::ExistingFile);
  report->add_option("--metrics", o.metrics, "Metrics report JSON")->check(CLI::ExistingFile);
  add_seed(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    if (!dynamic_cast<const CLI::CallForHelp*>(&e)) {
      err << (app.get_subcommands().empty() ? app.help() : app.get_subcommands()[0]->help());
    }
    return kExitValidation;
  }

  try {
    if (train->parsed()) return TrainPolicy(o, *train, out);
    if (build->parsed()) return BuildIndex(o, *build, out);
    if (synth->parsed()) return Synth(o, *synth, out);
    if (eval->parsed()) return Eval(o, out);
    if (grad->parsed()) return RunGradCheck(o, out, err);
    if (report->parsed()) return Report(o, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitValidation;
}

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.push_back("qsynth");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return Run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace qsynth::cli
