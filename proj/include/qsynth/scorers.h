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

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qsynth/domain.h"
#include "qsynth/rewards.h"

namespace qsynth {

// Jaccard cut points shared by the three-label mocks.
struct LabelThresholds {
  double relevant = 0.5;
  double partial = 0.15;

  // Throws ValidationError unless 0 <= partial <= relevant <= 1.
  void Validate() const;
};

RelevanceLabel LabelFromJaccard(double jaccard, const LabelThresholds& t = {});

// Pluggable scorer interfaces. Implementations must be thread-safe. Remote
// implementations throw RemoteError.
class RewriteClassifier {
 public:
  virtual ~RewriteClassifier() = default;
  virtual RelevanceLabel Classify(std::string_view query,
                                  std::string_view rewrite) const = 0;
};

class BusinessScorer {
 public:
  virtual ~BusinessScorer() = default;
  // Relevance in [0, 1], higher is more relevant.
  virtual double Score(std::string_view query, const Product& product) const = 0;
};

class GeneralFilter {
 public:
  virtual ~GeneralFilter() = default;
  virtual RelevanceLabel Judge(std::string_view query,
                               const Product& product) const = 0;
};

// ---- Lexical mocks -------------------------------------------------------

RelevanceLabel MockRewriteClassify(std::string_view query, std::string_view rewrite,
                                   const LabelThresholds& t = {});

// (4(J - 0.5), -4(J - 0.5)) with J the character-bigram Jaccard.
std::pair<double, double> MockQsrLogits(std::string_view query,
                                        std::string_view rewrite);

double MockBusinessScore(std::string_view query, const Product& product);

// ASCII-lowercased words of `text`, split on ASCII whitespace and
// punctuation. Bytes >= 0x80 are word characters.
std::vector<std::string> LowerWords(std::string_view text);

// The product's head noun phrase: attributes["category"] if present,
// otherwise the last title word.
std::vector<std::string> ProductHead(const Product& product);

// Word Jaccard between query and title over non-stopwords, forced to 0 when
// any head word is missing from the query.
double HeadGatedJaccard(std::string_view query, const Product& product);

RelevanceLabel MockGeneralFilter(std::string_view query, const Product& product,
                                 const LabelThresholds& t = {});

class LexicalRewriteClassifier final : public RewriteClassifier {
 public:
  explicit LexicalRewriteClassifier(LabelThresholds t = {}) : t_(t) {}
  RelevanceLabel Classify(std::string_view query,
                          std::string_view rewrite) const override {
    return MockRewriteClassify(query, rewrite, t_);
  }

 private:
  LabelThresholds t_;
};

class LexicalQsrLogitProvider final : public QsrLogitProvider {
 public:
  std::pair<double, double> Logits(std::string_view query,
                                   std::string_view rewrite) const override {
    return MockQsrLogits(query, rewrite);
  }
};

class LexicalBusinessScorer final : public BusinessScorer {
 public:
  double Score(std::string_view query, const Product& product) const override {
    return MockBusinessScore(query, product);
  }
};

class LexicalGeneralFilter final : public GeneralFilter {
 public:
  explicit LexicalGeneralFilter(LabelThresholds t = {}) : t_(t) {}
  RelevanceLabel Judge(std::string_view query, const Product& product) const override {
    return MockGeneralFilter(query, product, t_);
  }

 private:
  LabelThresholds t_;
};

// ---- Remote inference ----------------------------------------------------

enum class ScorerKind { kMockLexical, kRemote };

enum class RemoteTask {
  kGenerate,
  kRewriteFilter,
  kQsrLogits,
  kBusinessScore,
  kGeneralFilter,
};

std::string_view ToString(RemoteTask task);

struct ScorerBinding {
  ScorerKind kind = ScorerKind::kMockLexical;
  std::string endpoint;            // http://host:port[/path]
  std::string prompt_template_id;  // key into the config's prompt templates
  double timeout_s = 10.0;
  int retries = 2;
  double backoff_initial_s = 0.05;
  double backoff_max_s = 2.0;
  size_t max_inflight = 8;

  // Throws ValidationError. Remote bindings need an endpoint.
  void Validate() const;
  nlohmann::json ToJson() const;
  static ScorerBinding FromJson(const nlohmann::json& j);
  bool operator==(const ScorerBinding&) const = default;
};

class RemoteError : public std::runtime_error {
 public:
  enum class Kind { kTimeout, kHttpStatus, kTransport, kMalformed, kOutOfRange };

  RemoteError(Kind kind, const std::string& what, int http_status = 0)
      : std::runtime_error(what), kind_(kind), http_status_(http_status) {}

  Kind kind() const { return kind_; }
  int http_status() const { return http_status_; }

 private:
  Kind kind_;
  int http_status_;
};

std::string_view ToString(RemoteError::Kind kind);

// Substitutes {name} placeholders. Unknown placeholders are left verbatim.
std::string RenderPrompt(std::string_view tmpl,
                         const std::map<std::string, std::string>& vars);

struct RemoteStats {
  uint64_t requests = 0;  // logical calls
  uint64_t attempts = 0;  // HTTP round trips
  uint64_t retries = 0;
  uint64_t failures = 0;  // calls that ended in RemoteError
};

// JSON-over-HTTP client. Sends {"id","task","prompt","inputs"} and expects
// one of {"label"}, {"score"}, {"logits"} or {"text"} back. Transport errors,
// timeouts, 429 and 5xx are retried with exponential backoff; other 4xx and
// malformed or out-of-range bodies fail immediately. Thread-safe, with at
// most binding.max_inflight concurrent requests.
class RemoteClient {
 public:
  RemoteClient(ScorerBinding binding, std::string prompt_template);
  ~RemoteClient();

  RemoteClient(const RemoteClient&) = delete;
  RemoteClient& operator=(const RemoteClient&) = delete;

  RelevanceLabel Label(RemoteTask task, const std::map<std::string, std::string>& inputs);
  double Score(RemoteTask task, const std::map<std::string, std::string>& inputs);
  std::pair<double, double> Logits(RemoteTask task,
                                   const std::map<std::string, std::string>& inputs);
  std::string Text(RemoteTask task, const std::map<std::string, std::string>& inputs);

  RemoteStats stats() const;
  const ScorerBinding& binding() const { return binding_; }

 private:
  nlohmann::json Call(RemoteTask task, const std::map<std::string, std::string>& inputs);
  nlohmann::json Attempt(const std::string& body, const std::string& request_id);

  ScorerBinding binding_;
  std::string prompt_template_;
  std::string base_url_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<>> inflight_;
  std::atomic<uint64_t> next_id_{0};
  std::atomic<uint64_t> requests_{0};
  std::atomic<uint64_t> attempts_{0};
  std::atomic<uint64_t> retries_{0};
  std::atomic<uint64_t> failures_{0};
};

class RemoteRewriteClassifier final : public RewriteClassifier {
 public:
  explicit RemoteRewriteClassifier(RemoteClient& client) : client_(client) {}
  RelevanceLabel Classify(std::string_view query, std::string_view rewrite) const override;

 private:
  RemoteClient& client_;
};

class RemoteQsrLogitProvider final : public QsrLogitProvider {
 public:
  explicit RemoteQsrLogitProvider(RemoteClient& client) : client_(client) {}
  std::pair<double, double> Logits(std::string_view query,
                                   std::string_view rewrite) const override;

 private:
  RemoteClient& client_;
};

class RemoteBusinessScorer final : public BusinessScorer {
 public:
  explicit RemoteBusinessScorer(RemoteClient& client) : client_(client) {}
  double Score(std::string_view query, const Product& product) const override;

 private:
  RemoteClient& client_;
};

class RemoteGeneralFilter final : public GeneralFilter {
 public:
  explicit RemoteGeneralFilter(RemoteClient& client) : client_(client) {}
  RelevanceLabel Judge(std::string_view query, const Product& product) const override;

 private:
  RemoteClient& client_;
};

}  // namespace qsynth
