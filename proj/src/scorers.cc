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

#include "qsynth/scorers.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <regex>
#include <set>
#include <thread>

#include <httplib.h>

#include "qsynth/common/errors.h"

namespace qsynth {

void LabelThresholds::Validate() const {
  if (!(0.0 <= partial && partial <= relevant && relevant <= 1.0)) {
    throw ValidationError("label thresholds must satisfy 0 <= partial <= relevant <= 1");
  }
}

RelevanceLabel LabelFromJaccard(double jaccard, const LabelThresholds& t) {
  if (jaccard >= t.relevant) return RelevanceLabel::kRelevant;
  if (jaccard >= t.partial) return RelevanceLabel::kPartiallyRelevant;
  return RelevanceLabel::kIrrelevant;
}

RelevanceLabel MockRewriteClassify(std::string_view query, std::string_view rewrite,
                                   const LabelThresholds& t) {
  return LabelFromJaccard(BigramJaccard(query, rewrite), t);
}

std::pair<double, double> MockQsrLogits(std::string_view query,
                                        std::string_view rewrite) {
  const double yes = 4.0 * (BigramJaccard(query, rewrite) - 0.5);
  return {yes, -yes};
}

double MockBusinessScore(std::string_view query, const Product& product) {
  return BigramJaccard(query, product.title);
}

std::vector<std::string> LowerWords(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

namespace {

const std::set<std::string, std::less<>>& Stopwords() {
  static const std::set<std::string, std::less<>> kWords = {
      "a",    "an",   "and",  "any",  "are",   "best", "can",  "do",   "does",
      "for",  "from", "good", "how",  "i",     "in",   "is",   "it",   "me",
      "my",   "not",  "of",   "on",   "or",    "that", "the",  "to",   "what",
      "which", "with", "without", "you", "your"};
  return kWords;
}

}  // namespace

std::vector<std::string> ProductHead(const Product& product) {
  if (auto it = product.attributes.find("category"); it != product.attributes.end()) {
    return LowerWords(it->second);
  }
  std::vector<std::string> words = LowerWords(product.title);
  if (words.empty()) return {};
  return {words.back()};
}

double HeadGatedJaccard(std::string_view query, const Product& product) {
  const std::vector<std::string> qwords = LowerWords(query);
  const std::set<std::string> qset(qwords.begin(), qwords.end());
  for (const std::string& h : ProductHead(product)) {
    if (!qset.count(h)) return 0.0;
  }
  std::vector<std::string> a;
  std::vector<std::string> b;
  for (const std::string& w : qset) {
    if (!Stopwords().count(w)) a.push_back(w);
  }
  const std::vector<std::string> twords = LowerWords(product.title);
  const std::set<std::string> tset(twords.begin(), twords.end());
  for (const std::string& w : tset) {
    if (!Stopwords().count(w)) b.push_back(w);
  }
  return SetJaccard(a, b);
}

RelevanceLabel MockGeneralFilter(std::string_view query, const Product& product,
                                 const LabelThresholds& t) {
  return LabelFromJaccard(HeadGatedJaccard(query, product), t);
}

// ---- Remote ----------------------------------------------------------------

std::string_view ToString(RemoteTask task) {
  switch (task) {
    case RemoteTask::kGenerate: return "generate";
    case RemoteTask::kRewriteFilter: return "rewrite_filter";
    case RemoteTask::kQsrLogits: return "qsr_logits";
    case RemoteTask::kBusinessScore: return "business_score";
    case RemoteTask::kGeneralFilter: return "general_filter";
  }
  return "unknown";
}

std::string_view ToString(RemoteError::Kind kind) {
  switch (kind) {
    case RemoteError::Kind::kTimeout: return "timeout";
    case RemoteError::Kind::kHttpStatus: return "http_status";
    case RemoteError::Kind::kTransport: return "transport";
    case RemoteError::Kind::kMalformed: return "malformed";
    case RemoteError::Kind::kOutOfRange: return "out_of_range";
  }
  return "unknown";
}

void ScorerBinding::Validate() const {
  if (kind == ScorerKind::kRemote && endpoint.empty()) {
    throw ValidationError("remote scorer binding needs an endpoint");
  }
  if (!(timeout_s > 0.0) || !std::isfinite(timeout_s)) {
    throw ValidationError("timeout_s must be positive");
  }
  if (retries < 0) throw ValidationError("retries must be >= 0");
  if (!(backoff_initial_s >= 0.0) || !(backoff_max_s >= backoff_initial_s)) {
    throw ValidationError("backoff must satisfy 0 <= backoff_initial_s <= backoff_max_s");
  }
  if (max_inflight < 1) throw ValidationError("max_inflight must be >= 1");
}

nlohmann::json ScorerBinding::ToJson() const {
  nlohmann::json j;
  j["kind"] = kind == ScorerKind::kRemote ? "remote" : "mock";
  if (!endpoint.empty()) j["endpoint"] = endpoint;
  if (!prompt_template_id.empty()) j["prompt_template"] = prompt_template_id;
  j["timeout_s"] = timeout_s;
  j["retries"] = retries;
  j["backoff_initial_s"] = backoff_initial_s;
  j["backoff_max_s"] = backoff_max_s;
  j["max_inflight"] = max_inflight;
  return j;
}

ScorerBinding ScorerBinding::FromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("scorer binding must be an object");
  static const std::set<std::string> kKeys = {
      "kind", "endpoint", "prompt_template", "timeout_s",
      "retries", "backoff_initial_s", "backoff_max_s", "max_inflight"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw ValidationError("unknown scorer binding key \"" + key + "\"");
  }
  ScorerBinding b;
  try {
    const std::string kind = j.value("kind", "mock");
    if (kind == "remote") {
      b.kind = ScorerKind::kRemote;
    } else if (kind != "mock") {
      throw ValidationError("scorer kind must be \"mock\" or \"remote\", got \"" + kind + "\"");
    }
    b.endpoint = j.value("endpoint", "");
    b.prompt_template_id = j.value("prompt_template", "");
    b.timeout_s = j.value("timeout_s", b.timeout_s);
    b.retries = j.value("retries", b.retries);
    b.backoff_initial_s = j.value("backoff_initial_s", b.backoff_initial_s);
    b.backoff_max_s = j.value("backoff_max_s", b.backoff_max_s);
    b.max_inflight = j.value("max_inflight", b.max_inflight);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad scorer binding: ") + e.what());
  }
  b.Validate();
  return b;
}

std::string RenderPrompt(std::string_view tmpl,
                         const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        auto it = vars.find(std::string(tmpl.substr(i + 1, close - i - 1)));
        if (it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

RemoteClient::RemoteClient(ScorerBinding binding, std::string prompt_template)
    : binding_(std::move(binding)), prompt_template_(std::move(prompt_template)) {
  binding_.Validate();
  if (binding_.kind != ScorerKind::kRemote) {
    throw ValidationError("RemoteClient needs a remote binding");
  }
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(binding_.endpoint, m, kUrl)) {
    throw ValidationError("endpoint must look like http://host:port[/path], got \"" +
                          binding_.endpoint + "\"");
  }
  base_url_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
  inflight_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(binding_.max_inflight));
}

RemoteClient::~RemoteClient() = default;

RemoteStats RemoteClient::stats() const {
  return {requests_.load(), attempts_.load(), retries_.load(), failures_.load()};
}

nlohmann::json RemoteClient::Attempt(const std::string& body,
                                     const std::string& request_id) {
  httplib::Client cli(base_url_);
  const auto timeout = std::chrono::duration<double>(binding_.timeout_s);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  cli.set_connection_timeout(usec);
  cli.set_read_timeout(usec);
  cli.set_write_timeout(usec);

  const auto start = std::chrono::steady_clock::now();
  httplib::Result res = cli.Post(path_, body, "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - start;
    const httplib::Error err = res.error();
    // A read timeout and a reset connection share one error code; elapsed
    // time tells them apart.
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= timeout * 0.9)) {
      throw RemoteError(RemoteError::Kind::kTimeout,
                        "request to " + binding_.endpoint + " timed out");
    }
    throw RemoteError(RemoteError::Kind::kTransport,
                      "request to " + binding_.endpoint + " failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw RemoteError(RemoteError::Kind::kHttpStatus,
                      binding_.endpoint + " returned HTTP " + std::to_string(res->status),
                      res->status);
  }
  nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object()) {
    throw RemoteError(RemoteError::Kind::kMalformed,
                      binding_.endpoint + " returned a non-object body");
  }
  if (reply.contains("id") && reply["id"] != request_id) {
    throw RemoteError(RemoteError::Kind::kMalformed,
                      binding_.endpoint + " answered a different request id");
  }
  return reply;
}

nlohmann::json RemoteClient::Call(RemoteTask task,
                                  const std::map<std::string, std::string>& inputs) {
  ++requests_;
  const std::string id = "req-" + std::to_string(next_id_.fetch_add(1));
  nlohmann::json request = {{"id", id},
                            {"task", ToString(task)},
                            {"prompt", RenderPrompt(prompt_template_, inputs)},
                            {"inputs", inputs}};
  const std::string body = request.dump();

  double backoff = binding_.backoff_initial_s;
  for (int attempt = 0;; ++attempt) {
    try {
      ++attempts_;
      inflight_->acquire();
      struct Release {
        std::counting_semaphore<>* s;
        ~Release() { s->release(); }
      } release{inflight_.get()};
      return Attempt(body, id);
    } catch (const RemoteError& e) {
      const bool retryable =
          e.kind() == RemoteError::Kind::kTimeout ||
          e.kind() == RemoteError::Kind::kTransport ||
          (e.kind() == RemoteError::Kind::kHttpStatus &&
           (e.http_status() == 429 || e.http_status() >= 500));
      if (!retryable || attempt >= binding_.retries) {
        ++failures_;
        throw;
      }
    }
    ++retries_;
    std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
    backoff = std::min(backoff * 2.0, binding_.backoff_max_s);
  }
}

namespace {

[[noreturn]] void Malformed(const std::string& what) {
  throw RemoteError(RemoteError::Kind::kMalformed, what);
}

}  // namespace

RelevanceLabel RemoteClient::Label(RemoteTask task,
                                   const std::map<std::string, std::string>& inputs) {
  const nlohmann::json reply = Call(task, inputs);
  if (!reply.contains("label") || !reply["label"].is_string()) {
    ++failures_;
    Malformed("response has no string \"label\"");
  }
  auto label = ParseRelevanceLabel(reply["label"].get<std::string>());
  if (!label) {
    ++failures_;
    throw RemoteError(RemoteError::Kind::kOutOfRange,
                      "unknown label \"" + reply["label"].get<std::string>() + "\"");
  }
  return *label;
}

double RemoteClient::Score(RemoteTask task,
                           const std::map<std::string, std::string>& inputs) {
  const nlohmann::json reply = Call(task, inputs);
  if (!reply.contains("score") || !reply["score"].is_number()) {
    ++failures_;
    Malformed("response has no numeric \"score\"");
  }
  const double s = reply["score"].get<double>();
  if (!(s >= 0.0 && s <= 1.0)) {
    ++failures_;
    throw RemoteError(RemoteError::Kind::kOutOfRange,
                      "score " + reply["score"].dump() + " outside [0, 1]");
  }
  return s;
}

std::pair<double, double> RemoteClient::Logits(
    RemoteTask task, const std::map<std::string, std::string>& inputs) {
  const nlohmann::json reply = Call(task, inputs);
  const auto* logits = reply.contains("logits") ? &reply["logits"] : nullptr;
  if (!logits || !logits->is_array() || logits->size() != 2 ||
      !(*logits)[0].is_number() || !(*logits)[1].is_number()) {
    ++failures_;
    Malformed("response has no two-number \"logits\" array");
  }
  const double yes = (*logits)[0].get<double>();
  const double no = (*logits)[1].get<double>();
  if (!std::isfinite(yes) || !std::isfinite(no)) {
    ++failures_;
    throw RemoteError(RemoteError::Kind::kOutOfRange, "non-finite logits");
  }
  return {yes, no};
}

std::string RemoteClient::Text(RemoteTask task,
                               const std::map<std::string, std::string>& inputs) {
  const nlohmann::json reply = Call(task, inputs);
  if (!reply.contains("text") || !reply["text"].is_string()) {
    ++failures_;
    Malformed("response has no string \"text\"");
  }
  return reply["text"].get<std::string>();
}

RelevanceLabel RemoteRewriteClassifier::Classify(std::string_view query,
                                                 std::string_view rewrite) const {
  return client_.Label(RemoteTask::kRewriteFilter,
                       {{"query", std::string(query)}, {"rewrite", std::string(rewrite)}});
}

std::pair<double, double> RemoteQsrLogitProvider::Logits(std::string_view query,
                                                         std::string_view rewrite) const {
  return client_.Logits(RemoteTask::kQsrLogits,
                        {{"query", std::string(query)}, {"rewrite", std::string(rewrite)}});
}

double RemoteBusinessScorer::Score(std::string_view query, const Product& product) const {
  return client_.Score(RemoteTask::kBusinessScore, {{"query", std::string(query)},
                                                    {"product_id", product.id},
                                                    {"title", product.title}});
}

RelevanceLabel RemoteGeneralFilter::Judge(std::string_view query,
                                          const Product& product) const {
  return client_.Label(RemoteTask::kGeneralFilter, {{"query", std::string(query)},
                                                    {"product_id", product.id},
                                                    {"title", product.title}});
}

}  // namespace qsynth
