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

#include "qsynth/language_model.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "qsynth/common/errors.h"
#include "qsynth/common/utf8.h"

namespace qsynth {

using nlohmann::json;

namespace {
constexpr uint32_t kBosId = 0;
constexpr uint32_t kEosId = 1;
constexpr uint32_t kUnkId = 2;
constexpr std::string_view kFormatName = "qsynth.ngram_lm";
}  // namespace

std::string_view ToString(TokenMode mode) {
  return mode == TokenMode::kChar ? "char" : "word";
}

TokenMode ParseTokenMode(std::string_view name) {
  if (name == "char") return TokenMode::kChar;
  if (name == "word") return TokenMode::kWord;
  throw ValidationError("unknown token mode \"" + std::string(name) +
                        "\" (expected char or word)");
}

std::vector<std::string> Tokenize(std::string_view text, TokenMode mode) {
  return mode == TokenMode::kChar ? SplitScalars(text) : SplitWhitespace(text);
}

NGramLM::NGramLM(int order, double delta, const std::vector<std::string>& tokens,
                 TokenMode mode)
    : order_(order), delta_(delta), mode_(mode) {
  if (order < 1) throw std::invalid_argument("n-gram order must be >= 1");
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw std::invalid_argument("smoothing delta must be positive and finite");
  }
  vocab_ = {std::string(kBos), std::string(kEos), std::string(kUnk)};
  std::set<std::string> sorted(tokens.begin(), tokens.end());
  for (const std::string& t : sorted) {
    if (t == kBos || t == kEos || t == kUnk) continue;
    vocab_.push_back(t);
  }
  IndexVocabulary();
}

void NGramLM::IndexVocabulary() {
  ids_.clear();
  ids_.reserve(vocab_.size());
  for (uint32_t i = 0; i < vocab_.size(); ++i) ids_.emplace(vocab_[i], i);
}

uint32_t NGramLM::IdOf(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

NGramLM NGramLM::Fit(const std::vector<std::vector<std::string>>& corpus,
                     int order, double delta, TokenMode mode) {
  if (corpus.empty()) throw std::invalid_argument("cannot fit on an empty corpus");
  std::vector<std::string> tokens;
  for (const auto& seq : corpus) tokens.insert(tokens.end(), seq.begin(), seq.end());
  NGramLM lm(order, delta, tokens, mode);

  const size_t history = static_cast<size_t>(order - 1);
  ContextKey context(history, kBosId);
  for (const auto& seq : corpus) {
    std::fill(context.begin(), context.end(), kBosId);
    auto observe = [&](uint32_t id) {
      ContextCounts& cc = lm.counts_[context];
      ++cc.total;
      ++cc.next[id];
      if (history > 0) {
        std::rotate(context.begin(), context.begin() + 1, context.end());
        context.back() = id;
      }
    };
    for (const std::string& t : seq) observe(lm.IdOf(t));
    observe(kEosId);
  }
  return lm;
}

NGramLM NGramLM::FitTexts(const std::vector<std::string>& texts, int order,
                          double delta, TokenMode mode) {
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(texts.size());
  for (const std::string& t : texts) corpus.push_back(qsynth::Tokenize(t, mode));
  return Fit(corpus, order, delta, mode);
}

double NGramLM::LogProbIds(const ContextKey& context, uint32_t token) const {
  uint64_t joint = 0;
  uint64_t total = 0;
  if (auto it = counts_.find(context); it != counts_.end()) {
    total = it->second.total;
    if (auto jt = it->second.next.find(token); jt != it->second.next.end()) {
      joint = jt->second;
    }
  }
  const double v = static_cast<double>(vocab_.size());
  return std::log((static_cast<double>(joint) + delta_) /
                  (static_cast<double>(total) + delta_ * v));
}

double NGramLM::TokenLogProb(std::span<const std::string> context,
                             std::string_view token) const {
  const size_t history = static_cast<size_t>(order_ - 1);
  ContextKey key(history, kBosId);
  const size_t take = std::min(history, context.size());
  for (size_t i = 0; i < take; ++i) {
    key[history - take + i] = IdOf(context[context.size() - take + i]);
  }
  return LogProbIds(key, IdOf(token));
}

std::vector<double> NGramLM::SequenceLogProbs(
    std::span<const std::string> tokens) const {
  const size_t history = static_cast<size_t>(order_ - 1);
  ContextKey context(history, kBosId);
  std::vector<double> out;
  out.reserve(tokens.size() + 1);
  auto score = [&](uint32_t id) {
    out.push_back(LogProbIds(context, id));
    if (history > 0) {
      std::rotate(context.begin(), context.begin() + 1, context.end());
      context.back() = id;
    }
  };
  for (const std::string& t : tokens) score(IdOf(t));
  score(kEosId);
  return out;
}

std::vector<std::string> NGramLM::Tokenize(std::string_view text) const {
  return qsynth::Tokenize(text, mode_);
}

double NGramLM::Perplexity(std::span<const std::string> sequence) const {
  if (sequence.empty()) {
    throw std::invalid_argument("perplexity of an empty sequence is undefined");
  }
  const std::vector<double> lp = SequenceLogProbs(sequence);
  double sum = 0.0;
  for (double x : lp) sum += x;
  return std::exp(-sum / static_cast<double>(lp.size()));
}

json NGramLM::ToJson() const {
  json contexts = json::array();
  for (const auto& [key, cc] : counts_) {
    json next = json::array();
    for (const auto& [id, n] : cc.next) next.push_back({id, n});
    contexts.push_back({{"context", key}, {"total", cc.total}, {"next", next}});
  }
  return json{{"format", kFormatName},
              {"version", kFormatVersion},
              {"order", order_},
              {"delta", delta_},
              {"mode", std::string(ToString(mode_))},
              {"vocab", vocab_},
              {"contexts", contexts}};
}

NGramLM NGramLM::FromJson(const json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormatName) {
      throw ValidationError("not an n-gram model artifact");
    }
    if (j.at("version").get<int>() != kFormatVersion) {
      throw ValidationError("unsupported n-gram model version " +
                            j.at("version").dump());
    }
    NGramLM lm;
    lm.order_ = j.at("order").get<int>();
    lm.delta_ = j.at("delta").get<double>();
    lm.mode_ = ParseTokenMode(j.at("mode").get<std::string>());
    lm.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    if (lm.order_ < 1 || !(lm.delta_ > 0.0) || lm.vocab_.size() < 3 ||
        lm.vocab_[kBosId] != kBos || lm.vocab_[kEosId] != kEos ||
        lm.vocab_[kUnkId] != kUnk) {
      throw ValidationError("corrupt n-gram model header");
    }
    lm.IndexVocabulary();
    const size_t history = static_cast<size_t>(lm.order_ - 1);
    for (const json& c : j.at("contexts")) {
      ContextKey key = c.at("context").get<ContextKey>();
      if (key.size() != history) throw ValidationError("context length mismatch");
      ContextCounts cc;
      cc.total = c.at("total").get<uint64_t>();
      uint64_t sum = 0;
      for (const json& e : c.at("next")) {
        const auto id = e.at(0).get<uint32_t>();
        const auto n = e.at(1).get<uint64_t>();
        if (id >= lm.vocab_.size()) throw ValidationError("token id out of range");
        cc.next[id] = n;
        sum += n;
      }
      if (sum != cc.total) throw ValidationError("context total mismatch");
      lm.counts_.emplace(std::move(key), std::move(cc));
    }
    return lm;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed n-gram model: ") + e.what());
  }
}

void NGramLM::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToJson().dump() << '\n';
}

NGramLM NGramLM::Load(const std::string& path) {
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

bool NGramLM::operator==(const NGramLM& other) const {
  return order_ == other.order_ && delta_ == other.delta_ &&
         mode_ == other.mode_ && vocab_ == other.vocab_ &&
         counts_ == other.counts_;
}

}  // namespace qsynth
