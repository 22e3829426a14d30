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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace qsynth {

enum class TokenMode { kChar, kWord };

std::string_view ToString(TokenMode mode);
TokenMode ParseTokenMode(std::string_view name);

// Char mode yields one token per Unicode scalar; word mode splits on ASCII
// whitespace.
std::vector<std::string> Tokenize(std::string_view text, TokenMode mode);

// Anything that can score a token sequence. The PDA reward only needs this
// surface, so a remote neural model can stand in for the n-gram model.
class LogProbModel {
 public:
  virtual ~LogProbModel() = default;

  // Natural-log probabilities of each token in order, followed by the
  // end-of-sequence event. The result has tokens.size() + 1 entries.
  virtual std::vector<double> SequenceLogProbs(
      std::span<const std::string> tokens) const = 0;

  virtual std::vector<std::string> Tokenize(std::string_view text) const = 0;
};

// Count-based n-gram model with additive (Lidstone) smoothing:
//
//   p(w | h) = (c(h, w) + delta) / (c(h) + delta * |V|)
//
// where h is the last order-1 tokens (BOS-padded) and V includes the reserved
// BOS, EOS and UNK symbols. Every conditional distribution is proper over V
// and strictly positive. Immutable after construction.
class NGramLM : public LogProbModel {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr int kFormatVersion = 1;

  // A model with no counts, hence uniform over the reserved symbols plus
  // `tokens`.
  NGramLM(int order, double delta, const std::vector<std::string>& tokens,
          TokenMode mode = TokenMode::kChar);

  // Each sequence contributes one event per token plus a terminal EOS, with
  // order-1 BOS symbols of left padding.
  static NGramLM Fit(const std::vector<std::vector<std::string>>& corpus,
                     int order, double delta,
                     TokenMode mode = TokenMode::kChar);

  // Tokenizes each text with `mode` and fits.
  static NGramLM FitTexts(const std::vector<std::string>& texts, int order,
                          double delta, TokenMode mode = TokenMode::kChar);

  // log p(token | context). Unknown tokens map to UNK; only the last order-1
  // context tokens are used, BOS-padded on the left when shorter.
  double TokenLogProb(std::span<const std::string> context,
                      std::string_view token) const;

  // exp(-(1/T) * sum log p) over the tokens and the terminal EOS, so
  // T = tokens.size() + 1. Throws std::invalid_argument on empty input.
  double Perplexity(std::span<const std::string> sequence) const;

  std::vector<double> SequenceLogProbs(
      std::span<const std::string> tokens) const override;
  std::vector<std::string> Tokenize(std::string_view text) const override;

  int order() const { return order_; }
  double delta() const { return delta_; }
  TokenMode mode() const { return mode_; }
  size_t vocab_size() const { return vocab_.size(); }
  const std::vector<std::string>& vocabulary() const { return vocab_; }

  nlohmann::json ToJson() const;
  static NGramLM FromJson(const nlohmann::json& j);
  void Save(const std::string& path) const;
  static NGramLM Load(const std::string& path);

  bool operator==(const NGramLM& other) const;

 private:
  struct ContextCounts {
    uint64_t total = 0;
    std::map<uint32_t, uint64_t> next;

    bool operator==(const ContextCounts&) const = default;
  };
  using ContextKey = std::vector<uint32_t>;

  NGramLM() = default;
  void IndexVocabulary();
  uint32_t IdOf(std::string_view token) const;
  double LogProbIds(const ContextKey& context, uint32_t token) const;

  int order_ = 1;
  double delta_ = 0.1;
  TokenMode mode_ = TokenMode::kChar;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, uint32_t> ids_;
  std::map<ContextKey, ContextCounts> counts_;
};

}  // namespace qsynth
