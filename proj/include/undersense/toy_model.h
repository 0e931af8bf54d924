// Copyright 2026 The Undersense Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// A small trainable span scorer used as a hermetic stand-in for a reading
// comprehension model.
//
// Tokens are maximal runs of letters/digits (any non-ASCII byte counts as
// a letter), compared lowercased. Every span of up to four tokens is a
// candidate. A span's logit is w . f with
//   f0 = overlap(question, five tokens either side of the span)
//   f1 = overlap(question, span)
//   f2 = span length in tokens
//   f3 = 1
// where overlap(q, r) = |types(q) & types(r)| / |types(q)|. NoAnswer has
// logit noanswer_bias and probabilities are a softmax over all candidates
// plus NoAnswer.

#ifndef UNDERSENSE_TOY_MODEL_H_
#define UNDERSENSE_TOY_MODEL_H_

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "undersense/scoring.h"
#include "undersense/tagged_text.h"

namespace undersense {

inline constexpr size_t kToyFeatureCount = 4;
inline constexpr size_t kToyParamCount = kToyFeatureCount + 1;
inline constexpr size_t kToyWindow = 5;
inline constexpr size_t kToyMaxSpanTokens = 4;

struct ToyModelParams {
  std::array<double, kToyFeatureCount> w{};
  double noanswer_bias = 0.0;

  // Flat view: w0..w3, noanswer_bias.
  std::array<double, kToyParamCount> Flat() const;
  static ToyModelParams FromFlat(const std::array<double, kToyParamCount>& v);

  nlohmann::json ToJson() const;
  // Throws FormatError on missing or non-finite values.
  static ToyModelParams FromJson(const nlohmann::json& json);

  // "toy-" plus a digest of the exact parameter values.
  std::string ModelId() const;

  bool operator==(const ToyModelParams&) const = default;
};

ToyModelParams ReadToyParams(const std::string& path);
void WriteToyParams(const std::string& path, const ToyModelParams& params);

struct ToyToken {
  std::string lower;
  size_t start = 0;  // byte offsets
  size_t end = 0;
};

std::vector<ToyToken> ToyTokenize(std::string_view text);

using ToyFeatures = std::array<double, kToyFeatureCount>;

// Candidate spans of a (context, question) pair with their features.
struct ToyFeaturized {
  std::vector<SpanRef> spans;
  std::vector<ToyFeatures> features;
};

// All spans of up to kToyMaxSpanTokens tokens, ordered by start then length.
ToyFeaturized ToyFeaturize(std::string_view context, std::string_view question);
// Only the given spans, which must start and end on token boundaries.
// Throws ContractViolation otherwise.
ToyFeaturized ToyFeaturize(std::string_view context, std::string_view question,
                           std::span<const SpanRef> candidates);

struct ToyDistribution {
  std::vector<double> span_probs;  // aligned with the featurized spans
  double noanswer_prob = 1.0;
  std::optional<size_t> best;  // argmax span; earliest start, then shortest
};

ToyDistribution ToySoftmax(const ToyModelParams& params,
                           const ToyFeaturized& featurized);

// Scores one request. The softmax always runs over every enumerated span;
// a requested span that is not a candidate sets the response error.
// Throws ContractViolation on an empty context.
ScoreResponse ToyScore(const ToyModelParams& params,
                       const ScoreRequest& request);

// Training example: features of every candidate plus the gold label
// (candidate index, or nullopt for NoAnswer).
struct ToyExample {
  std::vector<ToyFeatures> features;
  std::optional<size_t> gold;
};

// Builds the example for (context, question) with the sample's first answer
// as gold, or NoAnswer when `no_answer` is set or the sample is impossible.
// nullopt when the answer is not one of the candidates.
std::optional<ToyExample> MakeToyExample(const Sample& sample,
                                         std::string_view question,
                                         bool no_answer = false);

struct LossGrad {
  double loss = 0.0;
  std::array<double, kToyParamCount> grad{};
};

// Mean negative log-likelihood of the gold labels and its exact gradient
// with respect to (w, noanswer_bias). Zero for an empty batch.
LossGrad ToyLossGrad(const ToyModelParams& params,
                     std::span<const ToyExample> batch);

// Predicted answer text: the best span, or "" for NoAnswer.
std::string ToyPredict(const ToyModelParams& params, std::string_view context,
                       std::string_view question);

// Requests ToyScore rejects come back with an error marker.
class ToyScorer : public Scorer {
 public:
  explicit ToyScorer(ToyModelParams params) : params_(params) {}

  std::vector<ScoreResponse> ScoreBatch(
      std::span<const ScoreRequest> requests) override;
  ScorerInfo Info() override;

  const ToyModelParams& params() const { return params_; }

 private:
  ToyModelParams params_;
};

}  // namespace undersense

#endif  // UNDERSENSE_TOY_MODEL_H_
