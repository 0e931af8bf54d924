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

#include "undersense/scoring.h"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "testing.h"
#include "undersense/errors.h"
#include "undersense/json_util.h"
#include "undersense/rng.h"
#include "undersense/toy_model.h"
#include "undersense/transports.h"

namespace undersense {
namespace {

// Values below come from tests/oracles/toy_oracle.py, an independent
// implementation of the feature definition.

ToyModelParams Params(double w0, double w1, double w2, double w3, double bias) {
  ToyModelParams params;
  params.w = {w0, w1, w2, w3};
  params.noanswer_bias = bias;
  return params;
}

TEST(ToyScorer, UnigramSpansPickTheQuestionWord) {
  // Context "a b c", question "b": features a = c = [1, 0, 1, 1] (b is in
  // their window), b = [0, 1, 1, 1].
  const std::vector<SpanRef> unigrams = {{0, 1}, {2, 3}, {4, 5}};
  const ToyFeaturized featurized = ToyFeaturize("a b c", "b", unigrams);
  EXPECT_EQ(featurized.features[0], (ToyFeatures{1, 0, 1, 1}));
  EXPECT_EQ(featurized.features[1], (ToyFeatures{0, 1, 1, 1}));
  EXPECT_EQ(featurized.features[2], (ToyFeatures{1, 0, 1, 1}));
  const ToyDistribution dist = ToySoftmax(Params(0.5, 2.0, -0.1, 0.0, 0.3), featurized);
  ASSERT_TRUE(dist.best);
  EXPECT_EQ(*dist.best, 1u);
  EXPECT_NEAR(dist.span_probs[0], 0.13538163053688948, 1e-15);
  EXPECT_NEAR(dist.span_probs[1], 0.6067383739017236, 1e-15);
  EXPECT_NEAR(dist.span_probs[2], 0.13538163053688948, 1e-15);
  EXPECT_NEAR(dist.noanswer_prob, 0.12249836502449732, 1e-15);
}

TEST(ToyScorer, RemovingADistractorCueRaisesTheAnswer) {
  const std::string context =
      "alpha beta gamma delta epsilon zeta eta theta iota kappa lambda mu";
  const std::vector<SpanRef> spans = {{0, 5}, {context.size() - 2, context.size()}};
  const ToyModelParams params = Params(2.0, -1.0, -0.5, 0.0, 0.5);
  const ToyDistribution before = ToySoftmax(params, ToyFeaturize(context, "what beta lambda", spans));
  const ToyDistribution after = ToySoftmax(params, ToyFeaturize(context, "what beta omega", spans));
  EXPECT_NEAR(before.span_probs[0], 0.2944976854873674, 1e-15);
  EXPECT_NEAR(before.span_probs[1], 0.2944976854873674, 1e-15);
  EXPECT_NEAR(before.noanswer_prob, 0.4110046290252653, 1e-15);
  EXPECT_NEAR(after.span_probs[0], 0.3437572512873738, 1e-15);
  EXPECT_NEAR(after.span_probs[1], 0.17649085760252625, 1e-15);
  EXPECT_NEAR(after.noanswer_prob, 0.4797518911101, 1e-15);
  EXPECT_GT(after.span_probs[0], before.span_probs[0]);
}

TEST(ToyScorer, ZeroWeightsAreUniform) {
  const std::vector<SpanRef> spans = {{0, 3}, {4, 7}, {8, 11}, {0, 7}};
  const ToyDistribution dist =
      ToySoftmax(Params(0, 0, 0, 0, 0), ToyFeaturize("one two six", "two", spans));
  for (double p : dist.span_probs) EXPECT_DOUBLE_EQ(p, 1.0 / 5.0);
  EXPECT_DOUBLE_EQ(dist.noanswer_prob, 1.0 / 5.0);
  EXPECT_EQ(*dist.best, 0u);  // ties go to the earliest, then shortest span
}

TEST(ToyScorer, ProbabilitiesSumToOne) {
  const std::vector<Sample> samples = ReadDatasetFile(testing::DataPath("dev.jsonl")).samples;
  Rng rng(3);
  for (int round = 0; round < 50; ++round) {
    const Sample& sample = samples[rng.UniformIndex(samples.size())];
    ToyModelParams params;
    for (double& w : params.w) w = 20 * (rng.UniformUnit() - 0.5);
    params.noanswer_bias = 20 * (rng.UniformUnit() - 0.5);
    const ToyDistribution dist =
        ToySoftmax(params, ToyFeaturize(sample.context, sample.question.text));
    const double total =
        std::accumulate(dist.span_probs.begin(), dist.span_probs.end(), dist.noanswer_prob);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(ToyScorer, EnumeratesSpansUpToFourTokens) {
  const ToyFeaturized featurized = ToyFeaturize("a b c d e", "x");
  // 5 + 4 + 3 + 2 spans of lengths 1..4.
  EXPECT_EQ(featurized.spans.size(), 14u);
  EXPECT_TRUE(std::is_sorted(featurized.spans.begin(), featurized.spans.end()));
}

TEST(ToyScorer, TokenizationLowercasesAndSplitsOnPunctuation) {
  const std::vector<ToyToken> tokens = ToyTokenize("Who, in 1066?  Kraków!");
  ASSERT_EQ(tokens.size(), 4u);
  EXPECT_EQ(tokens[0].lower, "who");
  EXPECT_EQ(tokens[2].lower, "1066");
  EXPECT_EQ(tokens[3].lower, "kraków");
  EXPECT_EQ(tokens[3].start, 15u);
}

TEST(ToyScorer, ScoreRespectsTheResponseContract) {
  ToyScorer scorer(DefaultToyParams());
  const std::vector<Sample> samples = ReadDatasetFile(testing::DataPath("dev.jsonl")).samples;
  for (size_t i = 0; i < 20; ++i) {
    const Sample& s = samples[i];
    const ToyFeaturized featurized = ToyFeaturize(s.context, s.question.text);
    ScoreRequest request{s.id, s.context, s.question.text, featurized.spans};
    const ScoreResponse response = scorer.ScoreBatch({&request, 1})[0];
    ASSERT_FALSE(response.error);
    ASSERT_EQ(response.span_probs.size(), featurized.spans.size());
    for (double p : response.span_probs) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, response.best_prob);
    }
    EXPECT_GE(response.noanswer_prob, 0.0);
    EXPECT_LE(response.noanswer_prob, 1.0);
  }
}

TEST(ToyScorer, PureAndDeterministic) {
  ToyScorer scorer(DefaultToyParams());
  const std::vector<ScoreRequest> requests(
      2, ScoreRequest{"same", "Otto visited Bonn in 1450.", "Who visited Bonn?", {{0, 4}}});
  const std::vector<ScoreResponse> responses = scorer.ScoreBatch(requests);
  ASSERT_EQ(responses.size(), 2u);
  EXPECT_EQ(responses[0], responses[1]);
  EXPECT_EQ(scorer.ScoreBatch(requests), responses);
}

TEST(ToyScorer, EmptySpanListGivesEmptyProbabilities) {
  ToyScorer scorer(DefaultToyParams());
  const ScoreRequest request{"r", "Otto visited Bonn.", "Who visited Bonn?", {}};
  EXPECT_TRUE(scorer.ScoreBatch({&request, 1})[0].span_probs.empty());
}

TEST(ToyScorer, EmptyContextIsAContractViolation) {
  EXPECT_THROW(ToyScore(DefaultToyParams(), {"r", "", "Who?", {}}), ContractViolation);
}

TEST(ToyScorer, UnknownSpanIsAPerRequestError) {
  ToyScorer scorer(DefaultToyParams());
  const std::vector<ScoreRequest> requests = {
      {"bad", "Otto visited Bonn.", "Who?", {{1, 3}}},
      {"good", "Otto visited Bonn.", "Who?", {{0, 4}}}};
  const std::vector<ScoreResponse> responses = scorer.ScoreBatch(requests);
  EXPECT_TRUE(responses[0].error);
  EXPECT_FALSE(responses[1].error);
}

TEST(ToyParams, JsonAndModelId) {
  const ToyModelParams params = Params(1.5, -2, 0.25, 0, 3);
  EXPECT_EQ(ToyModelParams::FromJson(params.ToJson()), params);
  EXPECT_EQ(params.ModelId(), Params(1.5, -2, 0.25, 0, 3).ModelId());
  EXPECT_NE(params.ModelId(), Params(1.5, -2, 0.25, 0, 3.0000001).ModelId());
  EXPECT_EQ(params.ModelId().rfind("toy-", 0), 0u);
  nlohmann::json bad = params.ToJson();
  bad["w"][0] = "x";
  EXPECT_THROW(ToyModelParams::FromJson(bad), FormatError);
  bad = params.ToJson();
  bad.erase("noanswer_bias");
  EXPECT_THROW(ToyModelParams::FromJson(bad), FormatError);
}

TEST(ToyParams, BundledParamsAreTheDefault) {
  EXPECT_EQ(ReadToyParams(testing::DataPath("params.json")), DefaultToyParams());
}

std::vector<ToyExample> SomeExamples(size_t count, uint64_t seed) {
  const std::vector<Sample> samples = ReadDatasetFile(testing::DataPath("train.jsonl")).samples;
  Rng rng(seed);
  std::vector<ToyExample> batch;
  while (batch.size() < count) {
    const Sample& sample = samples[rng.UniformIndex(samples.size())];
    if (auto example = MakeToyExample(sample, sample.question.text, rng.UniformIndex(3) == 0)) {
      batch.push_back(std::move(*example));
    }
  }
  return batch;
}

TEST(ToyLossGrad, UniformNoAnswerLoss) {
  ToyExample example;
  example.features.assign(6, ToyFeatures{0.5, 0, 1, 1});
  const LossGrad result = ToyLossGrad(ToyModelParams{}, std::vector<ToyExample>{example});
  EXPECT_NEAR(result.loss, std::log(7.0), 1e-15);
}

TEST(ToyLossGrad, MatchesFiniteDifferences) {
  Rng rng(17);
  for (int draw = 0; draw < 20; ++draw) {
    std::array<double, kToyParamCount> flat{};
    for (double& v : flat) v = 6 * (rng.UniformUnit() - 0.5);
    const std::vector<ToyExample> batch = SomeExamples(1 + rng.UniformIndex(6), rng.Next());
    const LossGrad analytic = ToyLossGrad(ToyModelParams::FromFlat(flat), batch);
    for (size_t d = 0; d < kToyParamCount; ++d) {
      auto plus = flat, minus = flat;
      plus[d] += 1e-5;
      minus[d] -= 1e-5;
      const double numeric = (ToyLossGrad(ToyModelParams::FromFlat(plus), batch).loss -
                              ToyLossGrad(ToyModelParams::FromFlat(minus), batch).loss) /
                             2e-5;
      const double scale = std::max({std::abs(numeric), std::abs(analytic.grad[d]), 1e-3});
      EXPECT_LT(std::abs(numeric - analytic.grad[d]) / scale, 1e-4) << "draw " << draw;
    }
  }
}

TEST(ToyLossGrad, DuplicatedBatchIsUnchanged) {
  const std::vector<ToyExample> batch = SomeExamples(5, 2);
  std::vector<ToyExample> doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const ToyModelParams params = Params(3, -2, -1, 0.5, 1);
  const LossGrad a = ToyLossGrad(params, batch);
  const LossGrad b = ToyLossGrad(params, doubled);
  EXPECT_NEAR(a.loss, b.loss, 1e-12);
  for (size_t d = 0; d < kToyParamCount; ++d) EXPECT_NEAR(a.grad[d], b.grad[d], 1e-12);
}

TEST(ToyLossGrad, SmallStepsDescend) {
  const std::vector<ToyExample> batch = SomeExamples(16, 9);
  std::array<double, kToyParamCount> flat{};
  double loss = ToyLossGrad(ToyModelParams::FromFlat(flat), batch).loss;
  for (int step = 0; step < 50; ++step) {
    const LossGrad lg = ToyLossGrad(ToyModelParams::FromFlat(flat), batch);
    for (size_t d = 0; d < kToyParamCount; ++d) flat[d] -= 0.05 * lg.grad[d];
    const double next = ToyLossGrad(ToyModelParams::FromFlat(flat), batch).loss;
    EXPECT_LT(next, loss) << "step " << step;
    loss = next;
  }
}

TEST(WireProtocol, RequestRoundTrip) {
  const ScoreRequest request{"r-1", "Kraków lies on the Vistula.", "Where is Kraków?",
                             {{0, 7}, {19, 26}}};
  const nlohmann::json wire = RequestToJson(request);
  // Offsets on the wire count code points.
  EXPECT_EQ(wire["spans_to_score"][0]["char_end"], 6);
  EXPECT_EQ(wire["spans_to_score"][1]["char_start"], 18);
  EXPECT_EQ(RequestFromJson(nlohmann::json::parse(wire.dump())), request);
}

TEST(WireProtocol, ResponseRoundTrip) {
  const std::string context = "Zürich is big.";
  ScoreResponse response;
  response.request_id = "x";
  response.best_span = SpanRef{0, 7};
  response.best_prob = 0.625;
  response.noanswer_prob = 0.125;
  response.span_probs = {0.625, 0.0};
  const nlohmann::json wire = ResponseToJson(response, context);
  EXPECT_EQ(wire["best_span"]["char_end"], 6);
  EXPECT_EQ(ResponseFromJson(wire, context), response);

  ScoreResponse no_answer;
  no_answer.request_id = "y";
  no_answer.noanswer_prob = 1.0;
  EXPECT_TRUE(no_answer.PredictsNoAnswer());
  EXPECT_EQ(ResponseFromJson(ResponseToJson(no_answer, context), context), no_answer);
}

TEST(WireProtocol, RejectsOutOfRangeValues) {
  const std::string context = "abc";
  nlohmann::json wire = {{"request_id", "x"}, {"best_span", nullptr}, {"best_prob", 1.5},
                         {"noanswer_prob", 0.0}, {"span_probs", nlohmann::json::array()}};
  EXPECT_THROW(ResponseFromJson(wire, context), FormatError);
  wire["best_prob"] = 0.5;
  wire["best_span"] = {{"char_start", 0}, {"char_end", 9}};
  EXPECT_THROW(ResponseFromJson(wire, context), FormatError);
  wire["best_span"] = nullptr;
  wire["span_probs"] = {-0.1};
  EXPECT_THROW(ResponseFromJson(wire, context), FormatError);
}

TEST(WireProtocol, ErrorMarkerNeedsNoOtherFields) {
  const ScoreResponse response =
      ResponseFromJson({{"request_id", "x"}, {"error", "span not alignable"}}, "abc");
  ASSERT_TRUE(response.error);
  EXPECT_EQ(*response.error, "span not alignable");
}

TEST(WireProtocol, CheckResponsesCarriesThePayload) {
  const std::vector<ScoreRequest> requests = {{"a", "ctx", "q", {{0, 3}}}};
  std::vector<ScoreResponse> responses(1);
  responses[0].request_id = "b";
  try {
    CheckResponses(requests, responses, "RAW");
    FAIL() << "expected a protocol error";
  } catch (const ProtocolError& e) {
    EXPECT_EQ(e.raw_payload(), "RAW");
  }
  responses[0].request_id = "a";
  EXPECT_THROW(CheckResponses(requests, responses, "RAW"), ProtocolError);  // no span prob
  responses[0].span_probs = {0.5};
  EXPECT_NO_THROW(CheckResponses(requests, responses, "RAW"));
  EXPECT_THROW(CheckResponses(requests, {}, "RAW"), ProtocolError);
}

TEST(WireProtocol, InfoRoundTrip) {
  const ScorerInfo info{"toy-abc", 0.25};
  const ScorerInfo back = InfoFromJson(InfoToJson(info));
  EXPECT_EQ(back.model_id, "toy-abc");
  EXPECT_EQ(back.noanswer_threshold, 0.25);
}

}  // namespace
}  // namespace undersense
