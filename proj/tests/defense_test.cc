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

#include "undersense/defense.h"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "testing.h"
#include "undersense/attack.h"
#include "undersense/errors.h"
#include "undersense/toy_model.h"
#include "undersense/transports.h"

namespace undersense {
namespace {

struct Bundled {
  std::vector<Sample> train = ReadDatasetFile(testing::DataPath("train.jsonl")).samples;
  std::vector<Sample> dev = ReadDatasetFile(testing::DataPath("dev.jsonl")).samples;
  PerturbationLexicon lexicon = ReadLexiconFile(testing::DataPath("lexicon.json"));
};

const Bundled& Data() {
  static const Bundled data;
  return data;
}

const char kOttoContext[] =
    "Otto visited Bonn . One two three four five six seven eight nine ten "
    "eleven twelve . Hugo praised Rome .";

Sample OttoSample() {
  return testing::MakeSample(
      "otto", kOttoContext,
      testing::MakeQuestion({{"Who", "WP"}, {"visited", "VBD"}, {"Rome", "NNP"}, {"?", "."}},
                            {{2, 3, "GPE"}}),
      "Otto");
}

PerturbationLexicon GpeLexicon(std::vector<std::string> places) {
  return PerturbationLexicon({{"GPE", std::move(places)}}, {}, DefaultExcludedPos());
}

TEST(Augmentation, DrawsKDistinctVariantsPerSample) {
  const Bundled& data = Data();
  const std::span<const Sample> head(data.train.data(), 100);
  const AugmentationResult result = SampleAugmentation(head, data.lexicon, 3, 5);
  std::map<std::string, std::set<std::string>> by_source;
  for (const DefenseExample& example : result.examples) {
    EXPECT_EQ(example.provenance, Provenance::kAugmentation);
    ASSERT_EQ(example.edits.size(), 1u);
    by_source[example.source_sample_id].insert(example.question);
  }
  size_t perturbable = 0;
  for (const Sample& sample : head) {
    const auto it = by_source.find(sample.id);
    if (it == by_source.end()) continue;
    ++perturbable;
    EXPECT_EQ(it->second.size(), 3u) << sample.id;
    EXPECT_FALSE(it->second.contains(sample.question.text));
    for (const DefenseExample& example : result.examples) {
      if (example.source_sample_id == sample.id) EXPECT_EQ(example.context, sample.context);
    }
  }
  EXPECT_EQ(perturbable + result.skipped, head.size());
  EXPECT_EQ(result.examples.size(), 3 * perturbable);
}

TEST(Augmentation, SeededAndReproducible) {
  const Bundled& data = Data();
  const std::span<const Sample> head(data.train.data(), 60);
  const auto a = SampleAugmentation(head, data.lexicon, 1, 9).examples;
  const auto b = SampleAugmentation(head, data.lexicon, 1, 9).examples;
  const auto c = SampleAugmentation(head, data.lexicon, 1, 10).examples;
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Augmentation, SamplesWithoutCandidatesAreSkipped) {
  const std::vector<Sample> samples = {OttoSample()};
  const AugmentationResult result = SampleAugmentation(samples, GpeLexicon({"Rome"}), 1, 1);
  EXPECT_TRUE(result.examples.empty());
  EXPECT_EQ(result.skipped, 1u);
}

TEST(Mining, UniformModelYieldsOnlyFallbacks) {
  const Bundled& data = Data();
  const std::span<const Sample> head(data.train.data(), 40);
  ToyScorer uniform(ToyModelParams{});
  AttackConfig mining;
  mining.eta = 8;
  const auto items = MineAdversarial(head, data.lexicon, uniform, mining);
  ASSERT_EQ(items.size(), head.size());
  for (size_t i = 0; i < items.size(); ++i) {
    ASSERT_TRUE(std::holds_alternative<FallbackMarker>(items[i]));
    EXPECT_EQ(std::get<FallbackMarker>(items[i]).source_sample_id, head[i].id);
  }
}

TEST(Mining, MinedQuestionIsTheLargestIncrease) {
  ToyModelParams params;
  params.w = {4, -4, -1, 0};
  ToyScorer scorer(params);
  const PerturbationLexicon lexicon = GpeLexicon({"Bonn", "Lima", "Oslo", "Rome"});
  const std::vector<Sample> samples = {OttoSample()};
  AttackConfig mining;
  mining.eta = 8;
  const auto items = MineAdversarial(samples, lexicon, scorer, mining);
  ASSERT_EQ(items.size(), 1u);
  ASSERT_TRUE(std::holds_alternative<DefenseExample>(items[0]));
  const DefenseExample& mined = std::get<DefenseExample>(items[0]);
  EXPECT_EQ(mined.provenance, Provenance::kMined);
  const AttackOutcome exhaustive =
      BruteForceAttack(samples[0], lexicon, PerturbationKind::kNamedEntity, 1, scorer);
  EXPECT_EQ(mined.question, exhaustive.adversarial_question);
  EXPECT_EQ(mined.question, "Who visited Bonn?");
}

TEST(Mining, MinedExamplesRaiseTheOriginalAnswer) {
  const Bundled& data = Data();
  const std::span<const Sample> head(data.train.data(), 150);
  ToyScorer scorer(DefaultToyParams());
  AttackConfig mining;
  mining.eta = 16;
  const auto items = MineAdversarial(head, data.lexicon, scorer, mining);
  size_t mined = 0;
  for (const DefenseItem& item : items) {
    const auto* example = std::get_if<DefenseExample>(&item);
    if (example == nullptr) continue;
    ++mined;
    const Sample& sample = *std::find_if(head.begin(), head.end(), [&](const Sample& s) {
      return s.id == example->source_sample_id;
    });
    const ScoreRequest original{sample.id, sample.context, sample.question.text, {}};
    const ScoreResponse before = scorer.ScoreBatch({&original, 1})[0];
    const ScoreRequest adversarial{sample.id, sample.context, example->question,
                                   {*before.best_span}};
    EXPECT_GT(scorer.ScoreBatch({&adversarial, 1})[0].span_probs[0], before.best_prob);
  }
  EXPECT_GT(mined, 0u);
}

TEST(DefenseItems, JsonLinesRoundTrip) {
  const std::vector<DefenseItem> items = {
      DefenseExample{"Kraków is old.", "Who founded Kraków?", Provenance::kMined, "s1",
                     {Edit{PerturbationKind::kNamedEntity, 0, "Gdańsk", "Kraków"}}},
      FallbackMarker{"s2", "no successful perturbation"}};
  const nlohmann::json json = DefenseItemToJson(items[0]);
  EXPECT_TRUE(json["label"].is_null());
  EXPECT_EQ(json["provenance"], "mined");
  EXPECT_EQ(DefenseItemToJson(items[1])["fallback"], true);
  std::stringstream stream;
  WriteDefenseItems(stream, items);
  EXPECT_EQ(ReadDefenseItems(stream), items);
}

TEST(DefenseItems, LabelMustBeNoAnswer) {
  nlohmann::json json = DefenseItemToJson(DefenseExample{"c", "q", {}, "s", {}});
  json["label"] = "Otto";
  EXPECT_THROW(DefenseItemFromJson(json), FormatError);
}

TEST(DefenseConfig, RejectsBadSettings) {
  DefenseConfig config;
  EXPECT_NO_THROW(config.Validate());
  config.lambda = -0.1;
  EXPECT_THROW(config.Validate(), ContractViolation);
  config = {};
  config.lambda = std::numeric_limits<double>::infinity();
  EXPECT_THROW(config.Validate(), ContractViolation);
  config = {};
  config.k_per_sample = 0;
  EXPECT_THROW(config.Validate(), ContractViolation);
  config = {};
  config.mining_eta = 0;
  EXPECT_THROW(config.Validate(), ContractViolation);
  EXPECT_EQ(ParseMode("mine"), DefenseMode::kAdversarial);
  EXPECT_EQ(ParseMode("augment"), DefenseMode::kAugment);
  EXPECT_THROW(ParseMode("both"), ContractViolation);
}

TEST(CombinedLoss, IsLinearInLambda) {
  EXPECT_EQ(CombinedLoss(1.5, 2.0, 0.0), 1.5);
  EXPECT_EQ(CombinedLoss(1.5, 2.0, 1.0), 3.5);
  const double a = CombinedLoss(1.5, 2.0, 0.2), b = CombinedLoss(1.5, 2.0, 0.6);
  EXPECT_NEAR(CombinedLoss(1.5, 2.0, 0.4), (a + b) / 2, 1e-15);
}

TrainOptions ShortRun() {
  TrainOptions options;
  options.max_epochs = 8;
  options.seed = 3;
  return options;
}

TEST(Training, ZeroLambdaMatchesPlainTraining) {
  const Bundled& data = Data();
  const std::span<const Sample> train(data.train.data(), 200);
  const std::span<const Sample> dev(data.dev.data(), 60);
  DefenseConfig config;
  config.lambda = 0;
  const TrainResult plain = TrainToy(train, dev, ShortRun());
  const TrainResult defended = TrainToyDefended(train, dev, data.lexicon, config, ShortRun());
  EXPECT_EQ(plain.params, defended.params);
  EXPECT_EQ(plain.best_epoch, defended.best_epoch);
  ASSERT_EQ(plain.log.size(), defended.log.size());
  for (size_t i = 0; i < plain.log.size(); ++i) {
    EXPECT_EQ(plain.log[i].train_loss, defended.log[i].train_loss);
    EXPECT_EQ(plain.log[i].dev_loss, defended.log[i].dev_loss);
  }
}

TEST(Training, DefenseTermIsLoggedAndCombined) {
  const Bundled& data = Data();
  const std::span<const Sample> train(data.train.data(), 200);
  const std::span<const Sample> dev(data.dev.data(), 60);
  DefenseConfig config;
  config.lambda = 0.5;
  const TrainResult result = TrainToyDefended(train, dev, data.lexicon, config, ShortRun());
  ASSERT_FALSE(result.log.empty());
  for (const EpochLog& epoch : result.log) {
    EXPECT_GT(epoch.defense_examples, 0u);
    EXPECT_NEAR(epoch.combined_loss, CombinedLoss(epoch.train_loss, epoch.defense_loss, 0.5),
                1e-9);
  }
  EXPECT_FALSE(result.diverged);
}

TEST(Training, DeterministicForASeed) {
  const Bundled& data = Data();
  const std::span<const Sample> train(data.train.data(), 150);
  const std::span<const Sample> dev(data.dev.data(), 40);
  EXPECT_EQ(TrainToy(train, dev, ShortRun()).params, TrainToy(train, dev, ShortRun()).params);
}

TEST(Training, ImprovesOnTheZeroModel) {
  const Bundled& data = Data();
  const std::span<const Sample> train(data.train.data(), 200);
  const std::span<const Sample> dev(data.dev.data(), 80);
  const TrainResult result = TrainToy(train, dev, ShortRun());
  EXPECT_LT(EvaluateToy(result.params, dev).loss, EvaluateToy(ToyModelParams{}, dev).loss);
}

TEST(Training, MiningModeRecordsTheMinedFraction) {
  const Bundled& data = Data();
  const std::span<const Sample> train(data.train.data(), 80);
  const std::span<const Sample> dev(data.dev.data(), 30);
  DefenseConfig config;
  config.mode = DefenseMode::kAdversarial;
  config.mining_eta = 4;
  TrainOptions options = ShortRun();
  options.max_epochs = 3;
  const TrainResult result = TrainToyDefended(train, dev, data.lexicon, config, options);
  for (const EpochLog& epoch : result.log) {
    ASSERT_TRUE(epoch.mined_fraction);
    EXPECT_GE(*epoch.mined_fraction, 0.0);
    EXPECT_LE(*epoch.mined_fraction, 1.0);
  }
}

}  // namespace
}  // namespace undersense
