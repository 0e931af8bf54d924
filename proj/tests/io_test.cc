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

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "testing.h"
#include "undersense/benchmark.h"
#include "undersense/digest.h"
#include "undersense/errors.h"
#include "undersense/lexicon.h"
#include "undersense/manifest.h"
#include "undersense/outcome_io.h"
#include "undersense/rng.h"
#include "undersense/tagged_text.h"
#include "undersense/utf8.h"

namespace undersense {
namespace {

Sample KrakowSample() {
  return testing::MakeSample(
      "k1", "In 1364 Casimir founded a university in Kraków .",
      testing::MakeQuestion({{"Who", "WP"}, {"founded", "VBD"}, {"a", "DT"},
                             {"university", "NN"}, {"in", "IN"}, {"Kraków", "NNP"}, {"?", "."}},
                            {{5, 6, "GPE"}}),
      "Casimir");
}

TEST(Utf8, OffsetMapConvertsBothWays) {
  const OffsetMap map("aé€😀b");
  EXPECT_EQ(map.codepoint_count(), 5u);
  EXPECT_EQ(CodepointCount("aé€😀b"), 5u);
  EXPECT_EQ(map.ToByte(0), 0u);
  EXPECT_EQ(map.ToByte(2), 3u);
  EXPECT_EQ(map.ToByte(3), 6u);
  EXPECT_EQ(map.ToByte(4), 10u);
  EXPECT_EQ(map.ToByte(5), 11u);
  EXPECT_EQ(map.ToCodepoint(10), 4u);
  EXPECT_THROW(map.ToCodepoint(2), FormatError);
  EXPECT_THROW(map.ToByte(6), FormatError);
}

TEST(Samples, JsonRoundTripKeepsByteOffsetsInMemory) {
  const Sample sample = KrakowSample();
  const nlohmann::json json = SampleToJson(sample);
  EXPECT_EQ(sample.question.tokens[5].char_end, 35u);
  EXPECT_EQ(json["question_tokens"][5]["start"], 28);
  EXPECT_EQ(json["question_tokens"][5]["end"], 34);
  EXPECT_EQ(json["question_tokens"][6]["start"], 34);
  const Sample back = SampleFromJson(nlohmann::json::parse(json.dump()));
  EXPECT_EQ(back.question, sample.question);
  EXPECT_EQ(back.answers, sample.answers);
  EXPECT_EQ(back.context, sample.context);
  EXPECT_FALSE(back.is_impossible);
}

TEST(Samples, DatasetSkipsBadLinesAndDuplicates) {
  const Sample sample = KrakowSample();
  nlohmann::json wrong_offsets = SampleToJson(sample);
  wrong_offsets["id"] = "k2";
  wrong_offsets["question_tokens"][0]["end"] = 4;
  nlohmann::json bad_answer = SampleToJson(sample);
  bad_answer["id"] = "k3";
  bad_answer["answers"][0]["char_start"] = 0;
  std::stringstream in;
  in << SampleToJson(sample).dump() << "\n"
     << "{not json\n"
     << "\n"
     << wrong_offsets.dump() << "\n"
     << bad_answer.dump() << "\n"
     << SampleToJson(sample).dump() << "\n";
  const DatasetReadResult result = ReadDataset(in);
  ASSERT_EQ(result.samples.size(), 1u);
  EXPECT_EQ(result.errors.size(), 4u);
  for (const std::string& error : result.errors) {
    EXPECT_EQ(error.rfind("line ", 0), 0u) << error;
  }
}

TEST(Samples, WriteThenReadIsIdentity) {
  const std::vector<Sample> samples =
      ReadDatasetFile(testing::DataPath("dev.jsonl")).samples;
  std::stringstream stream;
  WriteDataset(stream, samples);
  const DatasetReadResult back = ReadDataset(stream);
  EXPECT_TRUE(back.errors.empty());
  ASSERT_EQ(back.samples.size(), samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(SampleToJson(back.samples[i]), SampleToJson(samples[i]));
  }
}

TEST(Samples, MentionsMustMatchTheirTokens) {
  TaggedQuestion question = testing::MonksQuestion();
  EXPECT_NO_THROW(ValidateTaggedQuestion(question));
  question.entities[0].text = "Spain";
  EXPECT_THROW(ValidateTaggedQuestion(question), FormatError);
  question = testing::MonksQuestion();
  question.entities[0].token_end = 9;
  EXPECT_THROW(ValidateTaggedQuestion(question), FormatError);
  EXPECT_EQ(NormalizeWhitespace("  New \t York  "), "New York");
}

AttackConfig SomeConfig() {
  AttackConfig config;
  config.eta = 8;
  config.seed = 4;
  return config;
}

RunHeader SomeHeader() {
  return RunHeader{SomeConfig(), "abc", "toy-1", CodeVersion(), "m1"};
}

AttackOutcome SomeOutcome(const std::string& id, AttackStatus status) {
  AttackOutcome outcome;
  outcome.sample_id = id;
  outcome.status = status;
  if (status == AttackStatus::kVulnerable || status == AttackStatus::kRobust) {
    outcome.original_span = SpanRef{8, 15};
    outcome.p_orig = 0.375;
    outcome.evals_used = 3;
  }
  if (status == AttackStatus::kVulnerable) {
    outcome.adversarial_question = "Who founded a university in Kraków?";
    outcome.p_adv = 0.5;
    outcome.delta = 0.125;
    outcome.found_at_depth = 1;
    outcome.min_eta = 2;
  }
  return outcome;
}

TEST(OutcomeFiles, HeaderOutcomesFooterRoundTrip) {
  const Sample sample = KrakowSample();
  const ContextIndex contexts = {{"k1", sample.context}, {"k2", sample.context}};
  const std::vector<AttackOutcome> outcomes = {SomeOutcome("k1", AttackStatus::kVulnerable),
                                               SomeOutcome("k2", AttackStatus::kRobust)};
  std::stringstream stream;
  WriteHeaderLine(stream, SomeHeader());
  for (const AttackOutcome& outcome : outcomes) WriteOutcomeLine(stream, outcome, &contexts);
  WriteFooterLine(stream, CountOutcomes(outcomes));
  const OutcomeFile file = ReadOutcomes(stream, &contexts);
  ASSERT_TRUE(file.header);
  EXPECT_TRUE(file.header->SameRun(SomeHeader()));
  EXPECT_EQ(file.outcomes, outcomes);
  EXPECT_EQ(file.footer_error_rate, 0.5);
  EXPECT_EQ(file.footer_counts->robust, 1u);
}

TEST(OutcomeFiles, UnfinishedRunHasNoFooter) {
  std::stringstream stream;
  WriteHeaderLine(stream, SomeHeader());
  WriteOutcomeLine(stream, SomeOutcome("x", AttackStatus::kSkippedNoAnswer), nullptr);
  const OutcomeFile file = ReadOutcomes(stream, nullptr);
  EXPECT_EQ(file.outcomes.size(), 1u);
  EXPECT_FALSE(file.footer_counts);
}

TEST(OutcomeFiles, MixedRunsAreRejected) {
  RunHeader other = SomeHeader();
  other.config.eta = 16;
  std::stringstream stream;
  WriteHeaderLine(stream, SomeHeader());
  WriteHeaderLine(stream, other);
  EXPECT_THROW(ReadOutcomes(stream, nullptr), FormatError);

  // A different manifest id alone is the same run.
  RunHeader resumed = SomeHeader();
  resumed.manifest_id = "m2";
  std::stringstream same;
  WriteHeaderLine(same, SomeHeader());
  WriteHeaderLine(same, resumed);
  EXPECT_NO_THROW(ReadOutcomes(same, nullptr));
}

TEST(OutcomeFiles, MalformedLinesAreErrors) {
  std::stringstream garbage("{\"sample_id\": \"a\", \"status\": \"sideways\"}\n");
  EXPECT_THROW(ReadOutcomes(garbage, nullptr), FormatError);
  std::stringstream truncated("{\"sample_id\": \"a\", \"sta\n");
  EXPECT_THROW(ReadOutcomes(truncated, nullptr), FormatError);
}

TEST(Manifest, IdIgnoresRuntimeTimesAndOutputs) {
  testing::TempDir dir;
  const std::string input = dir.File("in.jsonl");
  testing::WriteFile(input, "{}\n");
  RunManifest a;
  a.command = "attack";
  a.config = {{"eta", 8}};
  a.seed = 3;
  a.AddInput("dataset", input);
  RunManifest b = a;
  b.runtime = {{"workers", 8}, {"out", "/elsewhere"}};
  b.started_at = UtcTimestamp();
  b.finished_at = UtcTimestamp();
  b.AddOutput("outcomes", input);
  EXPECT_EQ(a.Id(), b.Id());
  RunManifest c = a;
  c.seed = 4;
  EXPECT_NE(a.Id(), c.Id());
  RunManifest d = a;
  testing::WriteFile(input, "{} \n");
  d.inputs.clear();
  d.AddInput("dataset", input);
  EXPECT_NE(a.Id(), d.Id());

  const std::string path = dir.File("m.json");
  b.Write(path);
  const nlohmann::json written = nlohmann::json::parse(testing::ReadFile(path));
  EXPECT_EQ(written["manifest_id"], a.Id());
  EXPECT_EQ(written["inputs"][0]["sha256"], Sha256Hex("{}\n"));
  EXPECT_EQ(written["runtime"]["workers"], 8);
  EXPECT_THROW(a.AddInput("missing", dir.File("nope")), FormatError);
}

TEST(Digest, KnownVectors) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(Sha256Hex(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  testing::TempDir dir;
  testing::WriteFile(dir.File("abc"), "abc");
  EXPECT_EQ(Sha256File(dir.File("abc")), Sha256Hex("abc"));
}

TEST(Rng, StreamsAreFixed) {
  // mt19937_64 with the default seed: the standard requires this 10000th value.
  std::mt19937_64 reference;
  reference.discard(9999);
  EXPECT_EQ(reference(), 9981545732273789042ULL);
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.UniformIndex(7), b.UniformIndex(7));
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Rng, UniformIndexCoversTheRange) {
  Rng rng(1);
  std::vector<size_t> counts(5);
  for (int i = 0; i < 5000; ++i) ++counts[rng.UniformIndex(5)];
  for (size_t n : counts) {
    EXPECT_GT(n, 850u);
    EXPECT_LT(n, 1150u);
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.UniformUnit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, DerivedSeedsSeparateStreams) {
  std::set<uint64_t> seeds;
  for (uint64_t depth = 0; depth < 10; ++depth) {
    for (uint64_t item = 0; item < 10; ++item) seeds.insert(DeriveSeed(1, {depth, item}));
  }
  EXPECT_EQ(seeds.size(), 100u);
  EXPECT_EQ(DeriveSeed(1, {2, 3}), DeriveSeed(1, {2, 3}));
  EXPECT_NE(DeriveSeed(1, {2, 3}), DeriveSeed(1, {3, 2}));
  EXPECT_NE(DeriveSeed(1, {2}), DeriveSeed(2, {2}));
}

BenchmarkOptions SmallBenchmark(uint64_t seed) {
  BenchmarkOptions options;
  options.train = 40;
  options.dev = 10;
  options.test = 20;
  options.seed = seed;
  return options;
}

TEST(Benchmark, DeterministicForASeed) {
  const Benchmark a = MakeBenchmark(SmallBenchmark(3));
  const Benchmark b = MakeBenchmark(SmallBenchmark(3));
  const Benchmark c = MakeBenchmark(SmallBenchmark(4));
  ASSERT_EQ(a.train.size(), 40u);
  ASSERT_EQ(a.dev.size(), 10u);
  ASSERT_EQ(a.test.size(), 20u);
  for (size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(SampleToJson(a.train[i]), SampleToJson(b.train[i]));
  }
  EXPECT_NE(SampleToJson(a.train[0]), SampleToJson(c.train[0]));
}

TEST(Benchmark, SamplesAndCorpusAreValid) {
  const Benchmark benchmark = MakeBenchmark(SmallBenchmark(5));
  std::set<std::string> ids;
  for (const auto* split : {&benchmark.train, &benchmark.dev, &benchmark.test}) {
    for (const Sample& sample : *split) {
      EXPECT_TRUE(ids.insert(sample.id).second) << sample.id;
      EXPECT_NO_THROW(ValidateTaggedQuestion(sample.question));
      EXPECT_EQ(sample.is_impossible, sample.answers.empty());
      for (const Answer& answer : sample.answers) {
        EXPECT_EQ(sample.context.compare(answer.char_start, answer.text.size(), answer.text), 0);
      }
      // Survives the file format.
      EXPECT_EQ(SampleToJson(SampleFromJson(SampleToJson(sample))), SampleToJson(sample));
    }
  }
  std::vector<RecordError> errors;
  const PerturbationLexicon lexicon =
      BuildLexicon(benchmark.corpus, DefaultExcludedPos(), &errors);
  EXPECT_TRUE(errors.empty());
  EXPECT_FALSE(lexicon.entities().empty());
}

}  // namespace
}  // namespace undersense
