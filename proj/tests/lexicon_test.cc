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

#include "undersense/lexicon.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "testing.h"
#include "undersense/errors.h"
#include "undersense/rng.h"

namespace undersense {
namespace {

TaggedCorpusRecord Record(const std::string& id,
                          const std::vector<std::pair<std::string, std::string>>& tokens,
                          const std::vector<std::tuple<size_t, size_t, std::string>>& entities) {
  const TaggedQuestion tagged = testing::MakeQuestion(tokens, entities);
  return {id, tagged.tokens, tagged.entities};
}

std::vector<TaggedCorpusRecord> MonksCorpus() {
  return {Record("d1", {{"Monks", "NNS"}, {"lived", "VBD"}, {"in", "IN"}, {"Italy", "NNP"}, {".", "."}},
                 {{3, 4, "GPE"}}),
          Record("d2", {{"Tourists", "NNS"}, {"visit", "VBP"}, {"Las", "NNP"}, {"Vegas", "NNP"}},
                 {{2, 4, "GPE"}})};
}

TEST(BuildLexicon, CollectsMentionsPerType) {
  const PerturbationLexicon lex = BuildLexicon(MonksCorpus());
  ASSERT_EQ(lex.entities().size(), 1u);
  EXPECT_EQ(lex.entities().at("GPE"), (std::vector<std::string>{"Italy", "Las Vegas"}));
  EXPECT_EQ(lex.TokensOfTag("NNP").size(), 3u);
  EXPECT_TRUE(lex.TokensOfTag("VBD").empty());
  EXPECT_TRUE(lex.TokensOfTag("IN").empty());
}

TEST(BuildLexicon, EmptyCorpusGivesEmptyLexicon) {
  const PerturbationLexicon lex = BuildLexicon(std::vector<TaggedCorpusRecord>{});
  EXPECT_TRUE(lex.empty());
  EXPECT_TRUE(lex.entities().empty());
  EXPECT_TRUE(lex.pos_tokens().empty());
  EXPECT_EQ(lex.excluded_pos(), DefaultExcludedPos());
}

TEST(BuildLexicon, ExcludedTagNeverBecomesAKey) {
  const PerturbationLexicon lex = BuildLexicon(std::vector<TaggedCorpusRecord>{Record("d", {{"the", "DT"}}, {})});
  EXPECT_FALSE(lex.pos_tokens().contains("DT"));
  EXPECT_TRUE(lex.IsExcludedTag("DT"));
}

TEST(BuildLexicon, DefaultExclusionList) {
  const std::set<std::string, std::less<>> expected = {
      "IN", "DT", ".", "VBD", "VBZ", "WP", "WRB", "WDT", "CC", "MD", "TO"};
  EXPECT_EQ(DefaultExcludedPos(), expected);
}

TEST(BuildLexicon, IdempotentUnderRepetition) {
  std::vector<TaggedCorpusRecord> twice = MonksCorpus();
  const std::vector<TaggedCorpusRecord> once = MonksCorpus();
  twice.insert(twice.end(), once.begin(), once.end());
  EXPECT_EQ(BuildLexicon(twice).fingerprint(), BuildLexicon(once).fingerprint());
}

TEST(BuildLexicon, ValuesAreSortedAndUnique) {
  const PerturbationLexicon lex(
      {{"GPE", {"Rome", "Berlin", "Rome", "Athens"}}}, {{"NN", {"dog", "cat", "dog"}}},
      DefaultExcludedPos());
  EXPECT_EQ(lex.entities().at("GPE"), (std::vector<std::string>{"Athens", "Berlin", "Rome"}));
  EXPECT_EQ(lex.pos_tokens().at("NN"), (std::vector<std::string>{"cat", "dog"}));
}

TEST(BuildLexicon, EntityWhitespaceIsNormalized) {
  const PerturbationLexicon lex({{"GPE", {" Las \t Vegas ", "Las Vegas"}}}, {},
                                DefaultExcludedPos());
  EXPECT_EQ(lex.entities().at("GPE"), (std::vector<std::string>{"Las Vegas"}));
}

TEST(BuildLexicon, ConstructorDropsExcludedTags) {
  const PerturbationLexicon lex({}, {{"DT", {"the"}}, {"NN", {"dog"}}}, DefaultExcludedPos());
  EXPECT_EQ(lex.pos_tokens().size(), 1u);
  EXPECT_TRUE(lex.TokensOfTag("DT").empty());
}

TEST(BuildLexicon, MalformedRecordIsReportedAndSkipped) {
  TaggedCorpusRecord bad = Record("broken", {{"a", "NN"}, {"b", "NN"}}, {});
  std::swap(bad.tokens[0].char_start, bad.tokens[1].char_start);
  std::swap(bad.tokens[0].char_end, bad.tokens[1].char_end);
  std::vector<TaggedCorpusRecord> corpus = MonksCorpus();
  corpus.insert(corpus.begin() + 1, bad);
  std::vector<RecordError> errors;
  const PerturbationLexicon lex = BuildLexicon(corpus, DefaultExcludedPos(), &errors);
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0].doc_id, "broken");
  EXPECT_EQ(lex.entities().at("GPE").size(), 2u);
}

TEST(BuildLexicon, OverlappingMentionsAreRejected) {
  const TaggedCorpusRecord bad =
      Record("overlap", {{"New", "NNP"}, {"York", "NNP"}, {"City", "NNP"}},
             {{0, 2, "GPE"}, {1, 3, "GPE"}});
  std::vector<RecordError> errors;
  BuildLexicon(std::vector<TaggedCorpusRecord>{bad}, DefaultExcludedPos(), &errors);
  EXPECT_EQ(errors.size(), 1u);
}

TEST(LexiconBuilder, JsonLinesWithErrors) {
  LexiconBuilder builder;
  EXPECT_TRUE(builder.AddJsonLine(
      R"({"doc_id":"a","tokens":[{"text":"Italy","pos":"NNP","start":0,"end":5}],)"
      R"("entities":[{"text":"Italy","type":"GPE","tok_start":0,"tok_end":1}]})",
      1));
  EXPECT_FALSE(builder.AddJsonLine("{not json", 2));
  EXPECT_FALSE(builder.AddJsonLine(
      R"({"doc_id":"b","tokens":[{"text":"Italy","pos":"NNP","start":0,"end":3}],"entities":[]})",
      3));
  ASSERT_EQ(builder.errors().size(), 2u);
  EXPECT_EQ(builder.errors()[0].line, 2u);
  EXPECT_EQ(builder.errors()[1].doc_id, "b");
  EXPECT_EQ(builder.records_accepted(), 1u);
  EXPECT_EQ(builder.Build().EntitiesOfType("GPE").size(), 1u);
}

TEST(LexiconBuilder, CodePointOffsets) {
  LexiconBuilder builder;
  EXPECT_TRUE(builder.AddJsonLine(
      R"({"doc_id":"k","tokens":[{"text":"Kraków","pos":"NNP","start":0,"end":6}],"entities":[]})",
      1));
}

TEST(LexiconFile, RoundTripKeepsFingerprint) {
  const PerturbationLexicon lex = BuildLexicon(MonksCorpus());
  testing::TempDir dir;
  WriteLexiconFile(dir.File("lex.json"), lex);
  const PerturbationLexicon back = ReadLexiconFile(dir.File("lex.json"));
  EXPECT_EQ(back.fingerprint(), lex.fingerprint());
  EXPECT_EQ(back.entities(), lex.entities());
  EXPECT_EQ(back.pos_tokens(), lex.pos_tokens());
}

TEST(LexiconFile, TamperedContentIsRejected) {
  nlohmann::json doc = BuildLexicon(MonksCorpus()).ToJson();
  doc["ne"]["GPE"].push_back("Rome");
  EXPECT_THROW(PerturbationLexicon::FromJson(doc), FormatError);
  doc.erase("fingerprint");
  EXPECT_NO_THROW(PerturbationLexicon::FromJson(doc));
}

TEST(LexiconFile, FingerprintTracksContent) {
  const PerturbationLexicon a({{"GPE", {"Italy"}}}, {}, DefaultExcludedPos());
  const PerturbationLexicon b({{"GPE", {"Italy"}}}, {}, DefaultExcludedPos());
  const PerturbationLexicon c({{"GPE", {"Italy", "Rome"}}}, {}, DefaultExcludedPos());
  const PerturbationLexicon d({{"GPE", {"Italy"}}}, {}, {"DT"});
  EXPECT_EQ(a.fingerprint(), b.fingerprint());
  EXPECT_NE(a.fingerprint(), c.fingerprint());
  EXPECT_NE(a.fingerprint(), d.fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 64u);
}

TEST(SplitLexicon, FourEntitiesSplitInTwo) {
  const PerturbationLexicon lex({{"GPE", {"A", "B", "C", "D"}}}, {}, DefaultExcludedPos());
  const LexiconSplit split = SplitLexicon(lex, 3);
  const auto train = split.train.EntitiesOfType("GPE");
  const auto heldout = split.heldout.EntitiesOfType("GPE");
  ASSERT_EQ(train.size(), 2u);
  ASSERT_EQ(heldout.size(), 2u);
  std::set<std::string> all(train.begin(), train.end());
  all.insert(heldout.begin(), heldout.end());
  EXPECT_EQ(all, (std::set<std::string>{"A", "B", "C", "D"}));
  EXPECT_TRUE(split.degenerate_types.empty());
}

TEST(SplitLexicon, SingletonTypeStaysInTrain) {
  const PerturbationLexicon lex({{"GPE", {"A"}}}, {}, DefaultExcludedPos());
  const LexiconSplit split = SplitLexicon(lex, 11);
  EXPECT_EQ(split.train.EntitiesOfType("GPE").size(), 1u);
  EXPECT_TRUE(split.heldout.EntitiesOfType("GPE").empty());
  EXPECT_EQ(split.degenerate_types, (std::vector<std::string>{"GPE"}));
}

TEST(SplitLexicon, DeterministicInSeed) {
  const PerturbationLexicon lex = ReadLexiconFile(testing::DataPath("lexicon.json"));
  EXPECT_EQ(SplitLexicon(lex, 5).train.fingerprint(), SplitLexicon(lex, 5).train.fingerprint());
  EXPECT_EQ(SplitLexicon(lex, 5).heldout.fingerprint(),
            SplitLexicon(lex, 5).heldout.fingerprint());
  EXPECT_NE(SplitLexicon(lex, 5).train.fingerprint(), SplitLexicon(lex, 6).train.fingerprint());
}

// Property: for random lexicons and seeds the halves are disjoint, their
// union is the input and the held-out half has floor(n/2) strings.
TEST(SplitLexicon, DisjointHalvesProperty) {
  Rng rng(42);
  for (int round = 0; round < 200; ++round) {
    PerturbationLexicon::Vocabulary entities, tokens;
    for (int t = 0; t < 3; ++t) {
      auto& values = entities["T" + std::to_string(t)];
      const size_t n = 2 + rng.UniformIndex(30);
      for (size_t i = 0; i < n; ++i) values.push_back("e" + std::to_string(rng.UniformIndex(1000)));
      auto& words = tokens["NN" + std::to_string(t)];
      for (size_t i = 0; i < n; ++i) words.push_back("w" + std::to_string(rng.UniformIndex(1000)));
    }
    const PerturbationLexicon lex(entities, tokens, DefaultExcludedPos());
    const LexiconSplit split = SplitLexicon(lex, rng.Next());
    auto check = [](const PerturbationLexicon::Vocabulary& full,
                    const PerturbationLexicon& train, const PerturbationLexicon& heldout,
                    bool entity) {
      for (const auto& [key, values] : full) {
        const auto a = entity ? train.EntitiesOfType(key) : train.TokensOfTag(key);
        const auto b = entity ? heldout.EntitiesOfType(key) : heldout.TokensOfTag(key);
        std::set<std::string> left(a.begin(), a.end()), right(b.begin(), b.end());
        std::set<std::string> both;
        std::set_intersection(left.begin(), left.end(), right.begin(), right.end(),
                              std::inserter(both, both.end()));
        EXPECT_TRUE(both.empty()) << key;
        left.insert(right.begin(), right.end());
        EXPECT_EQ(left, std::set<std::string>(values.begin(), values.end())) << key;
        EXPECT_EQ(b.size(), values.size() / 2) << key;
      }
    };
    check(lex.entities(), split.train, split.heldout, true);
    check(lex.pos_tokens(), split.train, split.heldout, false);
  }
}

TEST(LexiconStats, TwoEntityExample) {
  const LexiconStats stats = ComputeLexiconStats(BuildLexicon(MonksCorpus()));
  EXPECT_EQ(stats.entity_counts.at("GPE"), 2u);
  EXPECT_DOUBLE_EQ(stats.mean_entities_per_type, 2.0);
}

TEST(LexiconStats, EmptyLexicon) {
  const LexiconStats stats = ComputeLexiconStats(PerturbationLexicon());
  EXPECT_TRUE(stats.entity_counts.empty());
  EXPECT_TRUE(stats.token_counts.empty());
  EXPECT_EQ(stats.mean_entities_per_type, 0.0);
  EXPECT_EQ(stats.mean_tokens_per_tag, 0.0);
}

TEST(LexiconStats, BundledLexicon) {
  const LexiconStats stats =
      ComputeLexiconStats(ReadLexiconFile(testing::DataPath("lexicon.json")));
  EXPECT_EQ(stats.entity_counts.at("PERSON"), 40u);
  EXPECT_EQ(stats.entity_counts.at("GPE"), 40u);
  EXPECT_EQ(stats.entity_counts.at("DATE"), 40u);
  EXPECT_DOUBLE_EQ(stats.mean_entities_per_type, 40.0);
}

}  // namespace
}  // namespace undersense
