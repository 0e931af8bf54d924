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

#include <algorithm>
#include <fstream>

#include "undersense/digest.h"
#include "undersense/errors.h"
#include "undersense/json_util.h"
#include "undersense/rng.h"

namespace undersense {

using nlohmann::json;

namespace {

void SortUnique(std::vector<std::string>& values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
}

json VocabularyToJson(const PerturbationLexicon::Vocabulary& vocabulary) {
  json object = json::object();
  for (const auto& [key, values] : vocabulary) object[key] = values;
  return object;
}

PerturbationLexicon::Vocabulary VocabularyFromJson(const json& object,
                                                   const char* name) {
  if (!object.is_object()) {
    throw FormatError(std::string("lexicon: '") + name +
                      "' must be an object");
  }
  PerturbationLexicon::Vocabulary vocabulary;
  for (const auto& [key, values] : object.items()) {
    if (!values.is_array()) {
      throw FormatError(std::string("lexicon: '") + name + "." + key +
                        "' must be an array");
    }
    auto& strings = vocabulary[key];
    for (const json& value : values) {
      if (!value.is_string()) {
        throw FormatError(std::string("lexicon: non-string entry in '") +
                          name + "." + key + "'");
      }
      strings.push_back(value.get<std::string>());
    }
  }
  return vocabulary;
}

std::span<const std::string> Lookup(
    const PerturbationLexicon::Vocabulary& vocabulary, std::string_view key) {
  const auto it = vocabulary.find(key);
  if (it == vocabulary.end()) return {};
  return it->second;
}

// Half of `values` (floor) goes to `heldout`, the rest to `train`.
void SplitValues(const std::vector<std::string>& values, Rng& rng,
                 std::vector<std::string>& train,
                 std::vector<std::string>& heldout) {
  std::vector<std::string> shuffled = values;
  rng.Shuffle(shuffled);
  const size_t heldout_size = shuffled.size() / 2;
  heldout.assign(shuffled.begin(), shuffled.begin() + heldout_size);
  train.assign(shuffled.begin() + heldout_size, shuffled.end());
}

}  // namespace

TaggedCorpusRecord CorpusRecordFromJson(const json& item) {
  TaggedCorpusRecord record;
  record.doc_id = RequireString(item, "doc_id");
  record.tokens = TokensFromJson(RequireField(item, "tokens"), std::nullopt);
  record.entities = EntitiesFromJson(RequireField(item, "entities"));
  return record;
}

json CorpusRecordToJson(const TaggedCorpusRecord& record) {
  return {{"doc_id", record.doc_id},
          {"tokens", TokensToJson(record.tokens, std::nullopt)},
          {"entities", EntitiesToJson(record.entities)}};
}

const std::set<std::string, std::less<>>& DefaultExcludedPos() {
  static const std::set<std::string, std::less<>> kExcluded = {
      "IN", "DT", ".", "VBD", "VBZ", "WP", "WRB", "WDT", "CC", "MD", "TO"};
  return kExcluded;
}

PerturbationLexicon::PerturbationLexicon()
    : PerturbationLexicon({}, {}, DefaultExcludedPos()) {}

PerturbationLexicon::PerturbationLexicon(
    Vocabulary entities, Vocabulary pos_tokens,
    std::set<std::string, std::less<>> excluded_pos)
    : excluded_pos_(std::move(excluded_pos)) {
  for (auto& [type, values] : entities) {
    for (std::string& value : values) value = NormalizeWhitespace(value);
    std::erase(values, std::string());
    SortUnique(values);
    if (!values.empty()) entities_.emplace(type, std::move(values));
  }
  for (auto& [tag, values] : pos_tokens) {
    if (excluded_pos_.contains(tag)) continue;
    std::erase(values, std::string());
    SortUnique(values);
    if (!values.empty()) pos_tokens_.emplace(tag, std::move(values));
  }
  const json canonical = {
      {"ne", VocabularyToJson(entities_)},
      {"pos", VocabularyToJson(pos_tokens_)},
      {"excluded_pos",
       std::vector<std::string>(excluded_pos_.begin(), excluded_pos_.end())}};
  fingerprint_ = Sha256Hex(canonical.dump());
}

std::span<const std::string> PerturbationLexicon::EntitiesOfType(
    std::string_view type) const {
  return Lookup(entities_, type);
}

std::span<const std::string> PerturbationLexicon::TokensOfTag(
    std::string_view tag) const {
  return Lookup(pos_tokens_, tag);
}

bool PerturbationLexicon::IsExcludedTag(std::string_view tag) const {
  return excluded_pos_.find(tag) != excluded_pos_.end();
}

json PerturbationLexicon::ToJson() const {
  return {{"ne", VocabularyToJson(entities_)},
          {"pos", VocabularyToJson(pos_tokens_)},
          {"excluded_pos", std::vector<std::string>(excluded_pos_.begin(),
                                                    excluded_pos_.end())},
          {"fingerprint", fingerprint_}};
}

PerturbationLexicon PerturbationLexicon::FromJson(const json& object) {
  std::set<std::string, std::less<>> excluded;
  const json& excluded_json = RequireField(object, "excluded_pos");
  if (!excluded_json.is_array()) {
    throw FormatError("lexicon: 'excluded_pos' must be an array");
  }
  for (const json& tag : excluded_json) {
    if (!tag.is_string()) throw FormatError("lexicon: non-string tag");
    excluded.insert(tag.get<std::string>());
  }
  PerturbationLexicon lexicon(
      VocabularyFromJson(RequireField(object, "ne"), "ne"),
      VocabularyFromJson(RequireField(object, "pos"), "pos"),
      std::move(excluded));
  const auto stored = object.find("fingerprint");
  if (stored != object.end() && stored->is_string() &&
      stored->get<std::string>() != lexicon.fingerprint()) {
    throw FormatError("lexicon: stored fingerprint does not match content");
  }
  return lexicon;
}

PerturbationLexicon ReadLexiconFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open lexicon file '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return PerturbationLexicon::FromJson(ParseJson(text));
}

void WriteLexiconFile(const std::string& path,
                      const PerturbationLexicon& lexicon) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write lexicon file '" + path + "'");
  out << lexicon.ToJson().dump(1) << '\n';
}

LexiconBuilder::LexiconBuilder(std::set<std::string, std::less<>> excluded_pos)
    : excluded_pos_(std::move(excluded_pos)) {}

bool LexiconBuilder::Add(const TaggedCorpusRecord& record, size_t line) {
  try {
    for (size_t i = 0; i < record.tokens.size(); ++i) {
      const TaggedToken& token = record.tokens[i];
      const std::string where = "token " + std::to_string(i) + ": ";
      if (token.text.empty() || token.char_start >= token.char_end) {
        throw FormatError(where + "empty token");
      }
      if (i > 0 && token.char_start < record.tokens[i - 1].char_end) {
        throw FormatError(where + "offsets not increasing");
      }
      if (token.pos.empty()) throw FormatError(where + "empty PoS tag");
      if (token.text.find_first_of(" \t\n\r") != std::string::npos) {
        throw FormatError(where + "token contains whitespace");
      }
    }
    ValidateMentions(record.tokens, record.entities);
  } catch (const FormatError& e) {
    errors_.push_back({line, record.doc_id, e.what()});
    return false;
  }
  for (const EntityMention& mention : record.entities) {
    entities_[mention.type].insert(NormalizeWhitespace(mention.text));
  }
  for (const TaggedToken& token : record.tokens) {
    if (excluded_pos_.contains(token.pos)) continue;
    pos_tokens_[token.pos].insert(token.text);
  }
  ++records_accepted_;
  return true;
}

bool LexiconBuilder::AddJsonLine(std::string_view json_line, size_t line) {
  TaggedCorpusRecord record;
  try {
    const json item = ParseJson(json_line);
    if (item.is_object()) {
      const auto id = item.find("doc_id");
      if (id != item.end() && id->is_string()) record.doc_id = *id;
    }
    record = CorpusRecordFromJson(item);
  } catch (const FormatError& e) {
    errors_.push_back({line, record.doc_id, e.what()});
    return false;
  }
  return Add(record, line);
}

PerturbationLexicon LexiconBuilder::Build() const {
  PerturbationLexicon::Vocabulary entities;
  PerturbationLexicon::Vocabulary pos_tokens;
  for (const auto& [type, values] : entities_) {
    entities[type].assign(values.begin(), values.end());
  }
  for (const auto& [tag, values] : pos_tokens_) {
    pos_tokens[tag].assign(values.begin(), values.end());
  }
  return PerturbationLexicon(std::move(entities), std::move(pos_tokens),
                             excluded_pos_);
}

PerturbationLexicon BuildLexicon(
    std::span<const TaggedCorpusRecord> corpus,
    const std::set<std::string, std::less<>>& excluded_pos,
    std::vector<RecordError>* errors) {
  LexiconBuilder builder(excluded_pos);
  for (const TaggedCorpusRecord& record : corpus) builder.Add(record);
  if (errors != nullptr) *errors = builder.errors();
  return builder.Build();
}

LexiconSplit SplitLexicon(const PerturbationLexicon& lexicon, uint64_t seed) {
  PerturbationLexicon::Vocabulary train_entities, heldout_entities;
  PerturbationLexicon::Vocabulary train_tokens, heldout_tokens;
  LexiconSplit split;
  for (const auto& [type, values] : lexicon.entities()) {
    if (values.size() < 2) {
      train_entities[type] = values;
      split.degenerate_types.push_back(type);
      continue;
    }
    Rng rng(DeriveSeed(seed, {Fnv1a64("ne"), Fnv1a64(type)}));
    SplitValues(values, rng, train_entities[type], heldout_entities[type]);
  }
  for (const auto& [tag, values] : lexicon.pos_tokens()) {
    Rng rng(DeriveSeed(seed, {Fnv1a64("pos"), Fnv1a64(tag)}));
    SplitValues(values, rng, train_tokens[tag], heldout_tokens[tag]);
  }
  split.train = PerturbationLexicon(std::move(train_entities),
                                    std::move(train_tokens),
                                    lexicon.excluded_pos());
  split.heldout = PerturbationLexicon(std::move(heldout_entities),
                                      std::move(heldout_tokens),
                                      lexicon.excluded_pos());
  return split;
}

json LexiconStats::ToJson() const {
  return {{"entity_counts", entity_counts},
          {"token_counts", token_counts},
          {"mean_entities_per_type", mean_entities_per_type},
          {"mean_tokens_per_tag", mean_tokens_per_tag}};
}

LexiconStats ComputeLexiconStats(const PerturbationLexicon& lexicon) {
  LexiconStats stats;
  size_t entity_total = 0;
  size_t token_total = 0;
  for (const auto& [type, values] : lexicon.entities()) {
    stats.entity_counts[type] = values.size();
    entity_total += values.size();
  }
  for (const auto& [tag, values] : lexicon.pos_tokens()) {
    stats.token_counts[tag] = values.size();
    token_total += values.size();
  }
  if (!stats.entity_counts.empty()) {
    stats.mean_entities_per_type =
        static_cast<double>(entity_total) / stats.entity_counts.size();
  }
  if (!stats.token_counts.empty()) {
    stats.mean_tokens_per_tag =
        static_cast<double>(token_total) / stats.token_counts.size();
  }
  return stats;
}

}  // namespace undersense
