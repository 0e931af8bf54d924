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

// Type-indexed replacement vocabularies. Entity strings are collected per
// entity type, single tokens per PoS tag; together they span the NE and PoS
// perturbation spaces.

#ifndef UNDERSENSE_LEXICON_H_
#define UNDERSENSE_LEXICON_H_

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "undersense/tagged_text.h"

namespace undersense {

// One line of the tagged-corpus file. Token offsets index the (absent)
// source document and are only checked for consistency.
struct TaggedCorpusRecord {
  std::string doc_id;
  std::vector<TaggedToken> tokens;
  std::vector<EntityMention> entities;
};

TaggedCorpusRecord CorpusRecordFromJson(const nlohmann::json& json);
nlohmann::json CorpusRecordToJson(const TaggedCorpusRecord& record);

// Tags left out of the PoS perturbation space: prepositions, determiners,
// punctuation, finite verbs, wh-words, conjunctions, modals and "to".
const std::set<std::string, std::less<>>& DefaultExcludedPos();

class PerturbationLexicon {
 public:
  // Values are kept sorted and unique so that seeded sampling does not
  // depend on insertion order or platform.
  using Vocabulary = std::map<std::string, std::vector<std::string>, std::less<>>;

  PerturbationLexicon();
  // Normalizes the inputs: sorts and deduplicates every set, drops empty
  // sets and removes excluded tags from `pos_tokens`.
  PerturbationLexicon(Vocabulary entities, Vocabulary pos_tokens,
                      std::set<std::string, std::less<>> excluded_pos);

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& pos_tokens() const { return pos_tokens_; }
  const std::set<std::string, std::less<>>& excluded_pos() const {
    return excluded_pos_;
  }
  // Hex SHA-256 of the canonical content.
  const std::string& fingerprint() const { return fingerprint_; }

  // Empty when the type/tag is unknown or excluded.
  std::span<const std::string> EntitiesOfType(std::string_view type) const;
  std::span<const std::string> TokensOfTag(std::string_view tag) const;
  bool IsExcludedTag(std::string_view tag) const;

  bool empty() const { return entities_.empty() && pos_tokens_.empty(); }

  nlohmann::json ToJson() const;
  // Rejects files whose stored fingerprint disagrees with the content.
  static PerturbationLexicon FromJson(const nlohmann::json& json);

  bool operator==(const PerturbationLexicon& other) const {
    return fingerprint_ == other.fingerprint_;
  }

 private:
  Vocabulary entities_;
  Vocabulary pos_tokens_;
  std::set<std::string, std::less<>> excluded_pos_;
  std::string fingerprint_;
};

PerturbationLexicon ReadLexiconFile(const std::string& path);
void WriteLexiconFile(const std::string& path,
                      const PerturbationLexicon& lexicon);

struct RecordError {
  size_t line = 0;  // 0 when the record did not come from a file
  std::string doc_id;
  std::string message;
};

// Single-writer fold over a corpus stream. Malformed records are reported
// and skipped.
class LexiconBuilder {
 public:
  explicit LexiconBuilder(std::set<std::string, std::less<>> excluded_pos =
                              DefaultExcludedPos());

  // Returns false (and records an error) when the record is malformed.
  bool Add(const TaggedCorpusRecord& record, size_t line = 0);
  // Parses one JSON line; errors are recorded against `line`.
  bool AddJsonLine(std::string_view json_line, size_t line);

  PerturbationLexicon Build() const;

  const std::vector<RecordError>& errors() const { return errors_; }
  size_t records_accepted() const { return records_accepted_; }

 private:
  std::set<std::string, std::less<>> excluded_pos_;
  std::map<std::string, std::set<std::string>, std::less<>> entities_;
  std::map<std::string, std::set<std::string>, std::less<>> pos_tokens_;
  std::vector<RecordError> errors_;
  size_t records_accepted_ = 0;
};

PerturbationLexicon BuildLexicon(
    std::span<const TaggedCorpusRecord> corpus,
    const std::set<std::string, std::less<>>& excluded_pos =
        DefaultExcludedPos(),
    std::vector<RecordError>* errors = nullptr);

struct LexiconSplit {
  PerturbationLexicon train;
  PerturbationLexicon heldout;
  // Entity types with fewer than two strings; kept whole in `train`.
  std::vector<std::string> degenerate_types;
};

// Splits every entity type and PoS tag into two disjoint halves; the
// held-out half gets floor(n/2) strings. Deterministic in `seed`.
LexiconSplit SplitLexicon(const PerturbationLexicon& lexicon, uint64_t seed);

struct LexiconStats {
  std::map<std::string, size_t> entity_counts;
  std::map<std::string, size_t> token_counts;
  double mean_entities_per_type = 0.0;
  double mean_tokens_per_tag = 0.0;

  nlohmann::json ToJson() const;
};

LexiconStats ComputeLexiconStats(const PerturbationLexicon& lexicon);

}  // namespace undersense

#endif  // UNDERSENSE_LEXICON_H_
