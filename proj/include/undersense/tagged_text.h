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

// Externally tagged text: tokens with Penn-Treebank tags, entity mentions
// over token ranges, and the QA samples built from them. Tagging itself is
// never done here.

#ifndef UNDERSENSE_TAGGED_TEXT_H_
#define UNDERSENSE_TAGGED_TEXT_H_

#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace undersense {

struct TaggedToken {
  std::string text;
  std::string pos;
  // Byte offsets into the parent string, end exclusive.
  size_t char_start = 0;
  size_t char_end = 0;

  bool operator==(const TaggedToken&) const = default;
};

struct EntityMention {
  std::string text;
  std::string type;
  size_t token_start = 0;
  size_t token_end = 0;

  bool operator==(const EntityMention&) const = default;
};

struct TaggedQuestion {
  std::string text;
  std::vector<TaggedToken> tokens;
  std::vector<EntityMention> entities;

  bool operator==(const TaggedQuestion&) const = default;
};

struct Answer {
  std::string text;
  size_t char_start = 0;  // byte offset into the context

  bool operator==(const Answer&) const = default;
};

struct Sample {
  std::string id;
  std::string context;
  TaggedQuestion question;
  std::vector<Answer> answers;
  bool is_impossible = false;
};

// Collapses internal whitespace runs to one space and trims both ends.
std::string NormalizeWhitespace(std::string_view text);

// Space-joined token texts over [begin, end).
std::string JoinTokens(const std::vector<TaggedToken>& tokens, size_t begin,
                       size_t end);

// Throws FormatError describing the first violated invariant: token offsets
// must be increasing and match the text, tags non-empty, mentions in range,
// non-overlapping and equal to their space-joined tokens.
void ValidateTaggedQuestion(const TaggedQuestion& question);

// Mentions must be sorted, non-overlapping and inside [0, token_count).
void ValidateMentions(const std::vector<TaggedToken>& tokens,
                      const std::vector<EntityMention>& entities);

// JSON forms use code point offsets (see utf8.h). Token JSON is
// {"text","pos","start","end"}; entity JSON is
// {"text","type","tok_start","tok_end"}. Without a parent string the
// offsets are passed through unconverted and only checked for consistency
// with the token length.
nlohmann::json TokensToJson(const std::vector<TaggedToken>& tokens,
                            std::optional<std::string_view> parent);
std::vector<TaggedToken> TokensFromJson(
    const nlohmann::json& array, std::optional<std::string_view> parent);
nlohmann::json EntitiesToJson(const std::vector<EntityMention>& entities);
std::vector<EntityMention> EntitiesFromJson(const nlohmann::json& array);

nlohmann::json SampleToJson(const Sample& sample);
Sample SampleFromJson(const nlohmann::json& json);

struct DatasetReadResult {
  std::vector<Sample> samples;
  // "line N: message" for every rejected line.
  std::vector<std::string> errors;
};

// Reads the JSON-lines dataset format. Malformed lines are reported and
// skipped; duplicate ids are rejected.
DatasetReadResult ReadDataset(std::istream& in);
DatasetReadResult ReadDatasetFile(const std::string& path);
void WriteDataset(std::ostream& out, const std::vector<Sample>& samples);

}  // namespace undersense

#endif  // UNDERSENSE_TAGGED_TEXT_H_
