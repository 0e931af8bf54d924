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

#include "undersense/tagged_text.h"

#include <cctype>
#include <fstream>
#include <set>

#include "undersense/errors.h"
#include "undersense/json_util.h"
#include "undersense/utf8.h"

namespace undersense {

using nlohmann::json;

std::string NormalizeWhitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string JoinTokens(const std::vector<TaggedToken>& tokens, size_t begin,
                       size_t end) {
  std::string out;
  for (size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i].text;
  }
  return out;
}

void ValidateMentions(const std::vector<TaggedToken>& tokens,
                      const std::vector<EntityMention>& entities) {
  size_t previous_end = 0;
  for (size_t m = 0; m < entities.size(); ++m) {
    const EntityMention& mention = entities[m];
    const std::string where = "entity " + std::to_string(m) + ": ";
    if (mention.token_start >= mention.token_end ||
        mention.token_end > tokens.size()) {
      throw FormatError(where + "token span out of range");
    }
    if (mention.token_start < previous_end) {
      throw FormatError(where + "overlaps or precedes the previous mention");
    }
    if (mention.type.empty()) throw FormatError(where + "empty type");
    if (mention.text !=
        JoinTokens(tokens, mention.token_start, mention.token_end)) {
      throw FormatError(where + "text '" + mention.text +
                        "' does not match its tokens");
    }
    previous_end = mention.token_end;
  }
}

void ValidateTaggedQuestion(const TaggedQuestion& question) {
  size_t previous_end = 0;
  for (size_t i = 0; i < question.tokens.size(); ++i) {
    const TaggedToken& token = question.tokens[i];
    const std::string where = "token " + std::to_string(i) + ": ";
    if (token.char_start >= token.char_end) {
      throw FormatError(where + "empty character span");
    }
    if (i > 0 && token.char_start < previous_end) {
      throw FormatError(where + "offsets not increasing");
    }
    if (token.char_end > question.text.size() ||
        question.text.compare(token.char_start,
                              token.char_end - token.char_start,
                              token.text) != 0) {
      throw FormatError(where + "text does not match the question at its "
                                "offsets");
    }
    if (token.pos.empty()) throw FormatError(where + "empty PoS tag");
    previous_end = token.char_end;
  }
  ValidateMentions(question.tokens, question.entities);
}

json TokensToJson(const std::vector<TaggedToken>& tokens,
                  std::optional<std::string_view> parent) {
  json array = json::array();
  std::optional<OffsetMap> offsets;
  if (parent) offsets.emplace(*parent);
  for (const TaggedToken& token : tokens) {
    const size_t start =
        offsets ? offsets->ToCodepoint(token.char_start) : token.char_start;
    const size_t end =
        offsets ? offsets->ToCodepoint(token.char_end) : token.char_end;
    array.push_back(
        {{"text", token.text}, {"pos", token.pos}, {"start", start},
         {"end", end}});
  }
  return array;
}

std::vector<TaggedToken> TokensFromJson(
    const json& array, std::optional<std::string_view> parent) {
  if (!array.is_array()) throw FormatError("tokens: expected an array");
  std::optional<OffsetMap> offsets;
  if (parent) offsets.emplace(*parent);
  std::vector<TaggedToken> tokens;
  tokens.reserve(array.size());
  size_t previous_end = 0;
  for (const json& item : array) {
    TaggedToken token;
    token.text = RequireString(item, "text");
    token.pos = RequireString(item, "pos");
    const size_t start = RequireIndex(item, "start");
    const size_t end = RequireIndex(item, "end");
    const std::string where = "token " + std::to_string(tokens.size()) + ": ";
    if (start >= end) throw FormatError(where + "empty character span");
    if (!tokens.empty() && start < previous_end) {
      throw FormatError(where + "offsets not increasing");
    }
    if (token.pos.empty()) throw FormatError(where + "empty PoS tag");
    if (offsets) {
      token.char_start = offsets->ToByte(start);
      token.char_end = offsets->ToByte(end);
      if (parent->substr(token.char_start,
                         token.char_end - token.char_start) != token.text) {
        throw FormatError(where + "text does not match the parent string");
      }
    } else {
      if (CodepointCount(token.text) != end - start) {
        throw FormatError(where + "offsets disagree with the token length");
      }
      token.char_start = start;
      token.char_end = end;
    }
    previous_end = end;
    tokens.push_back(std::move(token));
  }
  return tokens;
}

json EntitiesToJson(const std::vector<EntityMention>& entities) {
  json array = json::array();
  for (const EntityMention& mention : entities) {
    array.push_back({{"text", mention.text},
                     {"type", mention.type},
                     {"tok_start", mention.token_start},
                     {"tok_end", mention.token_end}});
  }
  return array;
}

std::vector<EntityMention> EntitiesFromJson(const json& array) {
  if (!array.is_array()) throw FormatError("entities: expected an array");
  std::vector<EntityMention> entities;
  entities.reserve(array.size());
  for (const json& item : array) {
    EntityMention mention;
    mention.text = NormalizeWhitespace(RequireString(item, "text"));
    mention.type = RequireString(item, "type");
    mention.token_start = RequireIndex(item, "tok_start");
    mention.token_end = RequireIndex(item, "tok_end");
    entities.push_back(std::move(mention));
  }
  return entities;
}

json SampleToJson(const Sample& sample) {
  const OffsetMap context_offsets(sample.context);
  json answers = json::array();
  for (const Answer& answer : sample.answers) {
    answers.push_back(
        {{"text", answer.text},
         {"char_start", context_offsets.ToCodepoint(answer.char_start)}});
  }
  return {{"id", sample.id},
          {"context", sample.context},
          {"question", sample.question.text},
          {"question_tokens",
           TokensToJson(sample.question.tokens, sample.question.text)},
          {"question_entities", EntitiesToJson(sample.question.entities)},
          {"answers", std::move(answers)},
          {"is_impossible", sample.is_impossible}};
}

Sample SampleFromJson(const json& item) {
  Sample sample;
  sample.id = RequireString(item, "id");
  sample.context = RequireString(item, "context");
  sample.question.text = RequireString(item, "question");
  sample.question.tokens =
      TokensFromJson(RequireField(item, "question_tokens"),
                     std::string_view(sample.question.text));
  sample.question.entities =
      EntitiesFromJson(RequireField(item, "question_entities"));
  ValidateMentions(sample.question.tokens, sample.question.entities);
  const OffsetMap context_offsets(sample.context);
  const json& answers = RequireField(item, "answers");
  if (!answers.is_array()) throw FormatError("answers: expected an array");
  for (const json& answer_json : answers) {
    Answer answer;
    answer.text = RequireString(answer_json, "text");
    answer.char_start =
        context_offsets.ToByte(RequireIndex(answer_json, "char_start"));
    if (sample.context.compare(answer.char_start, answer.text.size(),
                               answer.text) != 0) {
      throw FormatError("answer '" + answer.text +
                        "' does not occur at its offset");
    }
    sample.answers.push_back(std::move(answer));
  }
  const auto impossible = item.find("is_impossible");
  sample.is_impossible =
      impossible != item.end() && impossible->is_boolean() &&
      impossible->get<bool>();
  return sample;
}

DatasetReadResult ReadDataset(std::istream& in) {
  DatasetReadResult result;
  std::set<std::string> ids;
  std::string line;
  size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Sample sample = SampleFromJson(ParseJson(line));
      if (!ids.insert(sample.id).second) {
        throw FormatError("duplicate sample id '" + sample.id + "'");
      }
      result.samples.push_back(std::move(sample));
    } catch (const std::exception& e) {
      result.errors.push_back("line " + std::to_string(line_number) + ": " +
                              e.what());
    }
  }
  return result;
}

DatasetReadResult ReadDatasetFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file '" + path + "'");
  return ReadDataset(in);
}

void WriteDataset(std::ostream& out, const std::vector<Sample>& samples) {
  for (const Sample& sample : samples) {
    out << SampleToJson(sample).dump() << '\n';
  }
}

}  // namespace undersense
