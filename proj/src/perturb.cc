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

#include "undersense/perturb.h"

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "undersense/errors.h"
#include "undersense/json_util.h"

namespace undersense {

using nlohmann::json;

namespace {

bool IsWordByte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) || u >= 0x80;
}

std::vector<std::string> SplitOnSpaces(std::string_view text) {
  std::vector<std::string> parts;
  size_t start = 0;
  while (start < text.size()) {
    const size_t end = text.find(' ', start);
    const size_t stop = end == std::string_view::npos ? text.size() : end;
    if (stop > start) parts.emplace_back(text.substr(start, stop - start));
    start = stop + 1;
  }
  return parts;
}

// Fisher-Yates shuffle of [0, n) drawn one element at a time. Touched
// positions live in a hash map so a draw costs O(1) regardless of n.
class LazyPermutation {
 public:
  explicit LazyPermutation(size_t n) : n_(n) {}

  std::optional<size_t> Next(Rng& rng) {
    if (next_ >= n_) return std::nullopt;
    const size_t j = next_ + rng.UniformIndex(n_ - next_);
    const size_t value_j = ValueAt(j);
    moved_[j] = ValueAt(next_);
    ++next_;
    return value_j;
  }

 private:
  size_t ValueAt(size_t i) const {
    const auto it = moved_.find(i);
    return it == moved_.end() ? i : it->second;
  }

  size_t n_;
  size_t next_ = 0;
  std::unordered_map<size_t, size_t> moved_;
};

struct NewToken {
  std::string text;
  std::string pos;
};

}  // namespace

std::string_view KindName(PerturbationKind kind) {
  return kind == PerturbationKind::kNamedEntity ? "NE" : "POS";
}

PerturbationKind ParseKind(std::string_view name) {
  std::string upper(name);
  for (char& c : upper) c = static_cast<char>(std::toupper(c));
  if (upper == "NE") return PerturbationKind::kNamedEntity;
  if (upper == "POS") return PerturbationKind::kPartOfSpeech;
  throw ContractViolation("unknown perturbation kind '" + std::string(name) +
                          "' (expected NE or POS)");
}

json EditToJson(const Edit& edit) {
  return {{"kind", KindName(edit.kind)},
          {"target", edit.target},
          {"original", edit.original},
          {"replacement", edit.replacement}};
}

Edit EditFromJson(const json& item) {
  Edit edit;
  try {
    edit.kind = ParseKind(RequireString(item, "kind"));
  } catch (const ContractViolation& e) {
    throw FormatError(e.what());
  }
  edit.target = RequireIndex(item, "target");
  edit.original = RequireString(item, "original");
  edit.replacement = RequireString(item, "replacement");
  return edit;
}

Edit ReverseEdit(const Edit& edit) {
  return Edit{edit.kind, edit.target, edit.replacement, edit.original};
}

PerturbedQuestion RootQuestion(const Sample& sample) {
  return PerturbedQuestion{sample.question, {}, sample.id};
}

TaggedQuestion ApplyEdit(const TaggedQuestion& question, const Edit& edit) {
  if (edit.replacement.empty() || edit.replacement == edit.original) {
    throw ContractViolation("edit replacement must differ from the original");
  }
  const std::vector<TaggedToken>& old_tokens = question.tokens;
  size_t replace_begin = 0;
  size_t replace_end = 0;
  std::vector<NewToken> inserted;
  if (edit.kind == PerturbationKind::kNamedEntity) {
    if (edit.target >= question.entities.size()) {
      throw ContractViolation("NE edit target " + std::to_string(edit.target) +
                              " out of range");
    }
    const EntityMention& mention = question.entities[edit.target];
    if (mention.text != edit.original) {
      throw ContractViolation("NE edit original '" + edit.original +
                              "' does not match mention '" + mention.text +
                              "'");
    }
    replace_begin = mention.token_start;
    replace_end = mention.token_end;
    const std::vector<std::string> parts = SplitOnSpaces(edit.replacement);
    if (parts.empty()) throw ContractViolation("blank NE replacement");
    for (size_t i = 0; i < parts.size(); ++i) {
      // Tags come from the token at the same relative position, falling
      // back to the mention's last token.
      const size_t source =
          std::min(replace_begin + i, replace_end - 1);
      inserted.push_back({parts[i], old_tokens[source].pos});
    }
  } else {
    if (edit.target >= old_tokens.size()) {
      throw ContractViolation("PoS edit target " + std::to_string(edit.target) +
                              " out of range");
    }
    if (old_tokens[edit.target].text != edit.original) {
      throw ContractViolation("PoS edit original '" + edit.original +
                              "' does not match token '" +
                              old_tokens[edit.target].text + "'");
    }
    if (edit.replacement.find_first_of(" \t\n") != std::string::npos) {
      throw ContractViolation("PoS replacement must be a single token");
    }
    replace_begin = edit.target;
    replace_end = edit.target + 1;
    inserted.push_back({edit.replacement, old_tokens[edit.target].pos});
  }

  const std::string_view text = question.text;
  auto gap_after = [&](size_t i) {
    return text.substr(old_tokens[i].char_end,
                       old_tokens[i + 1].char_start - old_tokens[i].char_end);
  };

  TaggedQuestion result;
  result.text.assign(text.substr(0, old_tokens.front().char_start));
  auto append = [&](const std::string& token_text, const std::string& pos) {
    const size_t start = result.text.size();
    result.text += token_text;
    result.tokens.push_back({token_text, pos, start, result.text.size()});
  };
  for (size_t i = 0; i < replace_begin; ++i) {
    append(old_tokens[i].text, old_tokens[i].pos);
    result.text += gap_after(i);
  }
  for (size_t i = 0; i < inserted.size(); ++i) {
    if (i > 0) result.text.push_back(' ');
    append(inserted[i].text, inserted[i].pos);
  }
  for (size_t i = replace_end; i < old_tokens.size(); ++i) {
    result.text += gap_after(i - 1);
    append(old_tokens[i].text, old_tokens[i].pos);
  }
  result.text += text.substr(old_tokens.back().char_end);

  const long shift = static_cast<long>(inserted.size()) -
                     static_cast<long>(replace_end - replace_begin);
  result.entities = question.entities;
  for (EntityMention& mention : result.entities) {
    if (mention.token_start >= replace_end) {
      mention.token_start = static_cast<size_t>(
          static_cast<long>(mention.token_start) + shift);
      mention.token_end =
          static_cast<size_t>(static_cast<long>(mention.token_end) + shift);
    } else if (edit.kind == PerturbationKind::kNamedEntity &&
               mention.token_start == replace_begin) {
      mention.token_end = replace_begin + inserted.size();
      mention.text = edit.replacement;
    } else if (mention.token_start <= replace_begin &&
               replace_begin < mention.token_end) {
      // PoS swap inside a mention.
      mention.text =
          JoinTokens(result.tokens, mention.token_start, mention.token_end);
    }
  }
  return result;
}

PerturbedQuestion ApplyEdit(const PerturbedQuestion& question,
                            const Edit& edit) {
  PerturbedQuestion result;
  result.question = ApplyEdit(question.question, edit);
  result.edits = question.edits;
  result.edits.push_back(edit);
  result.parent_id = question.parent_id;
  return result;
}

bool ContainsWholePhrase(std::string_view text, std::string_view phrase) {
  if (phrase.empty()) return false;
  for (size_t at = text.find(phrase); at != std::string_view::npos;
       at = text.find(phrase, at + 1)) {
    const bool left_ok = at == 0 || !IsWordByte(text[at - 1]) ||
                         !IsWordByte(phrase.front());
    const size_t end = at + phrase.size();
    const bool right_ok = end == text.size() || !IsWordByte(text[end]) ||
                          !IsWordByte(phrase.back());
    if (left_ok && right_ok) return true;
  }
  return false;
}

CandidateSpace::CandidateSpace(PerturbationKind kind,
                               const TaggedQuestion& question,
                               const PerturbationLexicon& lexicon,
                               const PerturbOptions& options,
                               std::string_view context)
    : kind_(kind),
      exclude_context_matches_(options.exclude_context_matches),
      context_(context) {
  if (kind == PerturbationKind::kNamedEntity) {
    for (size_t m = 0; m < question.entities.size(); ++m) {
      const EntityMention& mention = question.entities[m];
      const auto replacements = lexicon.EntitiesOfType(mention.type);
      if (!replacements.empty()) {
        positions_.push_back({m, mention.text, replacements});
      }
    }
  } else {
    std::vector<bool> inside_entity(question.tokens.size(), false);
    if (options.protect_entities) {
      for (const EntityMention& mention : question.entities) {
        for (size_t t = mention.token_start; t < mention.token_end; ++t) {
          inside_entity[t] = true;
        }
      }
    }
    for (size_t t = 0; t < question.tokens.size(); ++t) {
      const TaggedToken& token = question.tokens[t];
      if (inside_entity[t] || lexicon.IsExcludedTag(token.pos)) continue;
      const auto replacements = lexicon.TokensOfTag(token.pos);
      if (!replacements.empty()) {
        positions_.push_back({t, token.text, replacements});
      }
    }
  }
  offsets_.reserve(positions_.size());
  for (const Position& position : positions_) {
    offsets_.push_back(raw_size_);
    raw_size_ += position.replacements.size();
  }
}

std::optional<Edit> CandidateSpace::EditAt(size_t raw_index) const {
  if (raw_index >= raw_size_) {
    throw ContractViolation("candidate index out of range");
  }
  const auto it =
      std::upper_bound(offsets_.begin(), offsets_.end(), raw_index);
  const size_t p = static_cast<size_t>(it - offsets_.begin()) - 1;
  const Position& position = positions_[p];
  const std::string& replacement =
      position.replacements[raw_index - offsets_[p]];
  if (replacement == position.original) return std::nullopt;
  if (exclude_context_matches_ && ContainsWholePhrase(context_, replacement)) {
    return std::nullopt;
  }
  return Edit{kind_, position.target, position.original, replacement};
}

std::vector<Edit> CandidateSpace::AllEdits() const {
  std::vector<Edit> edits;
  for (size_t i = 0; i < raw_size_; ++i) {
    if (auto edit = EditAt(i)) edits.push_back(std::move(*edit));
  }
  return edits;
}

std::vector<PerturbedQuestion> SampleCandidates(
    PerturbationKind kind, const PerturbedQuestion& question,
    const PerturbationLexicon& lexicon, size_t eta, Rng& rng,
    const PerturbOptions& options, std::string_view context) {
  if (eta == 0) throw ContractViolation("eta must be at least 1");
  const CandidateSpace space(kind, question.question, lexicon, options,
                             context);
  std::vector<PerturbedQuestion> out;
  std::unordered_set<std::string> seen = {question.question.text};
  LazyPermutation permutation(space.raw_size());
  while (out.size() < eta) {
    const std::optional<size_t> index = permutation.Next(rng);
    if (!index) break;
    const std::optional<Edit> edit = space.EditAt(*index);
    if (!edit) continue;
    PerturbedQuestion variant = ApplyEdit(question, *edit);
    if (!seen.insert(variant.question.text).second) continue;
    out.push_back(std::move(variant));
  }
  return out;
}

}  // namespace undersense
