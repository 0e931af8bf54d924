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

// Type-consistent single-edit variants of a question.
//
// The candidate space of a question is the list of (position, replacement)
// pairs: every entity mention paired with every other entity of its type, or
// every eligible token paired with every other token of its tag. Sampling
// walks a seeded random permutation of that list and keeps the first `eta`
// usable pairs, so for a fixed generator seed the output for a smaller eta
// is always a prefix of the output for a larger one.

#ifndef UNDERSENSE_PERTURB_H_
#define UNDERSENSE_PERTURB_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "undersense/lexicon.h"
#include "undersense/rng.h"
#include "undersense/tagged_text.h"

namespace undersense {

enum class PerturbationKind { kNamedEntity, kPartOfSpeech };

std::string_view KindName(PerturbationKind kind);
// Accepts "NE"/"POS" (any case). Throws ContractViolation otherwise.
PerturbationKind ParseKind(std::string_view name);

struct Edit {
  PerturbationKind kind = PerturbationKind::kNamedEntity;
  // Mention index for NE edits, token index for PoS edits.
  size_t target = 0;
  std::string original;
  std::string replacement;

  bool operator==(const Edit&) const = default;
};

nlohmann::json EditToJson(const Edit& edit);
Edit EditFromJson(const nlohmann::json& json);

// The inverse edit; applying it after `edit` restores the question.
Edit ReverseEdit(const Edit& edit);

struct PerturbedQuestion {
  TaggedQuestion question;
  std::vector<Edit> edits;
  std::string parent_id;
};

// Depth-0 node of a search: the sample's own question with no edits.
PerturbedQuestion RootQuestion(const Sample& sample);

// Replaces one mention (NE) or one token (PoS). Tokens are kept as tokens,
// the whitespace between untouched tokens is preserved, and the tokens of a
// multi-token replacement are joined by single spaces. New tokens inherit
// the tags of the tokens they replace and an NE replacement keeps the
// mention's type. Throws ContractViolation when the edit does not apply.
TaggedQuestion ApplyEdit(const TaggedQuestion& question, const Edit& edit);
PerturbedQuestion ApplyEdit(const PerturbedQuestion& question,
                            const Edit& edit);

struct PerturbOptions {
  // Skip replacements that already occur in the context passage.
  bool exclude_context_matches = false;
  // Never PoS-swap tokens inside entity mentions.
  bool protect_entities = false;
};

class CandidateSpace {
 public:
  // `context` is only consulted when exclude_context_matches is set.
  CandidateSpace(PerturbationKind kind, const TaggedQuestion& question,
                 const PerturbationLexicon& lexicon,
                 const PerturbOptions& options, std::string_view context);

  // Number of (position, replacement) pairs before filtering.
  size_t raw_size() const { return raw_size_; }

  // The edit for a raw pair, or nullopt if the pair is a no-op or excluded
  // by the options.
  std::optional<Edit> EditAt(size_t raw_index) const;

  // Every usable edit in enumeration order.
  std::vector<Edit> AllEdits() const;

 private:
  struct Position {
    size_t target;
    std::string original;
    std::span<const std::string> replacements;
  };

  PerturbationKind kind_;
  std::vector<Position> positions_;
  std::vector<size_t> offsets_;  // exclusive prefix sums of replacement counts
  size_t raw_size_ = 0;
  bool exclude_context_matches_;
  std::string_view context_;
};

// Up to `eta` distinct single-edit variants of `question`, drawn uniformly
// without replacement. Variants whose text equals the parent are dropped.
// Empty when the question has nothing to perturb.
std::vector<PerturbedQuestion> SampleCandidates(
    PerturbationKind kind, const PerturbedQuestion& question,
    const PerturbationLexicon& lexicon, size_t eta, Rng& rng,
    const PerturbOptions& options = {}, std::string_view context = {});

inline std::vector<PerturbedQuestion> NeCandidates(
    const PerturbedQuestion& question, const PerturbationLexicon& lexicon,
    size_t eta, Rng& rng, const PerturbOptions& options = {},
    std::string_view context = {}) {
  return SampleCandidates(PerturbationKind::kNamedEntity, question, lexicon,
                          eta, rng, options, context);
}

inline std::vector<PerturbedQuestion> PosCandidates(
    const PerturbedQuestion& question, const PerturbationLexicon& lexicon,
    size_t eta, Rng& rng, const PerturbOptions& options = {},
    std::string_view context = {}) {
  return SampleCandidates(PerturbationKind::kPartOfSpeech, question, lexicon,
                          eta, rng, options, context);
}

// True when `phrase` occurs in `text` delimited by non-alphanumerics.
bool ContainsWholePhrase(std::string_view text, std::string_view phrase);

}  // namespace undersense

#endif  // UNDERSENSE_PERTURB_H_
