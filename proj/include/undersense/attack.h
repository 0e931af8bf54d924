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

// Budgeted beam search for undersensitivity attacks: find a perturbed
// question x' under which the model gives its original answer y a strictly
// higher probability, P(y|x') > P(y|x).

#ifndef UNDERSENSE_ATTACK_H_
#define UNDERSENSE_ATTACK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "undersense/lexicon.h"
#include "undersense/perturb.h"
#include "undersense/scoring.h"
#include "undersense/tagged_text.h"

namespace undersense {

struct AttackConfig {
  size_t eta = 32;  // candidates per beam item per depth
  size_t rho = 1;   // maximum number of chained edits
  size_t beam_width = 5;
  PerturbationKind kind = PerturbationKind::kNamedEntity;
  uint64_t seed = 0;
  PerturbOptions perturb;
  bool record_trace = false;

  // Throws ContractViolation when eta, rho or beam_width is zero.
  void Validate() const;
  // b * rho * eta, saturating.
  size_t Budget() const;

  nlohmann::json ToJson() const;
  static AttackConfig FromJson(const nlohmann::json& json);

  bool operator==(const AttackConfig& other) const {
    return ToJson() == other.ToJson();
  }
};

enum class AttackStatus {
  kVulnerable,
  kRobust,
  kSkippedNoAnswer,
  kSkippedNoCandidates,
  kError,
};

std::string_view StatusName(AttackStatus status);
AttackStatus ParseStatus(std::string_view name);  // throws FormatError

struct DepthSummary {
  size_t depth = 0;
  size_t candidates = 0;  // distinct texts drawn at this depth
  size_t evaluations = 0;  // new scorer evaluations
  double best_delta = 0.0;
  std::vector<std::string> beam;  // texts kept for the next depth

  bool operator==(const DepthSummary&) const = default;
};

struct AttackOutcome {
  std::string sample_id;
  AttackStatus status = AttackStatus::kRobust;
  std::optional<SpanRef> original_span;
  double p_orig = 0.0;
  // Best perturbed question found: the winner when Vulnerable, the highest
  // delta seen when Robust.
  std::optional<std::string> adversarial_question;
  std::vector<Edit> edits;
  double p_adv = 0.0;
  double delta = 0.0;
  size_t evals_used = 0;
  // Depth of the first successful candidate; 0 when none.
  size_t found_at_depth = 0;
  // Smallest eta at which the winning depth still contains a success,
  // counting a candidate by the largest sample rank along its lineage.
  size_t min_eta = 0;
  std::vector<DepthSummary> trace;
  std::string error;

  bool operator==(const AttackOutcome&) const = default;
};

// Offsets are written as code points of `context`; without a context
// (e.g. when only statuses are needed) they pass through unconverted.
nlohmann::json OutcomeToJson(const AttackOutcome& outcome,
                             std::optional<std::string_view> context);
AttackOutcome OutcomeFromJson(const nlohmann::json& json,
                              std::optional<std::string_view> context);

AttackOutcome AttackSample(const Sample& sample,
                           const PerturbationLexicon& lexicon,
                           const AttackConfig& config, Scorer& scorer);

using OutcomeCallback = std::function<void(size_t index, const AttackOutcome&)>;

// Attacks every sample with `workers` threads. Outcomes are returned (and
// passed to `on_outcome`, if set) in input order. A sample that throws
// becomes a kError outcome.
std::vector<AttackOutcome> AttackDataset(std::span<const Sample> samples,
                                         const PerturbationLexicon& lexicon,
                                         const AttackConfig& config,
                                         Scorer& scorer, size_t workers,
                                         const OutcomeCallback& on_outcome = {});

inline constexpr size_t kBruteForceCap = 10000;

// Exhaustive search over every distinct text reachable in at most `rho`
// edits. Throws ContractViolation naming the space size when more than
// `cap` texts would have to be scored.
AttackOutcome BruteForceAttack(const Sample& sample,
                               const PerturbationLexicon& lexicon,
                               PerturbationKind kind, size_t rho,
                               Scorer& scorer, const PerturbOptions& options = {},
                               size_t cap = kBruteForceCap);

// Tries unrelated questions from a fixed collection instead of
// perturbations. Texts equal to the sample's question are still scored,
// and give delta 0.
AttackOutcome CollectionAttack(const Sample& sample,
                               std::span<const std::string> collection,
                               Scorer& scorer);

struct CollectionYield {
  size_t attacked = 0;  // vulnerable + robust
  size_t vulnerable = 0;
  size_t questions_scored = 0;
  // vulnerable / attacked; nullopt when nothing was attacked.
  std::optional<double> yield;

  nlohmann::json ToJson() const;
};

CollectionYield SummarizeCollection(std::span<const AttackOutcome> outcomes);

}  // namespace undersense

#endif  // UNDERSENSE_ATTACK_H_
