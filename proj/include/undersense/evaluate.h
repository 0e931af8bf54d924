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

// Metrics over attack outcomes: adversarial error rate, budget curves,
// SQuAD-style EM/F1, grouped characteristics and transferability.

#ifndef UNDERSENSE_EVALUATE_H_
#define UNDERSENSE_EVALUATE_H_

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "undersense/attack.h"
#include "undersense/lexicon.h"
#include "undersense/outcome_io.h"
#include "undersense/scoring.h"
#include "undersense/tagged_text.h"

namespace undersense {

// vulnerable / (vulnerable + robust); nullopt ("undefined") when no sample
// was attacked.
std::optional<double> AdversarialErrorRate(std::span<const AttackOutcome> outcomes);

struct CurvePoint {
  size_t eta = 0;
  size_t rho = 0;
  OutcomeCounts counts;

  std::optional<double> error_rate() const { return counts.error_rate(); }
};

// Outcomes of one run at (max eta, max rho) restricted to a smaller budget:
// a sample counts as vulnerable at (eta, rho) when its first success came
// at depth <= rho from candidates within the first eta draws. Throws
// ContractViolation when a grid value exceeds the run's budget.
std::vector<CurvePoint> DeriveCurve(std::span<const AttackOutcome> outcomes,
                                    const AttackConfig& run_config,
                                    std::span<const size_t> eta_grid,
                                    std::span<const size_t> rho_grid);

// Derives the whole grid from one run at the largest budget, or attacks
// once per grid point when `independent` is set.
std::vector<CurvePoint> ErrorRateCurve(std::span<const Sample> samples,
                                       const PerturbationLexicon& lexicon,
                                       const AttackConfig& base, Scorer& scorer,
                                       std::span<const size_t> eta_grid,
                                       std::span<const size_t> rho_grid,
                                       size_t workers, bool independent);

nlohmann::json CurveToJson(std::span<const CurvePoint> points);
void WriteCurveCsv(std::ostream& out, std::span<const CurvePoint> points);

// Lowercase, drop punctuation and the articles a/an/the, collapse
// whitespace.
std::string NormalizeAnswer(std::string_view text);

struct EmF1 {
  double em = 0.0;
  double f1 = 0.0;
};

// Best score over `golds`. NoAnswer is the empty string; an empty gold list
// means the question is unanswerable.
EmF1 ScoreAnswer(std::string_view predicted, std::span<const std::string> golds);

// Gold answer texts of a sample; empty for unanswerable ones.
std::vector<std::string> GoldAnswers(const Sample& sample);

// What, Who, When, Where, Which, Why, How or Other, from the first wh-word.
std::string QuestionType(const TaggedQuestion& question);

struct EvalReport {
  OutcomeCounts counts;
  nlohmann::json body;
  std::vector<std::string> warnings;

  nlohmann::json ToJson() const;
  void WriteHistogramCsv(std::ostream& out) const;
};

// `predictions` maps sample ids to predicted answer text ("" = NoAnswer).
// When a sample has no entry, the prediction is read off its outcome.
EvalReport CharacteristicsReport(
    std::span<const AttackOutcome> outcomes, std::span<const Sample> samples,
    const std::map<std::string, std::string, std::less<>>& predictions = {});

struct TransferReport {
  size_t source_vulnerable = 0;
  size_t transferred = 0;
  std::optional<double> transfer_rate;
  // Set when a lexicon was given: B's own error rate on A's vulnerable
  // samples.
  std::optional<OutcomeCounts> target_counts;

  nlohmann::json ToJson() const;
};

// Replays A's successful adversarial questions against scorer B: a sample
// transfers when B's probability for its own answer to the original
// question strictly rises under the adversarial question.
TransferReport TransferEval(std::span<const AttackOutcome> source,
                            std::span<const Sample> samples, Scorer& target,
                            const PerturbationLexicon* lexicon = nullptr,
                            const AttackConfig* config = nullptr,
                            size_t workers = 1);

}  // namespace undersense

#endif  // UNDERSENSE_EVALUATE_H_
