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

// Defense data and defended training of the toy model. Defense examples are
// perturbed questions labelled NoAnswer; they are added to training with
// weight lambda: L = L(train) + lambda * L(defense).

#ifndef UNDERSENSE_DEFENSE_H_
#define UNDERSENSE_DEFENSE_H_

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "undersense/attack.h"
#include "undersense/lexicon.h"
#include "undersense/perturb.h"
#include "undersense/scoring.h"
#include "undersense/tagged_text.h"
#include "undersense/toy_model.h"

namespace undersense {

enum class DefenseMode { kAugment, kAdversarial };
enum class Provenance { kAugmentation, kMined };

std::string_view ModeName(DefenseMode mode);
DefenseMode ParseMode(std::string_view name);  // augment | mine | adversarial

// A perturbed question paired with the NoAnswer label.
struct DefenseExample {
  std::string context;
  std::string question;
  Provenance provenance = Provenance::kAugmentation;
  std::string source_sample_id;
  std::vector<Edit> edits;

  bool operator==(const DefenseExample&) const = default;
};

// Tells the trainer to use an ordinary training sample in place of a mined
// example that could not be found.
struct FallbackMarker {
  std::string source_sample_id;
  std::string note;

  bool operator==(const FallbackMarker&) const = default;
};

using DefenseItem = std::variant<DefenseExample, FallbackMarker>;

// JSON lines: {"context", "question", "label": null, "provenance",
// "source_sample_id", "edits"} or {"fallback": true, "source_sample_id",
// "note"}.
nlohmann::json DefenseItemToJson(const DefenseItem& item);
DefenseItem DefenseItemFromJson(const nlohmann::json& json);
void WriteDefenseItems(std::ostream& out, std::span<const DefenseItem> items);
std::vector<DefenseItem> ReadDefenseItems(std::istream& in);

struct DefenseConfig {
  double lambda = 0.25;
  DefenseMode mode = DefenseMode::kAugment;
  size_t k_per_sample = 1;
  PerturbationKind kind = PerturbationKind::kNamedEntity;
  PerturbOptions perturb;
  // Mining budget for adversarial mode.
  size_t mining_eta = 32;
  size_t mining_rho = 1;
  size_t mining_beam_width = 5;
  // Epochs between refreshes of the defense set.
  size_t refresh_epochs = 1;

  void Validate() const;  // throws ContractViolation
  AttackConfig MiningConfig(uint64_t seed) const;
  nlohmann::json ToJson() const;
};

struct AugmentationResult {
  std::vector<DefenseExample> examples;
  size_t skipped = 0;  // samples with nothing to perturb
};

// k distinct depth-1 perturbations per sample, uniform over its candidate
// space. Each sample draws from its own stream of `seed`.
AugmentationResult SampleAugmentation(std::span<const Sample> train,
                                      const PerturbationLexicon& lexicon,
                                      size_t k_per_sample, uint64_t seed,
                                      PerturbationKind kind =
                                          PerturbationKind::kNamedEntity,
                                      const PerturbOptions& options = {});

// Attacks every sample at the mining budget. Successful attacks become
// mined examples; everything else (including scorer errors) a fallback.
std::vector<DefenseItem> MineAdversarial(std::span<const Sample> train,
                                         const PerturbationLexicon& lexicon,
                                         Scorer& scorer,
                                         const AttackConfig& mining,
                                         size_t workers = 1);

inline double CombinedLoss(double base_loss, double defense_loss,
                           double lambda) {
  return base_loss + lambda * defense_loss;
}

struct TrainOptions {
  double learning_rate = 1.0;
  size_t batch_size = 32;
  size_t max_epochs = 200;
  size_t patience = 5;
  uint64_t seed = 0;
  ToyModelParams init;
  size_t workers = 1;

  nlohmann::json ToJson() const;
};

struct EpochLog {
  size_t epoch = 0;
  double train_loss = 0.0;    // mean base loss over the epoch's batches
  double defense_loss = 0.0;  // mean defense loss over the epoch's batches
  double combined_loss = 0.0;
  double dev_loss = 0.0;
  double dev_em = 0.0;
  double dev_f1 = 0.0;
  size_t defense_examples = 0;
  size_t fallbacks = 0;
  std::optional<double> mined_fraction;  // adversarial mode only
};

struct TrainResult {
  ToyModelParams params;  // parameters with the lowest dev loss
  std::vector<EpochLog> log;
  size_t best_epoch = 0;
  bool diverged = false;
  size_t skipped_train = 0;  // samples whose answer is not a toy candidate

  nlohmann::json LogJson() const;
};

// Mini-batch gradient descent with early stopping on dev loss.
TrainResult TrainToy(std::span<const Sample> train, std::span<const Sample> dev,
                     const TrainOptions& options);

// As TrainToy with the defense term added. With lambda = 0 the result is
// bit-identical to TrainToy under the same options.
TrainResult TrainToyDefended(std::span<const Sample> train,
                             std::span<const Sample> dev,
                             const PerturbationLexicon& lexicon,
                             const DefenseConfig& config,
                             const TrainOptions& options);

struct ToyEval {
  double loss = 0.0;
  double em = 0.0;
  double f1 = 0.0;
};

// Mean NLL (over samples whose gold is a candidate) and EM/F1 over all
// samples.
ToyEval EvaluateToy(const ToyModelParams& params, std::span<const Sample> samples);

}  // namespace undersense

#endif  // UNDERSENSE_DEFENSE_H_
