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

#include "undersense/defense.h"

#include <cmath>
#include <memory>

#include "undersense/errors.h"
#include "undersense/evaluate.h"
#include "undersense/json_util.h"
#include "undersense/rng.h"

namespace undersense {

using nlohmann::json;

namespace {

std::string_view ProvenanceName(Provenance provenance) {
  return provenance == Provenance::kMined ? "mined" : "augmentation";
}

bool AllFinite(const std::array<double, kToyParamCount>& values) {
  for (const double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::vector<ToyExample> Gather(const std::vector<ToyExample>& pool,
                               const std::vector<size_t>& order, size_t begin,
                               size_t end) {
  std::vector<ToyExample> batch;
  batch.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) batch.push_back(pool[order[i]]);
  return batch;
}

json EpochJson(const EpochLog& e) {
  json out = {{"epoch", e.epoch},
              {"train_loss", e.train_loss},
              {"defense_loss", e.defense_loss},
              {"combined_loss", e.combined_loss},
              {"dev_loss", e.dev_loss},
              {"dev_em", e.dev_em},
              {"dev_f1", e.dev_f1},
              {"defense_examples", e.defense_examples},
              {"fallbacks", e.fallbacks},
              {"mined_fraction", nullptr}};
  if (e.mined_fraction) out["mined_fraction"] = *e.mined_fraction;
  return out;
}

// Builds the defense set for one refresh: NoAnswer examples for
// perturbations, ordinary labelled examples for fallbacks.
struct DefenseSet {
  std::vector<ToyExample> examples;
  size_t fallbacks = 0;
  std::optional<double> mined_fraction;
};

DefenseSet BuildDefenseSet(std::span<const Sample> train,
                           const std::vector<ToyExample>& base,
                           const PerturbationLexicon& lexicon,
                           const DefenseConfig& config,
                           const ToyModelParams& snapshot, size_t epoch,
                           const TrainOptions& options) {
  DefenseSet set;
  std::map<std::string_view, const Sample*> by_id;
  for (const Sample& sample : train) by_id.emplace(sample.id, &sample);

  auto add_null = [&](const std::string& id, const std::string& question) {
    const Sample& sample = *by_id.at(id);
    if (auto example = MakeToyExample(sample, question, /*no_answer=*/true)) {
      set.examples.push_back(std::move(*example));
    }
  };

  if (config.mode == DefenseMode::kAugment) {
    const AugmentationResult augmented = SampleAugmentation(
        train, lexicon, config.k_per_sample,
        DeriveSeed(options.seed, {Fnv1a64("augment"), epoch}), config.kind,
        config.perturb);
    for (const DefenseExample& example : augmented.examples) {
      add_null(example.source_sample_id, example.question);
    }
    return set;
  }

  ToyScorer scorer(snapshot);
  const std::vector<DefenseItem> mined = MineAdversarial(
      train, lexicon, scorer,
      config.MiningConfig(DeriveSeed(options.seed, {Fnv1a64("mine"), epoch})),
      options.workers);
  // Fallbacks draw ordinary samples without replacement from a shuffle
  // that is fixed for the epoch.
  std::vector<size_t> substitutes(base.size());
  for (size_t i = 0; i < substitutes.size(); ++i) substitutes[i] = i;
  Rng rng(DeriveSeed(options.seed, {Fnv1a64("fallback"), epoch}));
  rng.Shuffle(substitutes);
  size_t next_substitute = 0;
  size_t mined_count = 0;
  for (const DefenseItem& item : mined) {
    if (const auto* example = std::get_if<DefenseExample>(&item)) {
      ++mined_count;
      add_null(example->source_sample_id, example->question);
      continue;
    }
    ++set.fallbacks;
    if (substitutes.empty()) continue;
    if (next_substitute == substitutes.size()) next_substitute = 0;
    set.examples.push_back(base[substitutes[next_substitute++]]);
  }
  if (!train.empty()) {
    set.mined_fraction =
        static_cast<double>(mined_count) / static_cast<double>(train.size());
  }
  return set;
}

TrainResult Train(std::span<const Sample> train, std::span<const Sample> dev,
                  const PerturbationLexicon* lexicon,
                  const DefenseConfig* config, const TrainOptions& options) {
  if (options.batch_size == 0) throw ContractViolation("batch size must be positive");
  if (!(options.learning_rate > 0.0)) {
    throw ContractViolation("learning rate must be positive");
  }
  TrainResult result;
  std::vector<ToyExample> base;
  for (const Sample& sample : train) {
    if (auto example = MakeToyExample(sample, sample.question.text)) {
      base.push_back(std::move(*example));
    } else {
      ++result.skipped_train;
    }
  }
  if (base.empty()) throw ContractViolation("no usable training samples");

  ToyModelParams params = options.init;
  result.params = params;
  double best_dev = EvaluateToy(params, dev).loss;
  size_t stale = 0;
  DefenseSet defense;

  for (size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    std::vector<size_t> order(base.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(DeriveSeed(options.seed, {Fnv1a64("order"), epoch})).Shuffle(order);

    if (config != nullptr &&
        (epoch - 1) % std::max<size_t>(config->refresh_epochs, 1) == 0) {
      defense = BuildDefenseSet(train, base, *lexicon, *config, params, epoch,
                                options);
    }
    std::vector<size_t> defense_order(defense.examples.size());
    for (size_t i = 0; i < defense_order.size(); ++i) defense_order[i] = i;
    Rng(DeriveSeed(options.seed, {Fnv1a64("defense-order"), epoch}))
        .Shuffle(defense_order);

    const size_t steps = (base.size() + options.batch_size - 1) / options.batch_size;
    EpochLog log;
    log.epoch = epoch;
    log.defense_examples = defense.examples.size();
    log.fallbacks = defense.fallbacks;
    log.mined_fraction = defense.mined_fraction;
    size_t defense_batches = 0;
    for (size_t step = 0; step < steps; ++step) {
      const size_t begin = step * options.batch_size;
      const size_t end = std::min(base.size(), begin + options.batch_size);
      const LossGrad lg = ToyLossGrad(params, Gather(base, order, begin, end));
      std::array<double, kToyParamCount> grad = lg.grad;
      log.train_loss += lg.loss;
      if (config != nullptr && !defense.examples.empty()) {
        const size_t d_begin = step * defense_order.size() / steps;
        const size_t d_end = (step + 1) * defense_order.size() / steps;
        if (d_end > d_begin) {
          const LossGrad dg = ToyLossGrad(
              params, Gather(defense.examples, defense_order, d_begin, d_end));
          for (size_t k = 0; k < kToyParamCount; ++k) {
            grad[k] += config->lambda * dg.grad[k];
          }
          log.defense_loss += dg.loss;
          ++defense_batches;
        }
      }
      std::array<double, kToyParamCount> flat = params.Flat();
      for (size_t k = 0; k < kToyParamCount; ++k) {
        flat[k] -= options.learning_rate * grad[k];
      }
      params = ToyModelParams::FromFlat(flat);
    }
    log.train_loss /= static_cast<double>(steps);
    if (defense_batches > 0) log.defense_loss /= static_cast<double>(defense_batches);
    log.combined_loss = CombinedLoss(log.train_loss, log.defense_loss,
                                     config != nullptr ? config->lambda : 0.0);

    if (!AllFinite(params.Flat()) || !std::isfinite(log.combined_loss)) {
      result.diverged = true;
      log.dev_loss = std::nan("");
      result.log.push_back(log);
      break;
    }
    const ToyEval eval = EvaluateToy(params, dev);
    log.dev_loss = eval.loss;
    log.dev_em = eval.em;
    log.dev_f1 = eval.f1;
    result.log.push_back(log);
    if (eval.loss < best_dev) {
      best_dev = eval.loss;
      result.params = params;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= options.patience) {
      break;
    }
  }
  return result;
}

}  // namespace

std::string_view ModeName(DefenseMode mode) {
  return mode == DefenseMode::kAdversarial ? "mine" : "augment";
}

DefenseMode ParseMode(std::string_view name) {
  if (name == "augment") return DefenseMode::kAugment;
  if (name == "mine" || name == "adversarial") return DefenseMode::kAdversarial;
  throw ContractViolation("unknown defense mode '" + std::string(name) +
                          "' (expected augment or mine)");
}

json DefenseItemToJson(const DefenseItem& item) {
  if (const auto* marker = std::get_if<FallbackMarker>(&item)) {
    return {{"fallback", true},
            {"source_sample_id", marker->source_sample_id},
            {"note", marker->note}};
  }
  const DefenseExample& example = std::get<DefenseExample>(item);
  json edits = json::array();
  for (const Edit& edit : example.edits) edits.push_back(EditToJson(edit));
  return {{"context", example.context},
          {"question", example.question},
          {"label", nullptr},
          {"provenance", ProvenanceName(example.provenance)},
          {"source_sample_id", example.source_sample_id},
          {"edits", std::move(edits)}};
}

DefenseItem DefenseItemFromJson(const json& item) {
  if (item.is_object() && item.value("fallback", false)) {
    return FallbackMarker{RequireString(item, "source_sample_id"),
                          item.value("note", "")};
  }
  DefenseExample example;
  example.context = RequireString(item, "context");
  example.question = RequireString(item, "question");
  if (!RequireField(item, "label").is_null()) {
    throw FormatError("defense example label must be null (NoAnswer)");
  }
  const std::string provenance = RequireString(item, "provenance");
  if (provenance == "mined") {
    example.provenance = Provenance::kMined;
  } else if (provenance == "augmentation") {
    example.provenance = Provenance::kAugmentation;
  } else {
    throw FormatError("unknown provenance '" + provenance + "'");
  }
  example.source_sample_id = RequireString(item, "source_sample_id");
  const json& edits = RequireField(item, "edits");
  if (!edits.is_array()) throw FormatError("field 'edits' must be an array");
  for (const json& edit : edits) example.edits.push_back(EditFromJson(edit));
  return example;
}

void WriteDefenseItems(std::ostream& out, std::span<const DefenseItem> items) {
  for (const DefenseItem& item : items) out << DefenseItemToJson(item).dump() << '\n';
}

std::vector<DefenseItem> ReadDefenseItems(std::istream& in) {
  std::vector<DefenseItem> items;
  size_t line_number = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(DefenseItemFromJson(ParseJson(line)));
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return items;
}

void DefenseConfig::Validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ContractViolation("lambda must be a finite non-negative number");
  }
  if (k_per_sample == 0) throw ContractViolation("k_per_sample must be at least 1");
  if (refresh_epochs == 0) throw ContractViolation("refresh cadence must be at least 1");
  MiningConfig(0).Validate();
}

AttackConfig DefenseConfig::MiningConfig(uint64_t seed) const {
  AttackConfig attack;
  attack.eta = mining_eta;
  attack.rho = mining_rho;
  attack.beam_width = mining_beam_width;
  attack.kind = kind;
  attack.seed = seed;
  attack.perturb = perturb;
  return attack;
}

json DefenseConfig::ToJson() const {
  return {{"lambda", lambda},
          {"mode", ModeName(mode)},
          {"k_per_sample", k_per_sample},
          {"kind", KindName(kind)},
          {"exclude_context_matches", perturb.exclude_context_matches},
          {"protect_entities", perturb.protect_entities},
          {"mining_eta", mining_eta},
          {"mining_rho", mining_rho},
          {"mining_beam_width", mining_beam_width},
          {"refresh_epochs", refresh_epochs}};
}

json TrainOptions::ToJson() const {
  return {{"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"init", init.ToJson()}};
}

json TrainResult::LogJson() const {
  json epochs = json::array();
  for (const EpochLog& epoch : log) epochs.push_back(EpochJson(epoch));
  return {{"epochs", std::move(epochs)},
          {"best_epoch", best_epoch},
          {"diverged", diverged},
          {"skipped_train", skipped_train},
          {"params", params.ToJson()},
          {"label_note",
           "every defense example is labelled NoAnswer, including the "
           "perturbations that keep the answer"}};
}

AugmentationResult SampleAugmentation(std::span<const Sample> train,
                                      const PerturbationLexicon& lexicon,
                                      size_t k_per_sample, uint64_t seed,
                                      PerturbationKind kind,
                                      const PerturbOptions& options) {
  if (k_per_sample == 0) throw ContractViolation("k_per_sample must be at least 1");
  AugmentationResult result;
  for (const Sample& sample : train) {
    Rng rng(DeriveSeed(seed, {Fnv1a64(sample.id)}));
    const std::vector<PerturbedQuestion> variants =
        SampleCandidates(kind, RootQuestion(sample), lexicon, k_per_sample,
                         rng, options, sample.context);
    if (variants.empty()) {
      ++result.skipped;
      continue;
    }
    for (const PerturbedQuestion& variant : variants) {
      result.examples.push_back(DefenseExample{sample.context,
                                               variant.question.text,
                                               Provenance::kAugmentation,
                                               sample.id, variant.edits});
    }
  }
  return result;
}

std::vector<DefenseItem> MineAdversarial(std::span<const Sample> train,
                                         const PerturbationLexicon& lexicon,
                                         Scorer& scorer,
                                         const AttackConfig& mining,
                                         size_t workers) {
  const std::vector<AttackOutcome> outcomes =
      AttackDataset(train, lexicon, mining, scorer, workers);
  std::vector<DefenseItem> items;
  items.reserve(outcomes.size());
  for (size_t i = 0; i < outcomes.size(); ++i) {
    const AttackOutcome& outcome = outcomes[i];
    if (outcome.status == AttackStatus::kVulnerable) {
      items.push_back(DefenseExample{train[i].context,
                                     *outcome.adversarial_question,
                                     Provenance::kMined, outcome.sample_id,
                                     outcome.edits});
      continue;
    }
    std::string note(StatusName(outcome.status));
    if (!outcome.error.empty()) note += ": " + outcome.error;
    items.push_back(FallbackMarker{outcome.sample_id, note});
  }
  return items;
}

ToyEval EvaluateToy(const ToyModelParams& params, std::span<const Sample> samples) {
  ToyEval eval;
  size_t scored = 0;
  std::vector<ToyExample> one(1);
  for (const Sample& sample : samples) {
    if (auto example = MakeToyExample(sample, sample.question.text)) {
      one[0] = std::move(*example);
      eval.loss += ToyLossGrad(params, one).loss;
      ++scored;
    }
    const EmF1 score = ScoreAnswer(
        ToyPredict(params, sample.context, sample.question.text),
        GoldAnswers(sample));
    eval.em += score.em;
    eval.f1 += score.f1;
  }
  if (scored > 0) eval.loss /= static_cast<double>(scored);
  if (!samples.empty()) {
    eval.em /= static_cast<double>(samples.size());
    eval.f1 /= static_cast<double>(samples.size());
  }
  return eval;
}

TrainResult TrainToy(std::span<const Sample> train, std::span<const Sample> dev,
                     const TrainOptions& options) {
  return Train(train, dev, nullptr, nullptr, options);
}

TrainResult TrainToyDefended(std::span<const Sample> train,
                             std::span<const Sample> dev,
                             const PerturbationLexicon& lexicon,
                             const DefenseConfig& config,
                             const TrainOptions& options) {
  config.Validate();
  return Train(train, dev, &lexicon, &config, options);
}

}  // namespace undersense
