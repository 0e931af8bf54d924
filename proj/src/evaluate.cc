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

#include "undersense/evaluate.h"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>
#include <string_view>

#include "undersense/errors.h"

namespace undersense {

using nlohmann::json;

namespace {

constexpr std::string_view kPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

bool IsWordChar(unsigned char c) {
  return std::isalnum(c) || c == '_' || c >= 0x80;
}

std::vector<std::string> SplitWhitespace(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) words.push_back(word);
  return words;
}

json Optional(const std::optional<double>& value) {
  return value ? json(*value) : json(nullptr);
}

struct Mean {
  double sum = 0.0;
  size_t n = 0;
  void Add(double v) {
    sum += v;
    ++n;
  }
  json ToJson() const { return n == 0 ? json(nullptr) : json(sum / n); }
};

struct EmF1Mean {
  Mean em;
  Mean f1;
  void Add(const EmF1& s) {
    em.Add(s.em);
    f1.Add(s.f1);
  }
  json ToJson() const {
    return {{"em", em.ToJson()}, {"f1", f1.ToJson()}, {"n", em.n}};
  }
};

json Distribution(const std::map<std::string, size_t>& counts) {
  size_t total = 0;
  for (const auto& [key, n] : counts) total += n;
  json out = json::object();
  for (const auto& [key, n] : counts) {
    out[key] = total == 0 ? 0.0 : static_cast<double>(n) / total;
  }
  return out;
}

std::string FormatRate(const std::optional<double>& rate) {
  if (!rate) return "";
  std::ostringstream out;
  out << std::setprecision(17) << *rate;
  return out.str();
}

}  // namespace

std::optional<double> AdversarialErrorRate(
    std::span<const AttackOutcome> outcomes) {
  return CountOutcomes(outcomes).error_rate();
}

std::vector<CurvePoint> DeriveCurve(std::span<const AttackOutcome> outcomes,
                                    const AttackConfig& run_config,
                                    std::span<const size_t> eta_grid,
                                    std::span<const size_t> rho_grid) {
  if (eta_grid.empty() || rho_grid.empty()) {
    throw ContractViolation("curve grids must be non-empty");
  }
  std::vector<CurvePoint> points;
  for (const size_t rho : rho_grid) {
    for (const size_t eta : eta_grid) {
      if (eta == 0 || rho == 0) {
        throw ContractViolation("grid values must be at least 1");
      }
      if (eta > run_config.eta || rho > run_config.rho) {
        throw ContractViolation("grid point (" + std::to_string(eta) + ", " +
                                std::to_string(rho) +
                                ") exceeds the run budget");
      }
      CurvePoint point{eta, rho, {}};
      for (const AttackOutcome& outcome : outcomes) {
        AttackStatus status = outcome.status;
        if (status == AttackStatus::kVulnerable &&
            (outcome.found_at_depth > rho || outcome.min_eta > eta)) {
          status = AttackStatus::kRobust;
        }
        point.counts.Add(status);
      }
      points.push_back(point);
    }
  }
  return points;
}

std::vector<CurvePoint> ErrorRateCurve(std::span<const Sample> samples,
                                       const PerturbationLexicon& lexicon,
                                       const AttackConfig& base, Scorer& scorer,
                                       std::span<const size_t> eta_grid,
                                       std::span<const size_t> rho_grid,
                                       size_t workers, bool independent) {
  if (eta_grid.empty() || rho_grid.empty()) {
    throw ContractViolation("curve grids must be non-empty");
  }
  if (!independent) {
    AttackConfig config = base;
    config.eta = *std::max_element(eta_grid.begin(), eta_grid.end());
    config.rho = *std::max_element(rho_grid.begin(), rho_grid.end());
    const std::vector<AttackOutcome> outcomes =
        AttackDataset(samples, lexicon, config, scorer, workers);
    return DeriveCurve(outcomes, config, eta_grid, rho_grid);
  }
  std::vector<CurvePoint> points;
  for (const size_t rho : rho_grid) {
    for (const size_t eta : eta_grid) {
      AttackConfig config = base;
      config.eta = eta;
      config.rho = rho;
      const std::vector<AttackOutcome> outcomes =
          AttackDataset(samples, lexicon, config, scorer, workers);
      points.push_back(CurvePoint{eta, rho, CountOutcomes(outcomes)});
    }
  }
  return points;
}

json CurveToJson(std::span<const CurvePoint> points) {
  json rows = json::array();
  for (const CurvePoint& point : points) {
    rows.push_back({{"eta", point.eta},
                    {"rho", point.rho},
                    {"counts", point.counts.ToJson()},
                    {"error_rate", Optional(point.error_rate())}});
  }
  return rows;
}

void WriteCurveCsv(std::ostream& out, std::span<const CurvePoint> points) {
  out << "eta,rho,vulnerable,robust,skipped_noanswer,skipped_nocandidates,"
         "errors,error_rate\n";
  for (const CurvePoint& point : points) {
    const OutcomeCounts& c = point.counts;
    out << point.eta << ',' << point.rho << ',' << c.vulnerable << ','
        << c.robust << ',' << c.skipped_noanswer << ','
        << c.skipped_nocandidates << ',' << c.errors << ','
        << FormatRate(point.error_rate()) << '\n';
  }
}

std::string NormalizeAnswer(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (const char c : text) {
    if (kPunctuation.find(c) != std::string_view::npos) continue;
    lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  // Drop whole-word articles.
  std::string stripped;
  stripped.reserve(lowered.size());
  for (size_t i = 0; i < lowered.size();) {
    const bool at_boundary =
        i == 0 || !IsWordChar(static_cast<unsigned char>(lowered[i - 1]));
    bool removed = false;
    if (at_boundary) {
      for (const std::string_view article : {"the", "an", "a"}) {
        const size_t end = i + article.size();
        if (lowered.compare(i, article.size(), article) == 0 &&
            (end == lowered.size() ||
             !IsWordChar(static_cast<unsigned char>(lowered[end])))) {
          i = end;
          removed = true;
          stripped.push_back(' ');
          break;
        }
      }
    }
    if (!removed) stripped.push_back(lowered[i++]);
  }
  std::string out;
  for (const std::string& word : SplitWhitespace(stripped)) {
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

EmF1 ScoreAnswer(std::string_view predicted, std::span<const std::string> golds) {
  static const std::vector<std::string> kNoAnswer = {""};
  if (golds.empty()) golds = kNoAnswer;
  const std::string normalized_prediction = NormalizeAnswer(predicted);
  const std::vector<std::string> predicted_tokens =
      SplitWhitespace(normalized_prediction);
  EmF1 best;
  for (const std::string& gold : golds) {
    const std::string normalized_gold = NormalizeAnswer(gold);
    best.em = std::max(best.em, normalized_gold == normalized_prediction ? 1.0 : 0.0);
    const std::vector<std::string> gold_tokens = SplitWhitespace(normalized_gold);
    double f1 = 0.0;
    if (gold_tokens.empty() || predicted_tokens.empty()) {
      f1 = gold_tokens == predicted_tokens ? 1.0 : 0.0;
    } else {
      std::map<std::string, int> remaining;
      for (const std::string& token : gold_tokens) ++remaining[token];
      size_t same = 0;
      for (const std::string& token : predicted_tokens) {
        auto it = remaining.find(token);
        if (it != remaining.end() && it->second > 0) {
          --it->second;
          ++same;
        }
      }
      if (same > 0) {
        const double precision =
            static_cast<double>(same) / static_cast<double>(predicted_tokens.size());
        const double recall =
            static_cast<double>(same) / static_cast<double>(gold_tokens.size());
        f1 = 2.0 * precision * recall / (precision + recall);
      }
    }
    best.f1 = std::max(best.f1, f1);
  }
  return best;
}

std::vector<std::string> GoldAnswers(const Sample& sample) {
  std::vector<std::string> golds;
  if (sample.is_impossible) return golds;
  for (const Answer& answer : sample.answers) golds.push_back(answer.text);
  return golds;
}

std::string QuestionType(const TaggedQuestion& question) {
  static const std::map<std::string, std::string, std::less<>> kTypes = {
      {"what", "What"},   {"who", "Who"},     {"whom", "Who"},
      {"whose", "Who"},   {"when", "When"},   {"where", "Where"},
      {"which", "Which"}, {"why", "Why"},     {"how", "How"}};
  for (const TaggedToken& token : question.tokens) {
    std::string lower = token.text;
    for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    const auto it = kTypes.find(lower);
    if (it != kTypes.end()) return it->second;
  }
  return "Other";
}

json EvalReport::ToJson() const {
  json out = body;
  out["warnings"] = warnings;
  return out;
}

void EvalReport::WriteHistogramCsv(std::ostream& out) const {
  out << "group,type,count,fraction\n";
  if (!body.contains("ne_histogram")) return;
  for (const json& row : body["ne_histogram"]) {
    out << row["group"].get<std::string>() << ',' << row["type"].get<std::string>()
        << ',' << row["count"].get<size_t>() << ','
        << std::setprecision(17) << row["fraction"].get<double>() << '\n';
  }
}

EvalReport CharacteristicsReport(
    std::span<const AttackOutcome> outcomes, std::span<const Sample> samples,
    const std::map<std::string, std::string, std::less<>>& predictions) {
  std::map<std::string_view, const Sample*> by_id;
  for (const Sample& sample : samples) by_id.emplace(sample.id, &sample);

  EvalReport report;
  report.counts = CountOutcomes(outcomes);
  Mean p_attackable, p_unattackable;
  EmF1Mean overall, vulnerable, unattacked;
  Mean length_vulnerable, length_unattacked;
  std::map<std::string, size_t> types_vulnerable, types_unattacked;
  std::map<std::string, size_t> ne_vulnerable, ne_unattacked;

  for (const AttackOutcome& outcome : outcomes) {
    const auto found = by_id.find(outcome.sample_id);
    if (found == by_id.end()) {
      report.warnings.push_back("outcome " + outcome.sample_id +
                                " has no matching sample");
      continue;
    }
    const Sample& sample = *found->second;
    const bool is_vulnerable = outcome.status == AttackStatus::kVulnerable;
    const bool is_robust = outcome.status == AttackStatus::kRobust;

    std::optional<std::string> prediction;
    if (const auto p = predictions.find(outcome.sample_id); p != predictions.end()) {
      prediction = p->second;
    } else if (outcome.status == AttackStatus::kSkippedNoAnswer) {
      prediction = "";
    } else if (outcome.original_span &&
               outcome.original_span->char_end <= sample.context.size()) {
      const SpanRef& span = *outcome.original_span;
      prediction = sample.context.substr(span.char_start,
                                         span.char_end - span.char_start);
    }
    if (prediction) {
      const EmF1 score = ScoreAnswer(*prediction, GoldAnswers(sample));
      overall.Add(score);
      if (is_vulnerable) vulnerable.Add(score);
      if (is_robust) unattacked.Add(score);
    } else if (outcome.status != AttackStatus::kError) {
      report.warnings.push_back("no prediction for sample " + outcome.sample_id);
    }

    if (!is_vulnerable && !is_robust) continue;
    const double tokens = static_cast<double>(sample.question.tokens.size());
    const std::string type = QuestionType(sample.question);
    if (is_vulnerable) {
      p_attackable.Add(outcome.p_orig);
      length_vulnerable.Add(tokens);
      ++types_vulnerable[type];
      for (const Edit& edit : outcome.edits) {
        if (edit.kind != PerturbationKind::kNamedEntity) continue;
        if (edit.target < sample.question.entities.size()) {
          ++ne_vulnerable[sample.question.entities[edit.target].type];
        }
      }
    } else {
      p_unattackable.Add(outcome.p_orig);
      length_unattacked.Add(tokens);
      ++types_unattacked[type];
      for (const EntityMention& mention : sample.question.entities) {
        ++ne_unattacked[mention.type];
      }
    }
  }

  json histogram = json::array();
  for (const auto& [group, counts] :
       {std::pair<const char*, const std::map<std::string, size_t>*>{
            "vulnerable", &ne_vulnerable},
        {"unattacked", &ne_unattacked}}) {
    size_t total = 0;
    for (const auto& [type, n] : *counts) total += n;
    for (const auto& [type, n] : *counts) {
      histogram.push_back({{"group", group},
                           {"type", type},
                           {"count", n},
                           {"fraction", static_cast<double>(n) / total}});
    }
  }

  if (!report.counts.error_rate()) {
    report.warnings.push_back(
        "error rate undefined: no sample was attacked (vulnerable + robust = 0)");
  }
  report.body = {
      {"error_rate", Optional(report.counts.error_rate())},
      {"counts", report.counts.ToJson()},
      {"mean_p_orig",
       {{"attackable", p_attackable.ToJson()},
        {"unattackable", p_unattackable.ToJson()}}},
      {"em_f1",
       {{"overall", overall.ToJson()},
        {"vulnerable", vulnerable.ToJson()},
        {"unattacked", unattacked.ToJson()}}},
      {"mean_question_tokens",
       {{"vulnerable", length_vulnerable.ToJson()},
        {"unattacked", length_unattacked.ToJson()},
        {"note", "every question token is counted, punctuation included"}}},
      {"question_types",
       {{"vulnerable", Distribution(types_vulnerable)},
        {"unattacked", Distribution(types_unattacked)}}},
      {"ne_histogram", histogram}};
  return report;
}

json TransferReport::ToJson() const {
  json out = {{"source_vulnerable", source_vulnerable},
              {"transferred", transferred},
              {"transfer_rate", Optional(transfer_rate)},
              {"target_counts", nullptr},
              {"vulnerable_target_given_source", nullptr}};
  if (target_counts) {
    out["target_counts"] = target_counts->ToJson();
    out["vulnerable_target_given_source"] = Optional(target_counts->error_rate());
  }
  return out;
}

TransferReport TransferEval(std::span<const AttackOutcome> source,
                            std::span<const Sample> samples, Scorer& target,
                            const PerturbationLexicon* lexicon,
                            const AttackConfig* config, size_t workers) {
  std::map<std::string_view, const Sample*> by_id;
  for (const Sample& sample : samples) by_id.emplace(sample.id, &sample);

  std::vector<const Sample*> subset;
  std::vector<const AttackOutcome*> winners;
  for (const AttackOutcome& outcome : source) {
    if (outcome.status != AttackStatus::kVulnerable ||
        !outcome.adversarial_question) {
      continue;
    }
    const auto found = by_id.find(outcome.sample_id);
    if (found == by_id.end()) {
      throw ContractViolation("no sample for outcome " + outcome.sample_id);
    }
    subset.push_back(found->second);
    winners.push_back(&outcome);
  }

  TransferReport report;
  report.source_vulnerable = subset.size();
  if (subset.empty()) return report;

  std::vector<ScoreRequest> originals;
  for (const Sample* sample : subset) {
    originals.push_back({sample->id + "#orig", sample->context,
                         sample->question.text, {}});
  }
  const std::vector<ScoreResponse> before = target.ScoreBatch(originals);
  std::vector<ScoreRequest> adversarial;
  std::vector<size_t> index;
  for (size_t i = 0; i < subset.size(); ++i) {
    if (before[i].error) {
      throw ScorerRequestError("request " + before[i].request_id + ": " +
                               *before[i].error);
    }
    if (before[i].PredictsNoAnswer()) continue;
    adversarial.push_back({subset[i]->id + "#adv", subset[i]->context,
                           *winners[i]->adversarial_question,
                           {*before[i].best_span}});
    index.push_back(i);
  }
  if (!adversarial.empty()) {
    const std::vector<ScoreResponse> after = target.ScoreBatch(adversarial);
    for (size_t j = 0; j < after.size(); ++j) {
      if (after[j].error) {
        throw ScorerRequestError("request " + after[j].request_id + ": " +
                                 *after[j].error);
      }
      if (after[j].span_probs.at(0) > before[index[j]].best_prob) {
        ++report.transferred;
      }
    }
  }
  report.transfer_rate = static_cast<double>(report.transferred) /
                         static_cast<double>(report.source_vulnerable);

  if (lexicon != nullptr && config != nullptr) {
    std::vector<Sample> copies;
    for (const Sample* sample : subset) copies.push_back(*sample);
    report.target_counts =
        CountOutcomes(AttackDataset(copies, *lexicon, *config, target, workers));
  }
  return report;
}

}  // namespace undersense
