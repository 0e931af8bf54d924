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

#include "undersense/attack.h"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "undersense/errors.h"
#include "undersense/json_util.h"
#include "undersense/rng.h"
#include "undersense/utf8.h"

namespace undersense {

using nlohmann::json;

namespace {

struct Candidate {
  PerturbedQuestion question;
  size_t rank = 0;  // largest 1-based sample position along the lineage
  double p = 0.0;
  double delta = 0.0;
};

// Higher delta first; equal deltas by smaller text.
bool Better(const Candidate& a, const Candidate& b) {
  if (a.delta != b.delta) return a.delta > b.delta;
  return a.question.question.text < b.question.question.text;
}

void ThrowOnError(const ScoreResponse& response) {
  if (response.error) {
    throw ScorerRequestError("request " + response.request_id + ": " +
                             *response.error);
  }
}

ScoreResponse ScoreOriginal(const Sample& sample, Scorer& scorer) {
  const ScoreRequest request{sample.id + "#0", sample.context,
                             sample.question.text, {}};
  std::vector<ScoreResponse> responses =
      scorer.ScoreBatch(std::span<const ScoreRequest>(&request, 1));
  if (responses.size() != 1) {
    throw ProtocolError("expected one response", "");
  }
  ThrowOnError(responses.front());
  return std::move(responses.front());
}

// P(span | context, question) for every question, in order.
std::vector<double> ScoreSpan(const Sample& sample, const SpanRef& span,
                              const std::vector<const std::string*>& questions,
                              size_t depth, Scorer& scorer) {
  std::vector<ScoreRequest> requests;
  requests.reserve(questions.size());
  for (size_t i = 0; i < questions.size(); ++i) {
    requests.push_back({sample.id + "#" + std::to_string(depth) + "." +
                            std::to_string(i),
                        sample.context, *questions[i], {span}});
  }
  std::vector<double> probs;
  if (requests.empty()) return probs;
  const std::vector<ScoreResponse> responses = scorer.ScoreBatch(requests);
  if (responses.size() != requests.size()) {
    throw ProtocolError("scorer returned " + std::to_string(responses.size()) +
                            " responses for " +
                            std::to_string(requests.size()) + " requests",
                        "");
  }
  for (const ScoreResponse& response : responses) {
    ThrowOnError(response);
    if (response.span_probs.size() != 1) {
      throw ProtocolError("request " + response.request_id +
                              ": expected one span probability",
                          "");
    }
    probs.push_back(response.span_probs.front());
  }
  return probs;
}

void SetResult(AttackOutcome& outcome, const Candidate& candidate) {
  outcome.adversarial_question = candidate.question.question.text;
  outcome.edits = candidate.question.edits;
  outcome.p_adv = candidate.p;
  outcome.delta = candidate.delta;
}

json SpanJson(const SpanRef& span, const OffsetMap* offsets) {
  if (offsets == nullptr) {
    return {{"char_start", span.char_start}, {"char_end", span.char_end}};
  }
  return {{"char_start", offsets->ToCodepoint(span.char_start)},
          {"char_end", offsets->ToCodepoint(span.char_end)}};
}

}  // namespace

void AttackConfig::Validate() const {
  if (eta == 0) throw ContractViolation("eta must be at least 1");
  if (rho == 0) throw ContractViolation("rho must be at least 1");
  if (beam_width == 0) throw ContractViolation("beam width must be at least 1");
}

size_t AttackConfig::Budget() const {
  constexpr size_t kMax = std::numeric_limits<size_t>::max();
  if (eta != 0 && rho > kMax / eta) return kMax;
  const size_t per_width = rho * eta;
  if (per_width != 0 && beam_width > kMax / per_width) return kMax;
  return beam_width * per_width;
}

json AttackConfig::ToJson() const {
  return {{"eta", eta},
          {"rho", rho},
          {"beam_width", beam_width},
          {"kind", KindName(kind)},
          {"seed", seed},
          {"exclude_context_matches", perturb.exclude_context_matches},
          {"protect_entities", perturb.protect_entities},
          {"record_trace", record_trace}};
}

AttackConfig AttackConfig::FromJson(const json& item) {
  AttackConfig config;
  config.eta = RequireIndex(item, "eta");
  config.rho = RequireIndex(item, "rho");
  config.beam_width = RequireIndex(item, "beam_width");
  try {
    config.kind = ParseKind(RequireString(item, "kind"));
  } catch (const ContractViolation& e) {
    throw FormatError(e.what());
  }
  const json& seed = RequireField(item, "seed");
  if (!seed.is_number_unsigned() && !seed.is_number_integer()) {
    throw FormatError("field 'seed' must be an integer");
  }
  config.seed = seed.get<uint64_t>();
  config.perturb.exclude_context_matches =
      item.value("exclude_context_matches", false);
  config.perturb.protect_entities = item.value("protect_entities", false);
  config.record_trace = item.value("record_trace", false);
  return config;
}

std::string_view StatusName(AttackStatus status) {
  switch (status) {
    case AttackStatus::kVulnerable: return "vulnerable";
    case AttackStatus::kRobust: return "robust";
    case AttackStatus::kSkippedNoAnswer: return "skipped_noanswer";
    case AttackStatus::kSkippedNoCandidates: return "skipped_nocandidates";
    case AttackStatus::kError: return "error";
  }
  return "error";
}

AttackStatus ParseStatus(std::string_view name) {
  for (const AttackStatus status :
       {AttackStatus::kVulnerable, AttackStatus::kRobust,
        AttackStatus::kSkippedNoAnswer, AttackStatus::kSkippedNoCandidates,
        AttackStatus::kError}) {
    if (StatusName(status) == name) return status;
  }
  throw FormatError("unknown attack status '" + std::string(name) + "'");
}

json OutcomeToJson(const AttackOutcome& outcome,
                   std::optional<std::string_view> context) {
  std::optional<OffsetMap> offsets;
  if (context) offsets.emplace(*context);
  json edits = json::array();
  for (const Edit& edit : outcome.edits) edits.push_back(EditToJson(edit));
  json out = {{"sample_id", outcome.sample_id},
              {"status", StatusName(outcome.status)},
              {"original_span", nullptr},
              {"p_orig", outcome.p_orig},
              {"adversarial_question", nullptr},
              {"edits", std::move(edits)},
              {"p_adv", outcome.p_adv},
              {"delta", outcome.delta},
              {"evals_used", outcome.evals_used},
              {"found_at_depth", outcome.found_at_depth},
              {"min_eta", outcome.min_eta}};
  if (outcome.original_span) {
    out["original_span"] =
        SpanJson(*outcome.original_span, offsets ? &*offsets : nullptr);
  }
  if (outcome.adversarial_question) {
    out["adversarial_question"] = *outcome.adversarial_question;
  }
  if (!outcome.trace.empty()) {
    json trace = json::array();
    for (const DepthSummary& depth : outcome.trace) {
      trace.push_back({{"depth", depth.depth},
                       {"candidates", depth.candidates},
                       {"evaluations", depth.evaluations},
                       {"best_delta", depth.best_delta},
                       {"beam", depth.beam}});
    }
    out["trace"] = std::move(trace);
  }
  if (!outcome.error.empty()) out["error"] = outcome.error;
  return out;
}

AttackOutcome OutcomeFromJson(const json& item,
                              std::optional<std::string_view> context) {
  AttackOutcome outcome;
  outcome.sample_id = RequireString(item, "sample_id");
  outcome.status = ParseStatus(RequireString(item, "status"));
  const json& span = RequireField(item, "original_span");
  if (!span.is_null()) {
    SpanRef ref{RequireIndex(span, "char_start"), RequireIndex(span, "char_end")};
    if (context) {
      const OffsetMap offsets(*context);
      ref = SpanRef{offsets.ToByte(ref.char_start),
                    offsets.ToByte(ref.char_end)};
    }
    if (ref.char_start >= ref.char_end) {
      throw FormatError("outcome " + outcome.sample_id + ": empty span");
    }
    outcome.original_span = ref;
  }
  outcome.p_orig = RequireNumber(item, "p_orig");
  const json& question = RequireField(item, "adversarial_question");
  if (!question.is_null()) {
    if (!question.is_string()) {
      throw FormatError("field 'adversarial_question' must be a string");
    }
    outcome.adversarial_question = question.get<std::string>();
  }
  const json& edits = RequireField(item, "edits");
  if (!edits.is_array()) throw FormatError("field 'edits' must be an array");
  for (const json& edit : edits) outcome.edits.push_back(EditFromJson(edit));
  outcome.p_adv = RequireNumber(item, "p_adv");
  outcome.delta = RequireNumber(item, "delta");
  outcome.evals_used = RequireIndex(item, "evals_used");
  outcome.found_at_depth = RequireIndex(item, "found_at_depth");
  outcome.min_eta = RequireIndex(item, "min_eta");
  const auto trace = item.find("trace");
  if (trace != item.end()) {
    if (!trace->is_array()) throw FormatError("field 'trace' must be an array");
    for (const json& depth : *trace) {
      DepthSummary summary;
      summary.depth = RequireIndex(depth, "depth");
      summary.candidates = RequireIndex(depth, "candidates");
      summary.evaluations = RequireIndex(depth, "evaluations");
      summary.best_delta = RequireNumber(depth, "best_delta");
      summary.beam = RequireField(depth, "beam").get<std::vector<std::string>>();
      outcome.trace.push_back(std::move(summary));
    }
  }
  const auto error = item.find("error");
  if (error != item.end() && error->is_string()) outcome.error = *error;
  return outcome;
}

AttackOutcome AttackSample(const Sample& sample,
                           const PerturbationLexicon& lexicon,
                           const AttackConfig& config, Scorer& scorer) {
  config.Validate();
  AttackOutcome outcome;
  outcome.sample_id = sample.id;

  const ScoreResponse original = ScoreOriginal(sample, scorer);
  outcome.evals_used = 1;
  if (original.PredictsNoAnswer()) {
    outcome.status = AttackStatus::kSkippedNoAnswer;
    outcome.p_orig = original.best_prob;
    return outcome;
  }
  const SpanRef answer = *original.best_span;
  outcome.original_span = answer;
  outcome.p_orig = original.best_prob;

  const std::string& root_text = sample.question.text;
  const uint64_t sample_hash = Fnv1a64(sample.id);
  const size_t budget = config.Budget();
  std::unordered_map<std::string, double> memo;
  std::vector<Candidate> beam = {Candidate{RootQuestion(sample), 0, 0.0, 0.0}};
  std::optional<Candidate> best_seen;

  for (size_t depth = 1; depth <= config.rho; ++depth) {
    std::vector<Candidate> candidates;
    std::unordered_set<std::string> drawn;
    for (const Candidate& item : beam) {
      Rng rng(DeriveSeed(config.seed, {sample_hash, depth,
                                       Fnv1a64(item.question.question.text)}));
      std::vector<PerturbedQuestion> variants =
          SampleCandidates(config.kind, item.question, lexicon, config.eta,
                           rng, config.perturb, sample.context);
      for (size_t r = 0; r < variants.size(); ++r) {
        const std::string& text = variants[r].question.text;
        if (text == root_text || !drawn.insert(text).second) continue;
        candidates.push_back(
            Candidate{std::move(variants[r]), std::max(item.rank, r + 1)});
      }
    }
    if (candidates.empty()) {
      if (depth == 1) {
        outcome.status = AttackStatus::kSkippedNoCandidates;
        return outcome;
      }
      break;
    }

    // Score the texts not seen before, within the remaining budget.
    std::vector<Candidate> kept;
    kept.reserve(candidates.size());
    size_t fresh = 0;
    for (Candidate& candidate : candidates) {
      if (!memo.contains(candidate.question.question.text)) {
        if (outcome.evals_used + fresh >= budget) continue;
        ++fresh;
      }
      kept.push_back(std::move(candidate));
    }
    std::vector<const std::string*> to_score;
    for (const Candidate& candidate : kept) {
      const std::string& text = candidate.question.question.text;
      if (!memo.contains(text)) to_score.push_back(&text);
    }
    const std::vector<double> probs =
        ScoreSpan(sample, answer, to_score, depth, scorer);
    for (size_t i = 0; i < to_score.size(); ++i) memo[*to_score[i]] = probs[i];
    outcome.evals_used += to_score.size();

    for (Candidate& candidate : kept) {
      candidate.p = memo.at(candidate.question.question.text);
      candidate.delta = candidate.p - outcome.p_orig;
    }
    std::sort(kept.begin(), kept.end(), Better);

    if (config.record_trace) {
      DepthSummary summary;
      summary.depth = depth;
      summary.candidates = kept.size();
      summary.evaluations = to_score.size();
      summary.best_delta = kept.empty() ? 0.0 : kept.front().delta;
      for (size_t i = 0; i < kept.size() && i < config.beam_width; ++i) {
        summary.beam.push_back(kept[i].question.question.text);
      }
      outcome.trace.push_back(std::move(summary));
    }
    if (kept.empty()) break;

    if (kept.front().delta > 0.0) {
      outcome.status = AttackStatus::kVulnerable;
      outcome.found_at_depth = depth;
      size_t min_eta = std::numeric_limits<size_t>::max();
      for (const Candidate& candidate : kept) {
        if (candidate.delta > 0.0) min_eta = std::min(min_eta, candidate.rank);
      }
      outcome.min_eta = min_eta;
      SetResult(outcome, kept.front());
      return outcome;
    }
    if (!best_seen || Better(kept.front(), *best_seen)) best_seen = kept.front();
    if (kept.size() > config.beam_width) kept.resize(config.beam_width);
    beam = std::move(kept);
    if (outcome.evals_used >= budget) break;
  }

  outcome.status = AttackStatus::kRobust;
  if (best_seen) SetResult(outcome, *best_seen);
  return outcome;
}

std::vector<AttackOutcome> AttackDataset(std::span<const Sample> samples,
                                         const PerturbationLexicon& lexicon,
                                         const AttackConfig& config,
                                         Scorer& scorer, size_t workers,
                                         const OutcomeCallback& on_outcome) {
  config.Validate();
  if (workers == 0) throw ContractViolation("workers must be at least 1");
  std::vector<std::optional<AttackOutcome>> results(samples.size());
  std::atomic<size_t> next{0};
  std::mutex mutex;
  std::condition_variable ready;

  auto work = [&] {
    for (size_t i = next++; i < samples.size(); i = next++) {
      AttackOutcome outcome;
      try {
        outcome = AttackSample(samples[i], lexicon, config, scorer);
      } catch (const std::exception& e) {
        outcome = AttackOutcome{};
        outcome.sample_id = samples[i].id;
        outcome.status = AttackStatus::kError;
        outcome.error = e.what();
      }
      {
        std::lock_guard<std::mutex> lock(mutex);
        results[i] = std::move(outcome);
      }
      ready.notify_all();
    }
  };

  std::vector<std::thread> pool;
  const size_t threads = std::min(workers, std::max<size_t>(samples.size(), 1));
  for (size_t t = 0; t < threads; ++t) pool.emplace_back(work);

  std::vector<AttackOutcome> outcomes;
  outcomes.reserve(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    std::unique_lock<std::mutex> lock(mutex);
    ready.wait(lock, [&] { return results[i].has_value(); });
    AttackOutcome outcome = std::move(*results[i]);
    results[i].reset();
    lock.unlock();
    if (on_outcome) on_outcome(i, outcome);
    outcomes.push_back(std::move(outcome));
  }
  for (std::thread& thread : pool) thread.join();
  return outcomes;
}

AttackOutcome BruteForceAttack(const Sample& sample,
                               const PerturbationLexicon& lexicon,
                               PerturbationKind kind, size_t rho,
                               Scorer& scorer, const PerturbOptions& options,
                               size_t cap) {
  if (rho == 0) throw ContractViolation("rho must be at least 1");
  AttackOutcome outcome;
  outcome.sample_id = sample.id;
  const ScoreResponse original = ScoreOriginal(sample, scorer);
  outcome.evals_used = 1;
  if (original.PredictsNoAnswer()) {
    outcome.status = AttackStatus::kSkippedNoAnswer;
    outcome.p_orig = original.best_prob;
    return outcome;
  }
  outcome.original_span = original.best_span;
  outcome.p_orig = original.best_prob;

  struct Node {
    PerturbedQuestion question;
    size_t depth;
  };
  std::unordered_set<std::string> visited = {sample.question.text};
  std::vector<Node> nodes;
  std::vector<PerturbedQuestion> frontier = {RootQuestion(sample)};
  for (size_t depth = 1; depth <= rho && !frontier.empty(); ++depth) {
    std::vector<PerturbedQuestion> next;
    for (const PerturbedQuestion& parent : frontier) {
      const CandidateSpace space(kind, parent.question, lexicon, options,
                                 sample.context);
      for (const Edit& edit : space.AllEdits()) {
        PerturbedQuestion child = ApplyEdit(parent, edit);
        if (!visited.insert(child.question.text).second) continue;
        if (visited.size() - 1 > cap) {
          throw ContractViolation("perturbation space exceeds " +
                                  std::to_string(cap) + " texts at depth " +
                                  std::to_string(depth));
        }
        nodes.push_back({child, depth});
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  if (nodes.empty()) {
    outcome.status = AttackStatus::kSkippedNoCandidates;
    return outcome;
  }

  std::vector<const std::string*> texts;
  texts.reserve(nodes.size());
  for (const Node& node : nodes) texts.push_back(&node.question.question.text);
  constexpr size_t kChunk = 256;
  std::vector<double> probs;
  for (size_t start = 0; start < texts.size(); start += kChunk) {
    const std::vector<const std::string*> chunk(
        texts.begin() + start,
        texts.begin() + std::min(texts.size(), start + kChunk));
    const std::vector<double> part =
        ScoreSpan(sample, *outcome.original_span, chunk, 1, scorer);
    probs.insert(probs.end(), part.begin(), part.end());
  }
  outcome.evals_used += nodes.size();

  std::optional<Candidate> best;
  size_t best_depth = 0;
  for (size_t i = 0; i < nodes.size(); ++i) {
    Candidate candidate{nodes[i].question, 0, probs[i],
                        probs[i] - outcome.p_orig};
    if (!best || Better(candidate, *best)) {
      best = std::move(candidate);
      best_depth = nodes[i].depth;
    }
  }
  SetResult(outcome, *best);
  if (best->delta > 0.0) {
    outcome.status = AttackStatus::kVulnerable;
    outcome.found_at_depth = best_depth;
  } else {
    outcome.status = AttackStatus::kRobust;
  }
  return outcome;
}

AttackOutcome CollectionAttack(const Sample& sample,
                               std::span<const std::string> collection,
                               Scorer& scorer) {
  if (collection.empty()) throw ContractViolation("empty question collection");
  AttackOutcome outcome;
  outcome.sample_id = sample.id;
  const ScoreResponse original = ScoreOriginal(sample, scorer);
  outcome.evals_used = 1;
  if (original.PredictsNoAnswer()) {
    outcome.status = AttackStatus::kSkippedNoAnswer;
    outcome.p_orig = original.best_prob;
    return outcome;
  }
  outcome.original_span = original.best_span;
  outcome.p_orig = original.best_prob;

  std::vector<const std::string*> texts;
  for (const std::string& question : collection) texts.push_back(&question);
  constexpr size_t kChunk = 256;
  std::optional<Candidate> best;
  for (size_t start = 0; start < texts.size(); start += kChunk) {
    const std::vector<const std::string*> chunk(
        texts.begin() + start,
        texts.begin() + std::min(texts.size(), start + kChunk));
    const std::vector<double> probs =
        ScoreSpan(sample, *outcome.original_span, chunk, 1, scorer);
    for (size_t i = 0; i < chunk.size(); ++i) {
      Candidate candidate;
      candidate.question.question.text = *chunk[i];
      candidate.question.parent_id = sample.id;
      candidate.p = probs[i];
      candidate.delta = probs[i] - outcome.p_orig;
      if (!best || Better(candidate, *best)) best = std::move(candidate);
    }
  }
  outcome.evals_used += texts.size();
  SetResult(outcome, *best);
  if (best->delta > 0.0) {
    outcome.status = AttackStatus::kVulnerable;
    outcome.found_at_depth = 1;
  } else {
    outcome.status = AttackStatus::kRobust;
  }
  return outcome;
}

json CollectionYield::ToJson() const {
  json out = {{"attacked", attacked},
              {"vulnerable", vulnerable},
              {"questions_scored", questions_scored},
              {"yield", nullptr}};
  if (yield) out["yield"] = *yield;
  return out;
}

CollectionYield SummarizeCollection(std::span<const AttackOutcome> outcomes) {
  CollectionYield summary;
  for (const AttackOutcome& outcome : outcomes) {
    if (outcome.status == AttackStatus::kVulnerable) ++summary.vulnerable;
    if (outcome.status == AttackStatus::kVulnerable ||
        outcome.status == AttackStatus::kRobust) {
      ++summary.attacked;
      summary.questions_scored += outcome.evals_used - 1;
    }
  }
  if (summary.attacked > 0) {
    summary.yield = static_cast<double>(summary.vulnerable) /
                    static_cast<double>(summary.attacked);
  }
  return summary;
}

}  // namespace undersense
