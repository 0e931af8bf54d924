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

#include "undersense/conformance.h"

#include <cmath>
#include <functional>

#include "undersense/utf8.h"

namespace undersense {

using nlohmann::json;

namespace {

constexpr char kContext[] =
    "The Normans were the people who in the 10th and 11th centuries gave "
    "their name to Normandy, a region in France. They were descended from "
    "Norse raiders and pirates from Denmark, Iceland and Norway.";
constexpr char kQuestion[] = "In what country is Normandy located?";
// Non-ASCII text exercises the code point offset conversion.
constexpr char kUnicodeContext[] =
    "Z\xc3\xbcrich lies on the Limmat. S\xc3\xa3o Paulo is the largest city "
    "in Brazil, and \xe6\x9d\xb1\xe4\xba\xac is the capital of Japan.";
constexpr char kUnicodeQuestion[] = "What is the largest city in Brazil?";

ScoreRequest MakeRequest(std::string id, std::string context,
                         std::string question, std::vector<SpanRef> spans = {}) {
  return ScoreRequest{std::move(id), std::move(context), std::move(question),
                      std::move(spans)};
}

bool InRange(double p) { return std::isfinite(p) && p >= 0.0 && p <= 1.0; }

std::string Describe(const ScoreResponse& r) {
  json out = {{"request_id", r.request_id},
              {"best_prob", r.best_prob},
              {"noanswer_prob", r.noanswer_prob},
              {"span_probs", r.span_probs}};
  if (r.error) out["error"] = *r.error;
  return out.dump();
}

// Spans of whole words in `text` (split on ASCII spaces).
std::vector<SpanRef> WordSpans(std::string_view text, size_t limit) {
  std::vector<SpanRef> spans;
  size_t start = 0;
  while (start < text.size() && spans.size() < limit) {
    size_t end = text.find(' ', start);
    if (end == std::string_view::npos) end = text.size();
    size_t stop = end;
    while (stop > start && (text[stop - 1] == '.' || text[stop - 1] == ',')) {
      --stop;
    }
    if (stop > start) spans.push_back({start, stop});
    start = end + 1;
  }
  return spans;
}

using CheckFn = std::function<std::string(Scorer&)>;

ConformanceCheck Run(const std::string& name, Scorer& scorer, const CheckFn& fn) {
  ConformanceCheck check{name, false, ""};
  try {
    check.detail = fn(scorer);
    check.passed = check.detail.empty();
  } catch (const std::exception& e) {
    check.detail = std::string("exception: ") + e.what();
  }
  return check;
}

std::string CheckMeta(Scorer& scorer) {
  const ScorerInfo info = scorer.Info();
  if (info.model_id.empty()) return "empty model_id";
  if (!std::isfinite(info.noanswer_threshold)) return "non-finite threshold";
  return "";
}

std::string CheckEmptySpans(Scorer& scorer) {
  const std::vector<ScoreRequest> batch = {MakeRequest("a", kContext, kQuestion)};
  const auto responses = scorer.ScoreBatch(batch);
  if (responses.size() != 1) return "expected one response";
  if (responses[0].error) return "unexpected error: " + *responses[0].error;
  if (!responses[0].span_probs.empty()) return "span_probs should be empty";
  return "";
}

std::string CheckRanges(Scorer& scorer) {
  const std::vector<ScoreRequest> batch = {
      MakeRequest("a", kContext, kQuestion, WordSpans(kContext, 12)),
      MakeRequest("b", kUnicodeContext, kUnicodeQuestion)};
  for (const ScoreResponse& r : scorer.ScoreBatch(batch)) {
    if (r.error) continue;
    if (!InRange(r.best_prob) || !InRange(r.noanswer_prob)) {
      return "probability outside [0, 1]: " + Describe(r);
    }
    for (const double p : r.span_probs) {
      if (!InRange(p)) return "span probability outside [0, 1]: " + Describe(r);
    }
  }
  return "";
}

std::string CheckDeterminism(Scorer& scorer) {
  const ScoreRequest request =
      MakeRequest("same", kContext, kQuestion, WordSpans(kContext, 6));
  const std::vector<ScoreRequest> twice = {request, request};
  const auto first = scorer.ScoreBatch(twice);
  const auto again = scorer.ScoreBatch(twice);
  if (first.size() != 2 || again.size() != 2) return "wrong response count";
  if (!(first[0] == first[1])) return "identical requests in one batch differ";
  if (!(first[0] == again[0])) return "repeated request differs across calls";
  return "";
}

std::string CheckAlignment(Scorer& scorer) {
  std::vector<ScoreRequest> batch;
  const std::vector<std::string> questions = {
      kQuestion, "Who were the Normans?", "Where did the raiders come from?",
      "What region was named after the Normans?", "When did the Normans live?"};
  for (size_t i = 0; i < 40; ++i) {
    batch.push_back(MakeRequest("req-" + std::to_string(39 - i), kContext,
                                questions[i % questions.size()]));
  }
  const auto responses = scorer.ScoreBatch(batch);
  if (responses.size() != batch.size()) return "wrong response count";
  for (size_t i = 0; i < batch.size(); ++i) {
    if (responses[i].request_id != batch[i].request_id) {
      return "response " + std::to_string(i) + " has id '" +
             responses[i].request_id + "'";
    }
  }
  // The same request alone must score the same as inside the batch.
  const std::vector<ScoreRequest> alone = {batch[7]};
  const auto single = scorer.ScoreBatch(alone);
  if (!(single.at(0) == responses[7])) return "batching changed a response";
  return "";
}

std::string CheckBestSpan(Scorer& scorer) {
  for (const auto& [context, question] :
       {std::pair<const char*, const char*>{kContext, kQuestion},
        {kUnicodeContext, kUnicodeQuestion}}) {
    const std::vector<ScoreRequest> probe = {MakeRequest("p", context, question)};
    const ScoreResponse first = scorer.ScoreBatch(probe).at(0);
    if (first.error) return "unexpected error: " + *first.error;
    if (!first.best_span) continue;
    const std::string_view text(context);
    const SpanRef best = *first.best_span;
    if (best.char_end > text.size() || best.char_start >= best.char_end) {
      return "best_span outside the context";
    }
    // Decoding already put the offsets on code point boundaries.
    const OffsetMap offsets(text);
    offsets.ToCodepoint(best.char_start);
    offsets.ToCodepoint(best.char_end);
    std::vector<SpanRef> spans = {best};
    for (const SpanRef& span : WordSpans(text, 8)) {
      if (!(span == best)) spans.push_back(span);
    }
    const std::vector<ScoreRequest> scored = {
        MakeRequest("q", context, question, spans)};
    const ScoreResponse second = scorer.ScoreBatch(scored).at(0);
    if (second.error) {
      // Some servers only score spans they can align; retry with the best
      // span alone.
      const std::vector<ScoreRequest> only = {
          MakeRequest("q", context, question, {best})};
      const ScoreResponse alone = scorer.ScoreBatch(only).at(0);
      if (alone.error) return "cannot score its own best span: " + *alone.error;
      spans = {best};
      if (std::fabs(alone.span_probs.at(0) - first.best_prob) > 1e-9) {
        return "P(best_span) differs from best_prob: " + Describe(alone);
      }
      continue;
    }
    if (std::fabs(second.span_probs.at(0) - first.best_prob) > 1e-9) {
      return "P(best_span) differs from best_prob: " + Describe(second);
    }
    for (size_t i = 1; i < spans.size(); ++i) {
      if (second.span_probs[i] > first.best_prob + 1e-12) {
        return "a requested span outscores best_span: " + Describe(second);
      }
    }
  }
  return "";
}

std::string CheckErrorIsolation(Scorer& scorer) {
  const std::vector<ScoreRequest> batch = {
      MakeRequest("ok-1", kContext, kQuestion),
      MakeRequest("bad", "", kQuestion),
      MakeRequest("ok-2", kContext, "Who were the Normans?")};
  const auto responses = scorer.ScoreBatch(batch);
  if (responses.size() != 3) return "wrong response count";
  if (responses[0].error || responses[2].error) {
    return "an error leaked into neighbouring requests";
  }
  if (!responses[1].error) return "empty context was not reported as an error";
  return "";
}

std::string CheckNoAnswerConsistency(Scorer& scorer) {
  const std::vector<ScoreRequest> batch = {
      MakeRequest("x", kContext, "What is the boiling point of mercury?")};
  const ScoreResponse r = scorer.ScoreBatch(batch).at(0);
  if (r.error) return "unexpected error: " + *r.error;
  if (!r.best_span && r.best_prob > r.noanswer_prob + 1e-12 && r.best_prob > 0) {
    return "no best_span but best_prob exceeds noanswer_prob";
  }
  if (r.best_prob + r.noanswer_prob > 1.0 + 1e-9) {
    return "best_prob + noanswer_prob exceeds 1";
  }
  return "";
}

}  // namespace

bool ConformanceReport::passed() const {
  for (const ConformanceCheck& check : checks) {
    if (!check.passed) return false;
  }
  return !checks.empty();
}

json ConformanceReport::ToJson() const {
  json out = {{"passed", passed()}, {"checks", json::array()}};
  for (const ConformanceCheck& check : checks) {
    out["checks"].push_back(
        {{"name", check.name}, {"passed", check.passed}, {"detail", check.detail}});
  }
  return out;
}

ConformanceReport RunConformance(Scorer& scorer) {
  ConformanceReport report;
  report.checks.push_back(Run("meta", scorer, CheckMeta));
  report.checks.push_back(Run("empty_spans", scorer, CheckEmptySpans));
  report.checks.push_back(Run("probability_range", scorer, CheckRanges));
  report.checks.push_back(Run("determinism", scorer, CheckDeterminism));
  report.checks.push_back(Run("order_alignment", scorer, CheckAlignment));
  report.checks.push_back(Run("best_span_contract", scorer, CheckBestSpan));
  report.checks.push_back(Run("error_isolation", scorer, CheckErrorIsolation));
  report.checks.push_back(Run("noanswer_consistency", scorer, CheckNoAnswerConsistency));
  return report;
}

}  // namespace undersense
