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

#include "undersense/scoring.h"

#include "undersense/errors.h"
#include "undersense/json_util.h"
#include "undersense/utf8.h"

namespace undersense {

using nlohmann::json;

namespace {

json SpanToJson(const SpanRef& span, const OffsetMap& offsets) {
  return {{"char_start", offsets.ToCodepoint(span.char_start)},
          {"char_end", offsets.ToCodepoint(span.char_end)}};
}

SpanRef SpanFromJson(const json& item, const OffsetMap& offsets) {
  const size_t start = RequireIndex(item, "char_start");
  const size_t end = RequireIndex(item, "char_end");
  if (start >= end || end > offsets.codepoint_count()) {
    throw FormatError("span [" + std::to_string(start) + ", " +
                      std::to_string(end) + ") is not inside the context");
  }
  return SpanRef{offsets.ToByte(start), offsets.ToByte(end)};
}

double RequireProbability(const json& object, const char* key) {
  const double value = RequireNumber(object, key);
  if (!(value >= 0.0 && value <= 1.0)) {
    throw FormatError(std::string("field '") + key + "' is not in [0, 1]");
  }
  return value;
}

}  // namespace

void ValidateSpans(const ScoreRequest& request) {
  for (const SpanRef& span : request.spans_to_score) {
    if (span.char_start >= span.char_end ||
        span.char_end > request.context.size()) {
      throw ContractViolation("request " + request.request_id +
                              ": span outside the context");
    }
  }
}

json RequestToJson(const ScoreRequest& request) {
  const OffsetMap offsets(request.context);
  json spans = json::array();
  for (const SpanRef& span : request.spans_to_score) {
    spans.push_back(SpanToJson(span, offsets));
  }
  return {{"request_id", request.request_id},
          {"context", request.context},
          {"question", request.question},
          {"spans_to_score", std::move(spans)}};
}

ScoreRequest RequestFromJson(const json& item) {
  ScoreRequest request;
  request.request_id = RequireString(item, "request_id");
  request.context = RequireString(item, "context");
  request.question = RequireString(item, "question");
  const OffsetMap offsets(request.context);
  const auto spans = item.find("spans_to_score");
  if (spans != item.end() && !spans->is_null()) {
    if (!spans->is_array()) {
      throw FormatError("field 'spans_to_score' must be an array");
    }
    for (const json& span : *spans) {
      request.spans_to_score.push_back(SpanFromJson(span, offsets));
    }
  }
  return request;
}

json ResponseToJson(const ScoreResponse& response, std::string_view context) {
  const OffsetMap offsets(context);
  json out = {{"request_id", response.request_id},
              {"best_span", nullptr},
              {"best_prob", response.best_prob},
              {"noanswer_prob", response.noanswer_prob},
              {"span_probs", response.span_probs}};
  if (response.best_span) out["best_span"] = SpanToJson(*response.best_span, offsets);
  if (response.error) out["error"] = *response.error;
  return out;
}

ScoreResponse ResponseFromJson(const json& item, std::string_view context) {
  ScoreResponse response;
  response.request_id = RequireString(item, "request_id");
  const auto error = item.find("error");
  if (error != item.end() && !error->is_null()) {
    if (!error->is_string()) throw FormatError("field 'error' must be a string");
    response.error = error->get<std::string>();
    // A failed request need not carry the rest of the fields.
    if (!item.contains("best_prob")) return response;
  }
  const OffsetMap offsets(context);
  const json& best = RequireField(item, "best_span");
  if (!best.is_null()) response.best_span = SpanFromJson(best, offsets);
  response.best_prob = RequireProbability(item, "best_prob");
  response.noanswer_prob = RequireProbability(item, "noanswer_prob");
  const json& probs = RequireField(item, "span_probs");
  if (!probs.is_array()) throw FormatError("field 'span_probs' must be an array");
  for (const json& p : probs) {
    if (!p.is_number()) throw FormatError("non-numeric entry in 'span_probs'");
    const double value = p.get<double>();
    if (!(value >= 0.0 && value <= 1.0)) {
      throw FormatError("span probability not in [0, 1]");
    }
    response.span_probs.push_back(value);
  }
  return response;
}

json InfoToJson(const ScorerInfo& info) {
  return {{"model_id", info.model_id},
          {"noanswer_threshold", info.noanswer_threshold}};
}

ScorerInfo InfoFromJson(const json& item) {
  return ScorerInfo{RequireString(item, "model_id"),
                    RequireNumber(item, "noanswer_threshold")};
}

void CheckResponses(std::span<const ScoreRequest> requests,
                    std::span<const ScoreResponse> responses,
                    const std::string& raw_payload) {
  if (requests.size() != responses.size()) {
    throw ProtocolError("expected " + std::to_string(requests.size()) +
                            " responses, got " +
                            std::to_string(responses.size()),
                        raw_payload);
  }
  for (size_t i = 0; i < requests.size(); ++i) {
    const ScoreRequest& request = requests[i];
    const ScoreResponse& response = responses[i];
    if (response.request_id != request.request_id) {
      throw ProtocolError("response id '" + response.request_id +
                              "' does not match request '" +
                              request.request_id + "'",
                          raw_payload);
    }
    if (response.error) continue;
    if (response.span_probs.size() != request.spans_to_score.size()) {
      throw ProtocolError("request " + request.request_id + ": " +
                              std::to_string(response.span_probs.size()) +
                              " span probabilities for " +
                              std::to_string(request.spans_to_score.size()) +
                              " spans",
                          raw_payload);
    }
    auto in_range = [](double p) { return p >= 0.0 && p <= 1.0; };
    bool ok = in_range(response.best_prob) && in_range(response.noanswer_prob);
    for (const double p : response.span_probs) ok = ok && in_range(p);
    if (!ok) {
      throw ProtocolError(
          "request " + request.request_id + ": probability outside [0, 1]",
          raw_payload);
    }
    if (response.best_span &&
        (response.best_span->char_start >= response.best_span->char_end ||
         response.best_span->char_end > request.context.size())) {
      throw ProtocolError(
          "request " + request.request_id + ": best_span outside the context",
          raw_payload);
    }
  }
}

}  // namespace undersense
