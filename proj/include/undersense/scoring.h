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

// The black-box scorer contract. A scorer maps (context, question) to its
// best answer span, that span's probability, the NoAnswer probability and
// the probabilities of any requested context spans. Everything the attack
// knows about a model comes through this interface.

#ifndef UNDERSENSE_SCORING_H_
#define UNDERSENSE_SCORING_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace undersense {

// Byte offsets into the context, end exclusive. Code point offsets on the
// wire.
struct SpanRef {
  size_t char_start = 0;
  size_t char_end = 0;

  bool operator==(const SpanRef&) const = default;
  auto operator<=>(const SpanRef&) const = default;
};

struct ScoreRequest {
  std::string request_id;
  std::string context;
  std::string question;
  std::vector<SpanRef> spans_to_score;

  bool operator==(const ScoreRequest&) const = default;
};

struct ScoreResponse {
  std::string request_id;
  // Absent when the server predicts NoAnswer outright.
  std::optional<SpanRef> best_span;
  double best_prob = 0.0;
  double noanswer_prob = 0.0;
  std::vector<double> span_probs;
  // Set when the server could not serve this one request.
  std::optional<std::string> error;

  bool PredictsNoAnswer() const {
    return !best_span.has_value() || noanswer_prob > best_prob;
  }

  bool operator==(const ScoreResponse&) const = default;
};

struct ScorerInfo {
  std::string model_id;
  double noanswer_threshold = 0.0;
};

// Implementations must tolerate concurrent ScoreBatch calls.
class Scorer {
 public:
  virtual ~Scorer() = default;

  // One response per request, in request order. Throws TransportError or
  // ProtocolError; per-request failures come back in ScoreResponse::error.
  virtual std::vector<ScoreResponse> ScoreBatch(
      std::span<const ScoreRequest> requests) = 0;

  virtual ScorerInfo Info() = 0;
};

// Wire encoding. Offsets are converted between bytes (memory) and code
// points (wire) against the request context; responses therefore need the
// context of the request they answer. Decoders throw FormatError.
nlohmann::json RequestToJson(const ScoreRequest& request);
ScoreRequest RequestFromJson(const nlohmann::json& json);
nlohmann::json ResponseToJson(const ScoreResponse& response,
                              std::string_view context);
ScoreResponse ResponseFromJson(const nlohmann::json& json,
                               std::string_view context);
nlohmann::json InfoToJson(const ScorerInfo& info);
ScorerInfo InfoFromJson(const nlohmann::json& json);

// Checks a decoded batch against its requests: count, ids, span_probs
// length, probability range and span bounds. Throws ProtocolError carrying
// `raw_payload`.
void CheckResponses(std::span<const ScoreRequest> requests,
                    std::span<const ScoreResponse> responses,
                    const std::string& raw_payload);

// Throws ContractViolation when a span is empty or outside the context.
void ValidateSpans(const ScoreRequest& request);

}  // namespace undersense

#endif  // UNDERSENSE_SCORING_H_
