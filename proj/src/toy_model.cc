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

#include "undersense/toy_model.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "undersense/digest.h"
#include "undersense/errors.h"
#include "undersense/json_util.h"

namespace undersense {

using nlohmann::json;

namespace {

bool IsTokenByte(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

// Token index of every byte offset that starts (or ends) a token.
struct TokenBoundaries {
  std::map<size_t, size_t> by_start;
  std::map<size_t, size_t> by_end;
};

TokenBoundaries IndexBoundaries(const std::vector<ToyToken>& tokens) {
  TokenBoundaries b;
  for (size_t i = 0; i < tokens.size(); ++i) {
    b.by_start.emplace(tokens[i].start, i);
    b.by_end.emplace(tokens[i].end, i + 1);
  }
  return b;
}

class Featurizer {
 public:
  Featurizer(std::string_view context, std::string_view question)
      : tokens_(ToyTokenize(context)) {
    std::map<std::string, int> types;
    for (const ToyToken& token : ToyTokenize(question)) {
      types.emplace(token.lower, static_cast<int>(types.size()));
    }
    question_types_ = types.size();
    type_of_.reserve(tokens_.size());
    for (const ToyToken& token : tokens_) {
      const auto it = types.find(token.lower);
      type_of_.push_back(it == types.end() ? -1 : it->second);
    }
    seen_.assign(question_types_, 0);
  }

  const std::vector<ToyToken>& tokens() const { return tokens_; }

  ToyFeatures Features(size_t begin, size_t end) {
    const size_t n = tokens_.size();
    const size_t left = begin >= kToyWindow ? begin - kToyWindow : 0;
    const size_t right = std::min(n, end + kToyWindow);
    ToyFeatures f{};
    f[0] = Overlap(left, begin, end, right);
    f[1] = Overlap(begin, end, end, end);
    f[2] = static_cast<double>(end - begin);
    f[3] = 1.0;
    return f;
  }

 private:
  // Overlap of the question with tokens [a, b) and [c, d).
  double Overlap(size_t a, size_t b, size_t c, size_t d) {
    if (question_types_ == 0) return 0.0;
    ++stamp_;
    size_t shared = 0;
    auto visit = [&](size_t i) {
      const int type = type_of_[i];
      if (type >= 0 && seen_[type] != stamp_) {
        seen_[type] = stamp_;
        ++shared;
      }
    };
    for (size_t i = a; i < b; ++i) visit(i);
    for (size_t i = c; i < d; ++i) visit(i);
    return static_cast<double>(shared) / static_cast<double>(question_types_);
  }

  std::vector<ToyToken> tokens_;
  std::vector<int> type_of_;
  size_t question_types_ = 0;
  std::vector<unsigned> seen_;
  unsigned stamp_ = 0;
};

double Logit(const ToyModelParams& params, const ToyFeatures& f) {
  double z = 0.0;
  for (size_t k = 0; k < kToyFeatureCount; ++k) z += params.w[k] * f[k];
  return z;
}

}  // namespace

std::array<double, kToyParamCount> ToyModelParams::Flat() const {
  return {w[0], w[1], w[2], w[3], noanswer_bias};
}

ToyModelParams ToyModelParams::FromFlat(
    const std::array<double, kToyParamCount>& v) {
  ToyModelParams params;
  for (size_t k = 0; k < kToyFeatureCount; ++k) params.w[k] = v[k];
  params.noanswer_bias = v[kToyFeatureCount];
  return params;
}

json ToyModelParams::ToJson() const {
  return {{"w", w}, {"noanswer_bias", noanswer_bias}};
}

ToyModelParams ToyModelParams::FromJson(const json& item) {
  ToyModelParams params;
  const json& w = RequireField(item, "w");
  if (!w.is_array() || w.size() != kToyFeatureCount) {
    throw FormatError("toy params: 'w' must be an array of 4 numbers");
  }
  for (size_t k = 0; k < kToyFeatureCount; ++k) {
    if (!w[k].is_number()) throw FormatError("toy params: non-numeric weight");
    params.w[k] = w[k].get<double>();
  }
  params.noanswer_bias = RequireNumber(item, "noanswer_bias");
  for (const double v : params.Flat()) {
    if (!std::isfinite(v)) throw FormatError("toy params: non-finite value");
  }
  return params;
}

std::string ToyModelParams::ModelId() const {
  return "toy-" + Sha256Hex(ToJson().dump()).substr(0, 16);
}

ToyModelParams ReadToyParams(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open toy params '" + path + "'");
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return ToyModelParams::FromJson(ParseJson(text));
}

void WriteToyParams(const std::string& path, const ToyModelParams& params) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write toy params '" + path + "'");
  out << params.ToJson().dump() << '\n';
}

std::vector<ToyToken> ToyTokenize(std::string_view text) {
  std::vector<ToyToken> tokens;
  size_t i = 0;
  while (i < text.size()) {
    if (!IsTokenByte(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    ToyToken token;
    token.start = i;
    while (i < text.size() && IsTokenByte(static_cast<unsigned char>(text[i]))) {
      token.lower.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[i]))));
      ++i;
    }
    token.end = i;
    tokens.push_back(std::move(token));
  }
  return tokens;
}

ToyFeaturized ToyFeaturize(std::string_view context,
                           std::string_view question) {
  Featurizer featurizer(context, question);
  const std::vector<ToyToken>& tokens = featurizer.tokens();
  ToyFeaturized out;
  for (size_t begin = 0; begin < tokens.size(); ++begin) {
    for (size_t len = 1;
         len <= kToyMaxSpanTokens && begin + len <= tokens.size(); ++len) {
      out.spans.push_back({tokens[begin].start, tokens[begin + len - 1].end});
      out.features.push_back(featurizer.Features(begin, begin + len));
    }
  }
  return out;
}

ToyFeaturized ToyFeaturize(std::string_view context, std::string_view question,
                           std::span<const SpanRef> candidates) {
  Featurizer featurizer(context, question);
  const TokenBoundaries bounds = IndexBoundaries(featurizer.tokens());
  ToyFeaturized out;
  for (const SpanRef& span : candidates) {
    const auto begin = bounds.by_start.find(span.char_start);
    const auto end = bounds.by_end.find(span.char_end);
    if (begin == bounds.by_start.end() || end == bounds.by_end.end() ||
        begin->second >= end->second) {
      throw ContractViolation("span [" + std::to_string(span.char_start) +
                              ", " + std::to_string(span.char_end) +
                              ") is not on token boundaries");
    }
    out.spans.push_back(span);
    out.features.push_back(featurizer.Features(begin->second, end->second));
  }
  return out;
}

ToyDistribution ToySoftmax(const ToyModelParams& params,
                           const ToyFeaturized& featurized) {
  const size_t k = featurized.spans.size();
  std::vector<double> logits(k);
  double top = params.noanswer_bias;
  for (size_t i = 0; i < k; ++i) {
    logits[i] = Logit(params, featurized.features[i]);
    top = std::max(top, logits[i]);
  }
  ToyDistribution dist;
  dist.span_probs.resize(k);
  double total = std::exp(params.noanswer_bias - top);
  for (size_t i = 0; i < k; ++i) {
    dist.span_probs[i] = std::exp(logits[i] - top);
    total += dist.span_probs[i];
  }
  for (double& p : dist.span_probs) p /= total;
  dist.noanswer_prob = std::exp(params.noanswer_bias - top) / total;
  for (size_t i = 0; i < k; ++i) {
    if (!dist.best) {
      dist.best = i;
      continue;
    }
    const SpanRef& a = featurized.spans[i];
    const SpanRef& b = featurized.spans[*dist.best];
    if (logits[i] > logits[*dist.best] ||
        (logits[i] == logits[*dist.best] &&
         (a.char_start < b.char_start ||
          (a.char_start == b.char_start && a.char_end < b.char_end)))) {
      dist.best = i;
    }
  }
  return dist;
}

ScoreResponse ToyScore(const ToyModelParams& params,
                       const ScoreRequest& request) {
  if (request.context.empty()) {
    throw ContractViolation("request " + request.request_id +
                            ": empty context");
  }
  const ToyFeaturized featurized =
      ToyFeaturize(request.context, request.question);
  const ToyDistribution dist = ToySoftmax(params, featurized);
  ScoreResponse response;
  response.request_id = request.request_id;
  response.noanswer_prob = dist.noanswer_prob;
  if (dist.best) {
    response.best_span = featurized.spans[*dist.best];
    response.best_prob = dist.span_probs[*dist.best];
  }
  for (const SpanRef& span : request.spans_to_score) {
    const auto it = std::lower_bound(featurized.spans.begin(),
                                     featurized.spans.end(), span);
    if (it == featurized.spans.end() || *it != span) {
      response.span_probs.clear();
      response.error = "span [" + std::to_string(span.char_start) + ", " +
                       std::to_string(span.char_end) +
                       ") is not a candidate of the toy model";
      break;
    }
    response.span_probs.push_back(
        dist.span_probs[static_cast<size_t>(it - featurized.spans.begin())]);
  }
  return response;
}

std::optional<ToyExample> MakeToyExample(const Sample& sample,
                                         std::string_view question,
                                         bool no_answer) {
  ToyFeaturized featurized = ToyFeaturize(sample.context, question);
  ToyExample example;
  if (!no_answer && !sample.is_impossible && !sample.answers.empty()) {
    const Answer& answer = sample.answers.front();
    const SpanRef gold{answer.char_start,
                       answer.char_start + answer.text.size()};
    const auto it = std::lower_bound(featurized.spans.begin(),
                                     featurized.spans.end(), gold);
    if (it == featurized.spans.end() || *it != gold) return std::nullopt;
    example.gold = static_cast<size_t>(it - featurized.spans.begin());
  }
  example.features = std::move(featurized.features);
  return example;
}

LossGrad ToyLossGrad(const ToyModelParams& params,
                     std::span<const ToyExample> batch) {
  LossGrad out;
  if (batch.empty()) return out;
  std::vector<double> logits;
  for (const ToyExample& example : batch) {
    const size_t k = example.features.size();
    logits.resize(k);
    double top = params.noanswer_bias;
    for (size_t i = 0; i < k; ++i) {
      logits[i] = Logit(params, example.features[i]);
      top = std::max(top, logits[i]);
    }
    double total = std::exp(params.noanswer_bias - top);
    for (size_t i = 0; i < k; ++i) total += std::exp(logits[i] - top);
    const double log_total = top + std::log(total);
    const double gold_logit =
        example.gold ? logits[*example.gold] : params.noanswer_bias;
    out.loss += log_total - gold_logit;
    for (size_t i = 0; i < k; ++i) {
      const double p = std::exp(logits[i] - log_total);
      for (size_t d = 0; d < kToyFeatureCount; ++d) {
        out.grad[d] += p * example.features[i][d];
      }
    }
    out.grad[kToyFeatureCount] += std::exp(params.noanswer_bias - log_total);
    if (example.gold) {
      for (size_t d = 0; d < kToyFeatureCount; ++d) {
        out.grad[d] -= example.features[*example.gold][d];
      }
    } else {
      out.grad[kToyFeatureCount] -= 1.0;
    }
  }
  const double n = static_cast<double>(batch.size());
  out.loss /= n;
  for (double& g : out.grad) g /= n;
  return out;
}

std::string ToyPredict(const ToyModelParams& params, std::string_view context,
                       std::string_view question) {
  const ToyFeaturized featurized = ToyFeaturize(context, question);
  const ToyDistribution dist = ToySoftmax(params, featurized);
  if (!dist.best || dist.noanswer_prob > dist.span_probs[*dist.best]) {
    return "";
  }
  const SpanRef& span = featurized.spans[*dist.best];
  return std::string(
      context.substr(span.char_start, span.char_end - span.char_start));
}

std::vector<ScoreResponse> ToyScorer::ScoreBatch(
    std::span<const ScoreRequest> requests) {
  std::vector<ScoreResponse> responses;
  responses.reserve(requests.size());
  for (const ScoreRequest& request : requests) {
    try {
      responses.push_back(ToyScore(params_, request));
    } catch (const ContractViolation& e) {
      ScoreResponse failed;
      failed.request_id = request.request_id;
      failed.error = e.what();
      responses.push_back(std::move(failed));
    }
  }
  return responses;
}

ScorerInfo ToyScorer::Info() {
  // The toy decides NoAnswer by comparing probabilities directly.
  return ScorerInfo{params_.ModelId(), 0.0};
}

}  // namespace undersense
