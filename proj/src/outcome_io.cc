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

#include "undersense/outcome_io.h"

#include <fstream>

#include "undersense/errors.h"
#include "undersense/json_util.h"

namespace undersense {

using nlohmann::json;

namespace {

std::optional<std::string_view> ContextFor(const ContextIndex* contexts,
                                           const std::string& id) {
  if (contexts == nullptr) return std::nullopt;
  const auto it = contexts->find(id);
  if (it == contexts->end()) return std::nullopt;
  return std::string_view(it->second);
}

}  // namespace

json RunHeader::ToJson() const {
  return {{"config", config.ToJson()},
          {"lexicon_fingerprint", lexicon_fingerprint},
          {"model_id", model_id},
          {"code_version", code_version},
          {"manifest_id", manifest_id}};
}

RunHeader RunHeader::FromJson(const json& item) {
  RunHeader header;
  header.config = AttackConfig::FromJson(RequireField(item, "config"));
  header.lexicon_fingerprint = RequireString(item, "lexicon_fingerprint");
  header.model_id = RequireString(item, "model_id");
  header.code_version = RequireString(item, "code_version");
  header.manifest_id = item.value("manifest_id", "");
  return header;
}

bool RunHeader::SameRun(const RunHeader& other) const {
  return config == other.config &&
         lexicon_fingerprint == other.lexicon_fingerprint &&
         model_id == other.model_id && code_version == other.code_version;
}

void OutcomeCounts::Add(AttackStatus status) {
  switch (status) {
    case AttackStatus::kVulnerable: ++vulnerable; break;
    case AttackStatus::kRobust: ++robust; break;
    case AttackStatus::kSkippedNoAnswer: ++skipped_noanswer; break;
    case AttackStatus::kSkippedNoCandidates: ++skipped_nocandidates; break;
    case AttackStatus::kError: ++errors; break;
  }
}

size_t OutcomeCounts::total() const {
  return vulnerable + robust + skipped_noanswer + skipped_nocandidates + errors;
}

std::optional<double> OutcomeCounts::error_rate() const {
  const size_t denominator = vulnerable + robust;
  if (denominator == 0) return std::nullopt;
  return static_cast<double>(vulnerable) / static_cast<double>(denominator);
}

json OutcomeCounts::ToJson() const {
  return {{"vulnerable", vulnerable},
          {"robust", robust},
          {"skipped_noanswer", skipped_noanswer},
          {"skipped_nocandidates", skipped_nocandidates},
          {"errors", errors}};
}

OutcomeCounts CountOutcomes(std::span<const AttackOutcome> outcomes) {
  OutcomeCounts counts;
  for (const AttackOutcome& outcome : outcomes) counts.Add(outcome.status);
  return counts;
}

OutcomeFile ReadOutcomes(std::istream& in, const ContextIndex* contexts) {
  OutcomeFile file;
  size_t line_number = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_number) + ": ";
    try {
      const json item = ParseJson(line);
      if (item.is_object() && item.contains("run_header")) {
        RunHeader header = RunHeader::FromJson(item["run_header"]);
        if (file.header && !file.header->SameRun(header)) {
          throw FormatError("outcomes from different runs are mixed");
        }
        if (!file.header) file.header = std::move(header);
        continue;
      }
      if (item.is_object() && item.contains("run_footer")) {
        const json& footer = item["run_footer"];
        const json& counts = RequireField(footer, "counts");
        OutcomeCounts parsed;
        parsed.vulnerable = RequireIndex(counts, "vulnerable");
        parsed.robust = RequireIndex(counts, "robust");
        parsed.skipped_noanswer = RequireIndex(counts, "skipped_noanswer");
        parsed.skipped_nocandidates = RequireIndex(counts, "skipped_nocandidates");
        parsed.errors = RequireIndex(counts, "errors");
        file.footer_counts = parsed;
        const json& rate = RequireField(footer, "error_rate");
        if (rate.is_number()) file.footer_error_rate = rate.get<double>();
        continue;
      }
      const std::string id = RequireString(item, "sample_id");
      file.outcomes.push_back(OutcomeFromJson(item, ContextFor(contexts, id)));
    } catch (const FormatError& e) {
      throw FormatError(where + e.what());
    }
  }
  return file;
}

OutcomeFile ReadOutcomeFile(const std::string& path,
                            const ContextIndex* contexts) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open outcome file '" + path + "'");
  try {
    return ReadOutcomes(in, contexts);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void WriteHeaderLine(std::ostream& out, const RunHeader& header) {
  out << json{{"run_header", header.ToJson()}}.dump() << '\n';
}

void WriteOutcomeLine(std::ostream& out, const AttackOutcome& outcome,
                      const ContextIndex* contexts) {
  out << OutcomeToJson(outcome, ContextFor(contexts, outcome.sample_id)).dump()
      << '\n';
}

void WriteFooterLine(std::ostream& out, const OutcomeCounts& counts) {
  json footer = {{"counts", counts.ToJson()}, {"error_rate", nullptr}};
  if (const auto rate = counts.error_rate()) footer["error_rate"] = *rate;
  out << json{{"run_footer", footer}}.dump() << '\n';
}

}  // namespace undersense
