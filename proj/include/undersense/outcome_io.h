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

// Outcome files: a run-header line, one AttackOutcome per line in dataset
// order, and a footer with the run's error rate.
//
//   {"run_header": {"config", "lexicon_fingerprint", "model_id",
//                   "code_version", "manifest_id"}}
//   {"sample_id": ..., "status": ..., ...}
//   {"run_footer": {"error_rate", "counts"}}

#ifndef UNDERSENSE_OUTCOME_IO_H_
#define UNDERSENSE_OUTCOME_IO_H_

#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "undersense/attack.h"

namespace undersense {

struct RunHeader {
  AttackConfig config;
  std::string lexicon_fingerprint;
  std::string model_id;
  std::string code_version;
  std::string manifest_id;

  nlohmann::json ToJson() const;
  static RunHeader FromJson(const nlohmann::json& json);

  // Same config, lexicon, model and code; the manifest may differ.
  bool SameRun(const RunHeader& other) const;
};

struct OutcomeCounts {
  size_t vulnerable = 0;
  size_t robust = 0;
  size_t skipped_noanswer = 0;
  size_t skipped_nocandidates = 0;
  size_t errors = 0;

  void Add(AttackStatus status);
  size_t total() const;
  // vulnerable / (vulnerable + robust); nullopt when that is 0.
  std::optional<double> error_rate() const;
  nlohmann::json ToJson() const;
};

OutcomeCounts CountOutcomes(std::span<const AttackOutcome> outcomes);

struct OutcomeFile {
  std::optional<RunHeader> header;
  std::vector<AttackOutcome> outcomes;
  // Present when the run finished.
  std::optional<OutcomeCounts> footer_counts;
  std::optional<double> footer_error_rate;
};

// sample_id -> context, used to convert span offsets.
using ContextIndex = std::map<std::string, std::string, std::less<>>;

// Throws FormatError on a malformed line or on header lines that disagree
// (outcomes from different runs must not be mixed).
OutcomeFile ReadOutcomes(std::istream& in, const ContextIndex* contexts);
OutcomeFile ReadOutcomeFile(const std::string& path,
                            const ContextIndex* contexts);

void WriteHeaderLine(std::ostream& out, const RunHeader& header);
void WriteOutcomeLine(std::ostream& out, const AttackOutcome& outcome,
                      const ContextIndex* contexts);
void WriteFooterLine(std::ostream& out, const OutcomeCounts& counts);

}  // namespace undersense

#endif  // UNDERSENSE_OUTCOME_IO_H_
