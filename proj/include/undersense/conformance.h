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

// Wire-protocol conformance checks that any scorer endpoint must pass.

#ifndef UNDERSENSE_CONFORMANCE_H_
#define UNDERSENSE_CONFORMANCE_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "undersense/scoring.h"

namespace undersense {

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ConformanceReport {
  std::vector<ConformanceCheck> checks;

  bool passed() const;
  nlohmann::json ToJson() const;
};

// Runs every check against `scorer`. Exceptions thrown by the scorer fail
// the check that raised them; they never escape.
ConformanceReport RunConformance(Scorer& scorer);

}  // namespace undersense

#endif  // UNDERSENSE_CONFORMANCE_H_
