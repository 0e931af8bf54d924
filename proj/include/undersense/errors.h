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

#ifndef UNDERSENSE_ERRORS_H_
#define UNDERSENSE_ERRORS_H_

#include <stdexcept>
#include <string>

namespace undersense {

// A caller broke a documented precondition (bad index, empty context, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed input file or record.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The scorer could not be reached or the connection broke. Retriable.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The scorer answered, but with something that does not follow the wire
// protocol. Carries the offending payload for diagnostics.
class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(const std::string& what, std::string raw_payload)
      : std::runtime_error(what), raw_payload_(std::move(raw_payload)) {}

  const std::string& raw_payload() const { return raw_payload_; }

 private:
  std::string raw_payload_;
};

// The scorer reported an error for one request of a batch.
class ScorerRequestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace undersense

#endif  // UNDERSENSE_ERRORS_H_
