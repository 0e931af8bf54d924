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

// Run manifests: what was run, on which inputs, with which configuration.
// The manifest id ignores timestamps and directory names so that a rerun
// of the same command on the same inputs gets the same id.

#ifndef UNDERSENSE_MANIFEST_H_
#define UNDERSENSE_MANIFEST_H_

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace undersense {

std::string CodeVersion();
// ISO 8601, UTC, second resolution.
std::string UtcTimestamp();

struct ManifestInput {
  std::string role;
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  // Settings that cannot change results (worker count, output paths).
  // Recorded but left out of the id.
  nlohmann::json runtime = nlohmann::json::object();
  std::vector<ManifestInput> inputs;
  std::string lexicon_fingerprint;
  std::string model_id;
  uint64_t seed = 0;
  std::string code_version = CodeVersion();
  std::string started_at;
  std::string finished_at;

  // Hashes `path` and records it under `role`. Throws FormatError when the
  // file cannot be read.
  void AddInput(const std::string& role, const std::string& path);
  // Result files, hashed once they are complete. Not part of the id, which
  // has to be known before any result is written.
  std::vector<ManifestInput> outputs;
  void AddOutput(const std::string& role, const std::string& path);

  std::string Id() const;
  nlohmann::json ToJson() const;
  void Write(const std::string& path) const;
};

}  // namespace undersense

#endif  // UNDERSENSE_MANIFEST_H_
