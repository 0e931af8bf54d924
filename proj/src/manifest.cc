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

#include "undersense/manifest.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "undersense/digest.h"
#include "undersense/errors.h"

#ifndef UNDERSENSE_VERSION
#define UNDERSENSE_VERSION "unknown"
#endif

namespace undersense {

using nlohmann::json;

std::string CodeVersion() { return UNDERSENSE_VERSION; }

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

void RunManifest::AddInput(const std::string& role, const std::string& path) {
  inputs.push_back({role, path, Sha256File(path)});
}

void RunManifest::AddOutput(const std::string& role, const std::string& path) {
  outputs.push_back({role, path, Sha256File(path)});
}

std::string RunManifest::Id() const {
  json inputs_json = json::array();
  for (const ManifestInput& input : inputs) {
    inputs_json.push_back(
        {{"role", input.role},
         {"name", std::filesystem::path(input.path).filename().string()},
         {"sha256", input.sha256}});
  }
  const json canonical = {{"command", command},
                          {"config", config},
                          {"inputs", inputs_json},
                          {"lexicon_fingerprint", lexicon_fingerprint},
                          {"model_id", model_id},
                          {"seed", seed},
                          {"code_version", code_version}};
  return Sha256Hex(canonical.dump()).substr(0, 32);
}

json RunManifest::ToJson() const {
  json inputs_json = json::array();
  for (const ManifestInput& input : inputs) {
    inputs_json.push_back(
        {{"role", input.role}, {"path", input.path}, {"sha256", input.sha256}});
  }
  json outputs_json = json::array();
  for (const ManifestInput& output : outputs) {
    outputs_json.push_back({{"role", output.role},
                            {"path", output.path},
                            {"sha256", output.sha256}});
  }
  return {{"manifest_id", Id()},
          {"command", command},
          {"config", config},
          {"runtime", runtime},
          {"inputs", inputs_json},
          {"outputs", outputs_json},
          {"lexicon_fingerprint", lexicon_fingerprint},
          {"model_id", model_id},
          {"seed", seed},
          {"code_version", code_version},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

void RunManifest::Write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest '" + path + "'");
  out << ToJson().dump(2) << '\n';
}

}  // namespace undersense
