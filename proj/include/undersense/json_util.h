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

#ifndef UNDERSENSE_JSON_UTIL_H_
#define UNDERSENSE_JSON_UTIL_H_

#include <cstddef>
#include <string>
#include <string_view>

#include "json.hpp"
#include "undersense/errors.h"

namespace undersense {

inline nlohmann::json ParseJson(std::string_view text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
}

inline const nlohmann::json& RequireField(const nlohmann::json& object,
                                          const char* key) {
  if (!object.is_object()) throw FormatError("expected a JSON object");
  const auto it = object.find(key);
  if (it == object.end()) {
    throw FormatError(std::string("missing field '") + key + "'");
  }
  return *it;
}

inline std::string RequireString(const nlohmann::json& object,
                                 const char* key) {
  const nlohmann::json& value = RequireField(object, key);
  if (!value.is_string()) {
    throw FormatError(std::string("field '") + key + "' must be a string");
  }
  return value.get<std::string>();
}

inline size_t RequireIndex(const nlohmann::json& object, const char* key) {
  const nlohmann::json& value = RequireField(object, key);
  if (!value.is_number_unsigned() &&
      !(value.is_number_integer() && value.get<long long>() >= 0)) {
    throw FormatError(std::string("field '") + key +
                      "' must be a non-negative integer");
  }
  return value.get<size_t>();
}

inline double RequireNumber(const nlohmann::json& object, const char* key) {
  const nlohmann::json& value = RequireField(object, key);
  if (!value.is_number()) {
    throw FormatError(std::string("field '") + key + "' must be a number");
  }
  return value.get<double>();
}

}  // namespace undersense

#endif  // UNDERSENSE_JSON_UTIL_H_
