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

#include "undersense/utf8.h"

#include <algorithm>
#include <string>

#include "undersense/errors.h"

namespace undersense {
namespace {

bool IsContinuation(unsigned char c) { return (c & 0xC0) == 0x80; }

}  // namespace

size_t CodepointCount(std::string_view text) {
  return static_cast<size_t>(std::count_if(
      text.begin(), text.end(),
      [](char c) { return !IsContinuation(static_cast<unsigned char>(c)); }));
}

OffsetMap::OffsetMap(std::string_view text) {
  starts_.reserve(text.size() + 1);
  for (size_t i = 0; i < text.size(); ++i) {
    if (!IsContinuation(static_cast<unsigned char>(text[i]))) {
      starts_.push_back(i);
    }
  }
  starts_.push_back(text.size());
}

size_t OffsetMap::ToByte(size_t codepoint) const {
  if (codepoint >= starts_.size()) {
    throw FormatError("character offset " + std::to_string(codepoint) +
                      " beyond text of length " +
                      std::to_string(codepoint_count()));
  }
  return starts_[codepoint];
}

size_t OffsetMap::ToCodepoint(size_t byte) const {
  const auto it = std::lower_bound(starts_.begin(), starts_.end(), byte);
  if (it == starts_.end() || *it != byte) {
    throw FormatError("byte offset " + std::to_string(byte) +
                      " is not a character boundary");
  }
  return static_cast<size_t>(it - starts_.begin());
}

}  // namespace undersense
