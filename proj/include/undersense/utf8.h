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

// Files and the wire protocol carry character offsets counted in Unicode
// code points; in memory every offset is a byte offset into a UTF-8 string.
// OffsetMap converts between the two at I/O boundaries.

#ifndef UNDERSENSE_UTF8_H_
#define UNDERSENSE_UTF8_H_

#include <cstddef>
#include <string_view>
#include <vector>

namespace undersense {

size_t CodepointCount(std::string_view text);

class OffsetMap {
 public:
  explicit OffsetMap(std::string_view text);

  // Throws FormatError when `codepoint` exceeds the text length.
  size_t ToByte(size_t codepoint) const;
  // Throws FormatError when `byte` is not on a code point boundary.
  size_t ToCodepoint(size_t byte) const;

  size_t codepoint_count() const { return starts_.size() - 1; }

 private:
  // Byte offset of every code point, plus a final entry for the end.
  std::vector<size_t> starts_;
};

}  // namespace undersense

#endif  // UNDERSENSE_UTF8_H_
