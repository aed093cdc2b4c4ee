// Copyright 2026 The lmeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LMEVAL_TEXT_H_
#define LMEVAL_TEXT_H_

#include <string>
#include <string_view>
#include <vector>

namespace lmeval {

// ASCII whitespace: space, \t, \n, \v, \f, \r.
inline bool IsSpace(char c) {
  return c == ' ' || (c >= '\t' && c <= '\r');
}

inline bool IsLinebreak(char c) { return c == '\n' || c == '\r'; }

std::string_view Trim(std::string_view s);

// Collapses every whitespace run to one space and trims both ends.
std::string NormalizeWhitespace(std::string_view s);

// Splits on whitespace runs; never yields empty tokens.
std::vector<std::string> SplitWhitespace(std::string_view s);

std::string Join(const std::vector<std::string>& parts, std::string_view sep);

std::string ToLowerAscii(std::string_view s);

}  // namespace lmeval

#endif  // LMEVAL_TEXT_H_
