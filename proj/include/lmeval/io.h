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

#ifndef LMEVAL_IO_H_
#define LMEVAL_IO_H_

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace lmeval {

// Calls `fn(line, line_number)` for every line of `path` (1-based numbers,
// trailing '\r' removed). gzip-compressed files are decompressed
// transparently. Throws IoError if the file cannot be opened.
void ForEachLine(const std::filesystem::path& path,
                 const std::function<void(std::string_view, std::size_t)>& fn);

std::string ReadFile(const std::filesystem::path& path);

// Creates parent directories as needed. Throws IoError on failure.
void WriteFile(const std::filesystem::path& path, std::string_view contents);

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view data);

}  // namespace lmeval

#endif  // LMEVAL_IO_H_
