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

#ifndef LMEVAL_TESTS_TEST_UTIL_H_
#define LMEVAL_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <string>
#include <vector>

#include "lmeval/corpus.h"

namespace lmeval {

inline std::filesystem::path TestData(const std::string& name) {
  return std::filesystem::path(LMEVAL_TEST_DATA_DIR) / name;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lmeval_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<AbstractRecord> MakePool(const std::string& category, std::size_t n) {
  std::vector<AbstractRecord> pool;
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    pool.push_back({category + "/" + std::to_string(i), category, "Text " + std::to_string(i) + "."});
  }
  return pool;
}

}  // namespace lmeval

#endif  // LMEVAL_TESTS_TEST_UTIL_H_
