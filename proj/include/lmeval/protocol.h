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

#ifndef LMEVAL_PROTOCOL_H_
#define LMEVAL_PROTOCOL_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/corpus.h"

namespace lmeval {

struct SegmenterOptions {
  // Only break when the next non-space character is an uppercase ASCII
  // letter. Off by default: the plain rule breaks after initials such as
  // "S. Chaudhuri", and evaluation prompts are built with the plain rule.
  bool require_uppercase = false;
};

// Splits cleaned text into sentences. A boundary is one of '.', '!', '?'
// immediately followed by whitespace. There is no abbreviation list, and
// periods inside inline math are not special-cased. Segments are trimmed;
// joining them with single spaces reproduces the whitespace-normalised
// input. Throws ProtocolError on empty (or all-whitespace) text.
std::vector<std::string> SegmentSentences(std::string_view text,
                                          const SegmenterOptions& options = {});

enum class UnitKind { kSentence, kWord };

const char* ToString(UnitKind kind);

struct PromptPair {
  std::string arxiv_id;
  std::string prompt;
  std::string ground_truth;
  std::size_t n_units = 0;
  UnitKind unit_kind = UnitKind::kSentence;
  std::size_t split_index = 0;  // ceil(n_units / 2)

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

// Prompt = first ceil(N/2) sentences, ground truth = the rest. A
// single-sentence abstract is split the same way over its words instead.
// Throws ProtocolError when the abstract is a single word.
PromptPair MakePromptPair(const AbstractRecord& record,
                          const SegmenterOptions& options = {});

std::string PromptPairToJsonLine(const PromptPair& pair);
PromptPair PromptPairFromJsonLine(std::string_view line, std::size_t line_number);

void WritePromptPairs(const std::vector<PromptPair>& pairs,
                      const std::filesystem::path& path);
std::vector<PromptPair> ReadPromptPairs(const std::filesystem::path& path);

}  // namespace lmeval

#endif  // LMEVAL_PROTOCOL_H_
