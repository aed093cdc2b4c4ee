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

#include "lmeval/protocol.h"

#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/text.h"

namespace lmeval {
namespace {

using json = nlohmann::json;

bool IsTerminal(char c) { return c == '.' || c == '!' || c == '?'; }

std::size_t HalfUp(std::size_t n) { return (n + 1) / 2; }

}  // namespace

const char* ToString(UnitKind kind) {
  return kind == UnitKind::kSentence ? "sentence" : "word";
}

std::vector<std::string> SegmentSentences(std::string_view text,
                                          const SegmenterOptions& options) {
  const std::string_view body = Trim(text);
  if (body.empty()) throw ProtocolError("cannot segment empty text");

  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < body.size(); ++i) {
    if (!IsTerminal(body[i]) || !IsSpace(body[i + 1])) continue;
    std::size_t next = i + 1;
    while (next < body.size() && IsSpace(body[next])) ++next;
    if (options.require_uppercase && !(body[next] >= 'A' && body[next] <= 'Z')) {
      continue;
    }
    sentences.push_back(NormalizeWhitespace(body.substr(start, i + 1 - start)));
    start = next;
    i = next - 1;
  }
  sentences.push_back(NormalizeWhitespace(body.substr(start)));
  return sentences;
}

PromptPair MakePromptPair(const AbstractRecord& record,
                          const SegmenterOptions& options) {
  PromptPair pair;
  pair.arxiv_id = record.arxiv_id;
  std::vector<std::string> units = SegmentSentences(record.abstract, options);
  if (units.size() == 1) {
    units = SplitWhitespace(record.abstract);
    pair.unit_kind = UnitKind::kWord;
    if (units.size() < 2) {
      throw ProtocolError("abstract " + record.arxiv_id +
                          " is a single word; no ground truth possible");
    }
  }
  pair.n_units = units.size();
  pair.split_index = HalfUp(units.size());
  const auto mid = units.begin() + static_cast<std::ptrdiff_t>(pair.split_index);
  pair.prompt = Join({units.begin(), mid}, " ");
  pair.ground_truth = Join({mid, units.end()}, " ");
  return pair;
}

std::string PromptPairToJsonLine(const PromptPair& pair) {
  json j = {{"id", pair.arxiv_id},
            {"prompt", pair.prompt},
            {"ground_truth", pair.ground_truth},
            {"n_units", pair.n_units},
            {"unit_kind", ToString(pair.unit_kind)}};
  return j.dump();
}

PromptPair PromptPairFromJsonLine(std::string_view line, std::size_t line_number) {
  try {
    const json j = json::parse(line);
    PromptPair p;
    p.arxiv_id = j.at("id").get<std::string>();
    p.prompt = j.at("prompt").get<std::string>();
    p.ground_truth = j.at("ground_truth").get<std::string>();
    p.n_units = j.at("n_units").get<std::size_t>();
    const std::string kind = j.at("unit_kind").get<std::string>();
    if (kind == "sentence") {
      p.unit_kind = UnitKind::kSentence;
    } else if (kind == "word") {
      p.unit_kind = UnitKind::kWord;
    } else {
      throw FormatError("unknown unit_kind '" + kind + "'", line_number);
    }
    if (p.n_units == 0) throw FormatError("n_units must be positive", line_number);
    p.split_index = HalfUp(p.n_units);
    return p;
  } catch (const json::exception& e) {
    throw FormatError(e.what(), line_number);
  }
}

void WritePromptPairs(const std::vector<PromptPair>& pairs,
                      const std::filesystem::path& path) {
  std::string body;
  for (const auto& p : pairs) {
    body += PromptPairToJsonLine(p);
    body += '\n';
  }
  WriteFile(path, body);
}

std::vector<PromptPair> ReadPromptPairs(const std::filesystem::path& path) {
  std::vector<PromptPair> out;
  ForEachLine(path, [&](std::string_view line, std::size_t number) {
    if (Trim(line).empty()) return;
    out.push_back(PromptPairFromJsonLine(line, number));
  });
  return out;
}

}  // namespace lmeval
