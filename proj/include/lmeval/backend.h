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

// Model backends: remote servers speaking the completions/embeddings wire
// protocol (see docs/wire_format.md), and offline dumps of logprobs and
// completions. The server owns tokenisation; nothing here tokenises text.

#ifndef LMEVAL_BACKEND_H_
#define LMEVAL_BACKEND_H_

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/metrics.h"

namespace lmeval {

struct GenerationParams {
  double temperature = 0.8;
  std::size_t max_new_tokens = 1024;
  std::string model_id;
};

struct CompletionRecord {
  std::string arxiv_id;
  std::string model_id;
  std::string prompt;
  std::string completion;
  GenerationParams params;
  std::optional<std::size_t> completion_tokens;  // as reported by the server
  std::string finish_reason;
  std::size_t retries = 0;
  std::chrono::milliseconds latency{0};
  std::chrono::system_clock::time_point retrieved_at;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string model_id;

  std::size_t dimension() const { return values.size(); }
};

// Interface the harness evaluates against. Implementations must be safe to
// call from several threads at once.
class ModelBackend {
 public:
  virtual ~ModelBackend() = default;

  virtual CompletionRecord Complete(std::string_view item_id, std::string_view prompt,
                                    const GenerationParams& params) = 0;

  // Scores `continuation` given `prompt` as context. Only continuation tokens
  // are scored; logprobs are natural-log and validated to be <= 0.
  virtual ScoredSequence ScoreLogprobs(std::string_view item_id, std::string_view prompt,
                                       std::string_view continuation) = 0;

  virtual EmbeddingVector Embed(std::string_view text) = 0;
};

struct EndpointConfig {
  // Base URL including any API prefix, e.g. "http://127.0.0.1:8000/v1".
  // Requests go to <base_url>/completions and <base_url>/embeddings.
  std::string base_url;
  std::string model_id;
  std::string api_key;
  std::chrono::milliseconds timeout{120000};
  // Retries after the first attempt for connection failures, 429 and 5xx.
  // Timeouts are not retried.
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{250};
  std::chrono::milliseconds backoff_max{8000};
  // Cap on concurrent requests through one backend handle.
  std::ptrdiff_t max_in_flight = 8;
  // Expected embedding size; responses of any other size are rejected.
  std::optional<std::size_t> embedding_dimension;
  // max_tokens sent with scoring requests. Some servers reject 0.
  std::size_t score_max_tokens = 0;
};

class HttpBackend : public ModelBackend {
 public:
  explicit HttpBackend(EndpointConfig config);

  CompletionRecord Complete(std::string_view item_id, std::string_view prompt,
                            const GenerationParams& params) override;
  ScoredSequence ScoreLogprobs(std::string_view item_id, std::string_view prompt,
                               std::string_view continuation) override;
  EmbeddingVector Embed(std::string_view text) override;

  const EndpointConfig& config() const { return config_; }

  // Retries performed over the lifetime of this handle.
  std::size_t total_retries() const { return total_retries_.load(); }

 private:
  struct Response {
    std::string body;
    std::size_t retries = 0;
  };

  Response Post(const std::string& path, const std::string& body);

  EndpointConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::counting_semaphore<> in_flight_;
  std::atomic<std::size_t> total_retries_{0};
};

// Reads {"id": str, "token_logprobs": [real...], "norm_length": int?} lines.
// Throws FormatError (with the line number) on malformed lines or positive
// logprobs. An empty file yields an empty list.
std::vector<ScoredSequence> LoadLogprobDump(const std::filesystem::path& path);
ScoredSequence ParseLogprobLine(std::string_view line, std::size_t line_number);
std::string LogprobToJsonLine(const ScoredSequence& seq);

// Serves scoring (and optionally completions) from files keyed by item id.
class OfflineBackend : public ModelBackend {
 public:
  OfflineBackend(const std::optional<std::filesystem::path>& logprob_dump,
                 const std::optional<std::filesystem::path>& completions_dump,
                 std::string model_id);

  CompletionRecord Complete(std::string_view item_id, std::string_view prompt,
                            const GenerationParams& params) override;
  ScoredSequence ScoreLogprobs(std::string_view item_id, std::string_view prompt,
                               std::string_view continuation) override;
  EmbeddingVector Embed(std::string_view text) override;

 private:
  std::string model_id_;
  std::map<std::string, ScoredSequence, std::less<>> sequences_;
  std::map<std::string, std::string, std::less<>> completions_;
};

// Number of Unicode code points in UTF-8 text; the unit of text_offset.
std::size_t Utf8Length(std::string_view text);

}  // namespace lmeval

#endif  // LMEVAL_BACKEND_H_
