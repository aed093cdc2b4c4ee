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

// End-to-end evaluation runs driven by a JSON configuration file. See
// docs/config.md for the schema.

#ifndef LMEVAL_HARNESS_H_
#define LMEVAL_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/backend.h"
#include "lmeval/corpus.h"
#include "lmeval/metrics.h"
#include "lmeval/report.h"

namespace lmeval {

struct DatasetSource {
  // Either a ready test split ...
  std::optional<std::filesystem::path> test_split;
  // ... or raw metadata plus a recipe (a built-in name, a recipe file, or an
  // inline recipe in JSON form), which is curated and split on the fly.
  std::optional<std::filesystem::path> metadata;
  std::string recipe;
  uint64_t shuffle_seed = 0;
};

struct ModelSpec {
  std::string name;
  bool baseline = false;
  // Live server ...
  std::string endpoint;
  std::string model_id;
  std::string api_key;
  // ... or offline dumps.
  std::optional<std::filesystem::path> logprob_dump;
  std::optional<std::filesystem::path> completions_dump;
};

struct EmbeddingSpec {
  std::string endpoint;
  std::string model_id;
  std::string api_key;
  std::size_t dimension = 768;
};

struct MetricSettings {
  bool perplexity = true;
  bool entropy = true;
  bool similarity = true;
  Aggregation aggregation = Aggregation::kArithmetic;
  std::size_t bootstrap_resamples = 10000;
  uint64_t bootstrap_seed = 0;
  std::size_t batch_size = 1;
};

struct LossCurveSpec {
  std::string name;
  std::filesystem::path path;
  std::optional<uint64_t> steps_per_epoch;
  double plateau_tolerance = 0.0;
  double min_drop = 0.0;
};

struct RetrySettings {
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{250};
  std::chrono::milliseconds backoff_max{8000};
  std::chrono::milliseconds timeout{120000};
};

struct RunConfig {
  DatasetSource dataset;
  uint64_t split_seed = 0;
  std::optional<std::size_t> max_items;
  std::vector<ModelSpec> models;
  std::optional<EmbeddingSpec> embedding;
  GenerationParams generation;
  MetricSettings metrics;
  RetrySettings retry;
  std::vector<LossCurveSpec> loss_curves;
  // Abort when a model fails on more than this fraction of items.
  double failure_threshold = 0.10;
  unsigned concurrency = 4;
  std::filesystem::path output_dir = "lmeval-out";
};

// Parses a configuration document. Relative paths resolve against
// `base_dir`. Credentials may be overridden from the environment:
// LMEVAL_API_KEY for every endpoint, or the variable named by a model's
// "api_key_env". Throws ConfigError.
RunConfig ParseRunConfig(std::string_view json_text,
                         const std::filesystem::path& base_dir = ".");
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Checks the invariants run_eval relies on (at least one model, each model
// with exactly one source, embedding settings when similarity is on, ...).
void ValidateRunConfig(const RunConfig& config);

// SHA-256 of the configuration fields that influence results. Output
// directory, concurrency and credentials are excluded.
std::string ConfigDigest(const RunConfig& config);

// Backends for a run, in the order of config.models.
struct Backends {
  std::vector<std::shared_ptr<ModelBackend>> models;
  std::shared_ptr<ModelBackend> embedder;
};

Backends MakeBackends(const RunConfig& config);

// Test-split abstracts for the configured dataset source.
std::vector<AbstractRecord> ResolveTestItems(const RunConfig& config);

struct RunResult {
  EvalReport report;
  // Per model, in config order; test-split order within each.
  std::vector<std::vector<CompletionRecord>> completions;
  std::vector<std::vector<ScoredSequence>> scored;
};

// Evaluates every model on every item. Items that fail are recorded in the
// model's failure list; each item appears exactly once per model as a result
// or a failure. Throws RunError when no item succeeds or a model's failure
// rate exceeds config.failure_threshold.
RunResult RunEval(const RunConfig& config, const std::vector<AbstractRecord>& items,
                  const Backends& backends);

// Resolves items and backends from the configuration, then runs.
RunResult RunEval(const RunConfig& config);

}  // namespace lmeval

#endif  // LMEVAL_HARNESS_H_
