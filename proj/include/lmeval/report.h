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

#ifndef LMEVAL_REPORT_H_
#define LMEVAL_REPORT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lmeval/backend.h"
#include "lmeval/metrics.h"

namespace lmeval {

struct ItemResult {
  std::string arxiv_id;
  std::optional<double> perplexity;
  std::optional<std::size_t> scored_tokens;
  std::optional<EntropyPoint> completion_entropy;
  std::optional<double> similarity;
};

struct ItemFailure {
  std::string arxiv_id;
  std::string stage;  // protocol, score, complete, embed
  std::string message;
};

struct ModelReport {
  std::string name;
  std::string model_id;
  bool baseline = false;
  std::optional<PerplexitySummary> perplexity;
  std::optional<SimilarityStats> similarity;
  std::vector<ItemResult> items;  // test-split order
  std::vector<ItemFailure> failures;
};

struct GroundTruthEntropy {
  std::string arxiv_id;
  EntropyPoint point;
};

struct LossCurveReport {
  std::string name;
  double plateau_tolerance = 0.0;
  double min_drop = 0.0;
  std::size_t n_points = 0;
  std::vector<uint64_t> epoch_boundaries;
  std::vector<LossStep> steps;
};

struct Provenance {
  std::string config_digest;
  std::string dataset;
  uint64_t split_seed = 0;
  uint64_t bootstrap_seed = 0;
  std::size_t n_resamples = 0;
  std::size_t batch_size = 1;
  std::string aggregation;
  GenerationParams generation;
  std::size_t n_items = 0;
  std::vector<std::string> metrics;
  // Only set when explicitly requested; a timestamp makes reruns differ.
  std::optional<std::string> generated_at;
};

struct EvalReport {
  Provenance provenance;
  std::vector<ModelReport> models;  // configuration order
  std::vector<GroundTruthEntropy> ground_truth_entropy;
  std::vector<LossCurveReport> loss_curves;
};

std::string ReportToJson(const EvalReport& report);
EvalReport ReportFromJson(std::string_view text);

enum class ReportFormat { kTable, kStructured, kPlotData };

std::set<ReportFormat> ParseReportFormats(std::string_view comma_list);

// Writes the requested formats into `dir` and returns the files written.
//   table:      perplexity_table.md (2 decimals), perplexity_summary.csv,
//               similarity_summary.csv, entropy_points.csv
//   structured: report.json
//   plot-data:  plot_perplexity.csv, plot_entropy.csv and, with loss curves,
//               plot_loss_steps.csv
// Baseline models come first in tables. Throws IoError if `dir` cannot be
// written.
std::vector<std::filesystem::path> EmitReport(const EvalReport& report,
                                              const std::set<ReportFormat>& formats,
                                              const std::filesystem::path& dir);

// Markdown comparison table, model x {arithmetic, geometric, bootstrap
// mean, bootstrap std}, two decimals.
std::string RenderPerplexityTable(const EvalReport& report);

}  // namespace lmeval

#endif  // LMEVAL_REPORT_H_
