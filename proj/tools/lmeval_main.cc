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

// lmeval: curate abstract datasets, build prompt pairs, evaluate models and
// render reports. Run `lmeval --help` or `lmeval <command> --help`.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lmeval/corpus.h"
#include "lmeval/error.h"
#include "lmeval/harness.h"
#include "lmeval/io.h"
#include "lmeval/metrics.h"
#include "lmeval/protocol.h"
#include "lmeval/report.h"
#include "lmeval/text.h"

namespace lmeval {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct EvalFlags {
  std::string config;
  std::vector<std::string> backends;
  std::string metrics;
  std::string out;
  std::string formats = "all";
  std::optional<uint64_t> seed;
  std::optional<std::size_t> resamples;
  std::optional<unsigned> concurrency;
};

void AddEvalFlags(CLI::App* cmd, EvalFlags& f) {
  cmd->add_option("--config", f.config, "Run configuration (JSON)")->required()->check(
      CLI::ExistingFile);
  cmd->add_option("--backend", f.backends,
                  "name=url; sets the endpoint of model `name`, adding it if absent");
  cmd->add_option("--metrics", f.metrics, "Comma list of perplexity,entropy,similarity");
  cmd->add_option("--out", f.out, "Output directory (default: config output_dir)");
  cmd->add_option("--format", f.formats, "Comma list of table,structured,plot-data or all");
  cmd->add_option("--seed", f.seed, "Bootstrap seed");
  cmd->add_option("--resamples", f.resamples, "Bootstrap resamples")->check(
      CLI::PositiveNumber);
  cmd->add_option("--concurrency", f.concurrency, "Requests in flight")->check(
      CLI::PositiveNumber);
}

// Applies command-line overrides to the configuration document before it is
// parsed, so validation sees the final configuration.
RunConfig LoadWithOverrides(const EvalFlags& f) {
  json j;
  try {
    j = json::parse(ReadFile(f.config));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& spec : f.backends) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw ConfigError("--backend expects name=url, got '" + spec + "'");
    }
    const std::string name = spec.substr(0, eq);
    const std::string url = spec.substr(eq + 1);
    if (!j.contains("models")) j["models"] = json::array();
    bool found = false;
    for (auto& m : j["models"]) {
      if (m.value("name", "") != name) continue;
      m["endpoint"] = url;
      m.erase("logprob_dump");
      m.erase("completions_dump");
      found = true;
    }
    if (!found) j["models"].push_back({{"name", name}, {"endpoint", url}});
  }
  if (!f.metrics.empty()) {
    json& m = j["metrics"];
    if (m.is_null()) m = json::object();
    m["perplexity"] = m["entropy"] = m["similarity"] = false;
    std::string list = f.metrics;
    for (char& c : list) {
      if (c == ',') c = ' ';
    }
    for (const auto& name : SplitWhitespace(list)) {
      if (name != "perplexity" && name != "entropy" && name != "similarity") {
        throw ConfigError("unknown metric '" + name + "'");
      }
      m[name] = true;
    }
  }
  if (f.seed) j["metrics"]["bootstrap_seed"] = *f.seed;
  if (f.resamples) j["metrics"]["bootstrap_resamples"] = *f.resamples;
  if (f.concurrency) j["concurrency"] = *f.concurrency;
  RunConfig config = ParseRunConfig(j.dump(), fs::path(f.config).parent_path());
  if (!f.out.empty()) config.output_dir = f.out;
  return config;
}

std::string SafeName(std::string name) {
  for (char& c : name) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') {
      c = '_';
    }
  }
  return name;
}

void WriteArtifacts(const RunConfig& config, const RunResult& run) {
  for (std::size_t m = 0; m < config.models.size(); ++m) {
    const std::string stem = SafeName(config.models[m].name);
    std::string completions;
    for (const auto& c : run.completions[m]) {
      json row = {{"id", c.arxiv_id},
                  {"model_id", c.model_id},
                  {"prompt", c.prompt},
                  {"completion", c.completion},
                  {"temperature", c.params.temperature},
                  {"max_new_tokens", c.params.max_new_tokens},
                  {"finish_reason", c.finish_reason},
                  {"retries", c.retries},
                  {"latency_ms", c.latency.count()}};
      if (c.completion_tokens) row["completion_tokens"] = *c.completion_tokens;
      completions += row.dump() + "\n";
    }
    if (!run.completions[m].empty()) {
      WriteFile(config.output_dir / "completions" / (stem + ".jsonl"), completions);
    }
    std::string logprobs;
    for (const auto& s : run.scored[m]) logprobs += LogprobToJsonLine(s) + "\n";
    if (!run.scored[m].empty()) {
      WriteFile(config.output_dir / "logprobs" / (stem + ".jsonl"), logprobs);
    }
  }
}

void PrintSummary(const EvalReport& report) {
  std::cout << RenderPerplexityTable(report);
  for (const auto& m : report.models) {
    if (m.similarity) {
      std::printf("similarity %s: mean %.4f std %.4f min %.4f (n=%zu)\n", m.name.c_str(),
                  m.similarity->mean, m.similarity->std, m.similarity->min,
                  m.similarity->count);
    }
    if (!m.failures.empty()) {
      std::printf("%s: %zu item(s) failed\n", m.name.c_str(), m.failures.size());
    }
  }
}

int Eval(const EvalFlags& f, bool write_dataset) {
  const RunConfig config = LoadWithOverrides(f);
  const auto formats = ParseReportFormats(f.formats);
  std::vector<AbstractRecord> items;
  if (write_dataset && config.dataset.metadata) {
    IngestStats stats;
    const CuratedDataset curated = CurateFromMetadata(
        *config.dataset.metadata, config.dataset.recipe, config.dataset.shuffle_seed, &stats);
    const CuratedDataset split = SplitTvt(curated, config.split_seed);
    WriteSplitDataset(split, config.output_dir / "dataset");
    std::printf("curated %zu records (%zu read, %zu withdrawn, %zu empty)\n",
                curated.records.size(), stats.lines, stats.withdrawn, stats.empty);
    items = split.RecordsIn(Split::kTest);
    if (config.max_items && items.size() > *config.max_items) items.resize(*config.max_items);
  } else {
    items = ResolveTestItems(config);
  }
  if (write_dataset) {
    std::vector<PromptPair> pairs;
    for (const auto& item : items) {
      try {
        pairs.push_back(MakePromptPair(item));
      } catch (const ProtocolError&) {
        // Recorded as an item failure by the evaluation.
      }
    }
    WritePromptPairs(pairs, config.output_dir / "pairs.jsonl");
  }
  const RunResult run = RunEval(config, items, MakeBackends(config));
  WriteArtifacts(config, run);
  for (const auto& path : EmitReport(run.report, formats, config.output_dir)) {
    std::printf("wrote %s\n", path.string().c_str());
  }
  PrintSummary(run.report);
  return 0;
}

int Run(int argc, char** argv) {
  CLI::App app{"Corpus curation and evaluation harness for fine-tuned language models"};
  app.require_subcommand(1);

  std::string metadata, recipe, out, input, name, formats = "all";
  uint64_t seed = 0;
  auto* curate = app.add_subcommand("curate", "Clean a metadata dump and compose a dataset");
  curate->add_option("--metadata", metadata, "arXiv metadata (JSON lines, optionally gzip)")
      ->required()
      ->check(CLI::ExistingFile);
  curate->add_option("--recipe", recipe, "Bundled recipe (s1..s10) or recipe file")
      ->required();
  curate->add_option("--seed", seed, "Shuffle seed");
  curate->add_option("--name", name, "Dataset name (default: recipe name)");
  curate->add_option("--out", out, "Output directory")->required();

  auto* split = app.add_subcommand("split", "Split a curated dataset 70/15/15");
  split->add_option("--input", input, "Curated dataset (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  split->add_option("--seed", seed, "Split seed");
  split->add_option("--out", out, "Output directory")->required();

  auto* pairs = app.add_subcommand("pairs", "Build prompt/ground-truth pairs");
  pairs->add_option("--input", input, "Abstracts (JSON lines)")
      ->required()
      ->check(CLI::ExistingFile);
  pairs->add_option("--out", out, "Output file")->required();

  EvalFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate models on a test split");
  AddEvalFlags(eval, eval_flags);

  EvalFlags run_flags;
  auto* run = app.add_subcommand(
      "run", "Curate, split, build pairs, evaluate and report in one go");
  AddEvalFlags(run, run_flags);

  auto* report = app.add_subcommand("report", "Render a structured report");
  report->add_option("--input", input, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--format", formats, "Comma list of table,structured,plot-data or all");
  report->add_option("--out", out, "Output directory")->required();

  std::optional<uint64_t> steps_per_epoch;
  double tolerance = 0.01, min_drop = 0.05;
  auto* loss = app.add_subcommand("analyze-loss", "Detect step-wise drops in a loss curve");
  loss->add_option("--input", input, "Loss curve (JSON lines of step, loss[, epoch])")
      ->required()
      ->check(CLI::ExistingFile);
  loss->add_option("--steps-per-epoch", steps_per_epoch, "Epoch length in steps");
  loss->add_option("--tolerance", tolerance, "Maximum loss range within a plateau");
  loss->add_option("--min-drop", min_drop, "Minimum drop between epoch means");
  loss->add_option("--out", out, "Optional CSV output file");

  CLI11_PARSE(app, argc, argv);

  if (curate->parsed()) {
    IngestStats stats;
    CuratedDataset d = CurateFromMetadata(metadata, recipe, seed, &stats);
    d.name = name.empty() ? fs::path(recipe).stem().string() : name;
    WriteCuratedDataset(d, out);
    std::printf("%s: %zu records (%zu read, %zu withdrawn, %zu empty), digest %s\n",
                d.name.c_str(), d.records.size(), stats.lines, stats.withdrawn, stats.empty,
                DatasetDigest(d).c_str());
  } else if (split->parsed()) {
    CuratedDataset d;
    d.name = fs::path(input).stem().string();
    d.records = ReadAbstracts(input);
    const CuratedDataset s = SplitTvt(d, seed);
    WriteSplitDataset(s, out);
    const SplitSizes sizes = ComputeSplitSizes(s.records.size());
    std::printf("train %zu, validation %zu, test %zu\n", sizes.train, sizes.validation,
                sizes.test);
  } else if (pairs->parsed()) {
    std::vector<PromptPair> built;
    std::size_t skipped = 0;
    for (const auto& rec : ReadAbstracts(input)) {
      try {
        built.push_back(MakePromptPair(rec));
      } catch (const ProtocolError& e) {
        std::fprintf(stderr, "skipping %s: %s\n", rec.arxiv_id.c_str(), e.what());
        ++skipped;
      }
    }
    WritePromptPairs(built, out);
    std::printf("%zu pairs written, %zu skipped\n", built.size(), skipped);
  } else if (eval->parsed()) {
    return Eval(eval_flags, false);
  } else if (run->parsed()) {
    return Eval(run_flags, true);
  } else if (report->parsed()) {
    const EvalReport r = ReportFromJson(ReadFile(input));
    for (const auto& path : EmitReport(r, ParseReportFormats(formats), out)) {
      std::printf("wrote %s\n", path.string().c_str());
    }
  } else if (loss->parsed()) {
    const LossCurve curve = ReadLossCurve(input, steps_per_epoch);
    const auto steps = DetectLossSteps(curve, tolerance, min_drop);
    std::string csv = "boundary_step,drop,mean_before,mean_after\n";
    std::printf("%zu points, %zu epoch boundaries, %zu step(s)\n", curve.points.size(),
                curve.epoch_boundaries.size(), steps.size());
    for (const auto& s : steps) {
      std::printf("step %llu: %.6f -> %.6f (drop %.6f)\n",
                  static_cast<unsigned long long>(s.boundary_step), s.mean_before,
                  s.mean_after, s.drop);
      csv += std::to_string(s.boundary_step) + "," + json(s.drop).dump() + "," +
             json(s.mean_before).dump() + "," + json(s.mean_after).dump() + "\n";
    }
    if (!out.empty()) WriteFile(out, csv);
  }
  return 0;
}

}  // namespace
}  // namespace lmeval

int main(int argc, char** argv) {
  try {
    return lmeval::Run(argc, argv);
  } catch (const lmeval::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
}
