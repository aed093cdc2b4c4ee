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

#include "lmeval/harness.h"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <set>
#include <thread>

#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/protocol.h"

namespace lmeval {
namespace {

using json = nlohmann::json;

std::filesystem::path Resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::optional<std::string> EnvVar(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const char* v = std::getenv(name.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. Results must be
// written to per-index slots; scheduling order is unspecified.
void ParallelFor(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(1u, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < w; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

std::string DatasetLabel(const DatasetSource& d) {
  if (d.test_split) return "test_split:" + d.test_split->filename().string();
  std::string recipe = d.recipe;
  if (!recipe.empty() && recipe.front() == '{') {
    recipe = "inline";
  } else {
    recipe = std::filesystem::path(recipe).filename().string();
  }
  return "metadata:" + d.metadata->filename().string() + ";recipe:" + recipe +
         ";shuffle_seed:" + std::to_string(d.shuffle_seed);
}

std::vector<std::string> MetricNames(const MetricSettings& m) {
  std::vector<std::string> out;
  if (m.perplexity) out.push_back("perplexity");
  if (m.entropy) out.push_back("entropy");
  if (m.similarity) out.push_back("similarity");
  return out;
}

struct ItemOutcome {
  std::optional<ItemResult> result;
  std::optional<ItemFailure> failure;
  std::optional<CompletionRecord> completion;
  std::optional<ScoredSequence> scored;
};

}  // namespace

RunConfig ParseRunConfig(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  try {
    const std::optional<std::string> global_key = EnvVar("LMEVAL_API_KEY");

    const json& d = j.at("dataset");
    if (d.contains("test_split")) {
      c.dataset.test_split = Resolve(base_dir, d["test_split"].get<std::string>());
    }
    if (d.contains("metadata")) {
      c.dataset.metadata = Resolve(base_dir, d["metadata"].get<std::string>());
      const json& r = d.at("recipe");
      if (r.is_object()) {
        c.dataset.recipe = r.dump();
      } else {
        std::string name = r.get<std::string>();
        const auto builtin = BuiltinRecipeNames();
        if (std::find(builtin.begin(), builtin.end(), name) == builtin.end()) {
          name = Resolve(base_dir, name).string();
        }
        c.dataset.recipe = name;
      }
      c.dataset.shuffle_seed = d.value("shuffle_seed", uint64_t{0});
    }
    c.split_seed = j.value("split_seed", uint64_t{0});
    if (j.contains("max_items") && !j["max_items"].is_null()) {
      c.max_items = j["max_items"].get<std::size_t>();
    }

    for (const auto& jm : j.value("models", json::array())) {
      ModelSpec m;
      m.name = jm.at("name").get<std::string>();
      m.baseline = jm.value("baseline", false);
      m.endpoint = jm.value("endpoint", std::string());
      m.model_id = jm.value("model_id", m.name);
      m.api_key = jm.value("api_key", std::string());
      if (global_key) m.api_key = *global_key;
      if (auto k = EnvVar(jm.value("api_key_env", std::string()))) m.api_key = *k;
      if (jm.contains("logprob_dump")) {
        m.logprob_dump = Resolve(base_dir, jm["logprob_dump"].get<std::string>());
      }
      if (jm.contains("completions_dump")) {
        m.completions_dump = Resolve(base_dir, jm["completions_dump"].get<std::string>());
      }
      c.models.push_back(std::move(m));
    }

    if (j.contains("embedding") && !j["embedding"].is_null()) {
      const json& je = j["embedding"];
      EmbeddingSpec e;
      e.endpoint = je.at("endpoint").get<std::string>();
      e.model_id = je.value("model_id", std::string("sentence-transformers/all-mpnet-base-v2"));
      e.api_key = je.value("api_key", std::string());
      if (global_key) e.api_key = *global_key;
      if (auto k = EnvVar(je.value("api_key_env", std::string()))) e.api_key = *k;
      e.dimension = je.value("dimension", std::size_t{768});
      c.embedding = e;
    }

    if (j.contains("generation")) {
      const json& g = j["generation"];
      c.generation.temperature = g.value("temperature", 0.8);
      c.generation.max_new_tokens = g.value("max_new_tokens", std::size_t{1024});
    }

    if (j.contains("metrics")) {
      const json& m = j["metrics"];
      c.metrics.perplexity = m.value("perplexity", true);
      c.metrics.entropy = m.value("entropy", true);
      c.metrics.similarity = m.value("similarity", true);
      c.metrics.aggregation = ParseAggregation(m.value("aggregation", std::string("arithmetic")));
      c.metrics.bootstrap_resamples = m.value("bootstrap_resamples", std::size_t{10000});
      c.metrics.bootstrap_seed = m.value("bootstrap_seed", uint64_t{0});
      c.metrics.batch_size = m.value("batch_size", std::size_t{1});
    }

    if (j.contains("retry")) {
      const json& r = j["retry"];
      c.retry.max_retries = r.value("max_retries", 3);
      c.retry.backoff_initial = std::chrono::milliseconds(r.value("backoff_initial_ms", 250));
      c.retry.backoff_max = std::chrono::milliseconds(r.value("backoff_max_ms", 8000));
      c.retry.timeout = std::chrono::milliseconds(r.value("timeout_ms", 120000));
    }

    for (const auto& jl : j.value("loss_curves", json::array())) {
      LossCurveSpec l;
      l.name = jl.at("name").get<std::string>();
      l.path = Resolve(base_dir, jl.at("path").get<std::string>());
      if (jl.contains("steps_per_epoch")) l.steps_per_epoch = jl["steps_per_epoch"].get<uint64_t>();
      l.plateau_tolerance = jl.at("plateau_tolerance").get<double>();
      l.min_drop = jl.at("min_drop").get<double>();
      c.loss_curves.push_back(std::move(l));
    }

    c.failure_threshold = j.value("failure_threshold", 0.10);
    c.concurrency = j.value("concurrency", 4u);
    if (j.contains("output_dir")) {
      c.output_dir = Resolve(base_dir, j["output_dir"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const MetricError& e) {
    throw ConfigError(e.what());
  }
  ValidateRunConfig(c);
  return c;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  return ParseRunConfig(ReadFile(path), path.parent_path());
}

void ValidateRunConfig(const RunConfig& c) {
  const bool has_split = c.dataset.test_split.has_value();
  const bool has_meta = c.dataset.metadata.has_value();
  if (has_split == has_meta) {
    throw ConfigError("dataset needs exactly one of 'test_split' or 'metadata'");
  }
  if (has_meta && c.dataset.recipe.empty()) throw ConfigError("dataset.recipe is required");
  if (c.models.empty()) throw ConfigError("no backends configured");
  const auto& m = c.metrics;
  if (!m.perplexity && !m.entropy && !m.similarity) {
    throw ConfigError("no metrics enabled");
  }
  std::set<std::string> names;
  for (const auto& model : c.models) {
    if (model.name.empty()) throw ConfigError("model without a name");
    if (!names.insert(model.name).second) {
      throw ConfigError("duplicate model name '" + model.name + "'");
    }
    const bool offline = model.logprob_dump || model.completions_dump;
    if (model.endpoint.empty() == !offline) {
      throw ConfigError("model '" + model.name +
                        "' needs either an endpoint or offline dumps, not both");
    }
    if (offline && m.perplexity && !model.logprob_dump) {
      throw ConfigError("model '" + model.name + "' has no logprob_dump");
    }
    if (offline && (m.entropy || m.similarity) && !model.completions_dump) {
      throw ConfigError("model '" + model.name + "' has no completions_dump");
    }
  }
  if (m.similarity && !c.embedding) {
    throw ConfigError("similarity needs an 'embedding' endpoint");
  }
  if (m.bootstrap_resamples == 0) throw ConfigError("bootstrap_resamples must be positive");
  if (m.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.failure_threshold >= 0.0 && c.failure_threshold <= 1.0)) {
    throw ConfigError("failure_threshold must lie in [0, 1]");
  }
  if (c.concurrency == 0) throw ConfigError("concurrency must be positive");
  if (c.generation.temperature < 0.0) throw ConfigError("temperature must be >= 0");
  if (c.generation.max_new_tokens == 0) throw ConfigError("max_new_tokens must be positive");
}

std::string ConfigDigest(const RunConfig& c) {
  json models = json::array();
  for (const auto& m : c.models) {
    models.push_back({{"name", m.name},
                      {"baseline", m.baseline},
                      {"endpoint", m.endpoint},
                      {"model_id", m.model_id},
                      {"logprob_dump", m.logprob_dump ? m.logprob_dump->filename().string() : ""},
                      {"completions_dump",
                       m.completions_dump ? m.completions_dump->filename().string() : ""}});
  }
  json curves = json::array();
  for (const auto& l : c.loss_curves) {
    curves.push_back({{"name", l.name},
                      {"path", l.path.filename().string()},
                      {"steps_per_epoch", l.steps_per_epoch ? json(*l.steps_per_epoch) : json()},
                      {"plateau_tolerance", l.plateau_tolerance},
                      {"min_drop", l.min_drop}});
  }
  json canonical = {
      {"dataset", DatasetLabel(c.dataset)},
      {"split_seed", c.split_seed},
      {"max_items", c.max_items ? json(*c.max_items) : json()},
      {"models", models},
      {"embedding", c.embedding ? json{{"endpoint", c.embedding->endpoint},
                                       {"model_id", c.embedding->model_id},
                                       {"dimension", c.embedding->dimension}}
                                : json()},
      {"generation",
       {{"temperature", c.generation.temperature},
        {"max_new_tokens", c.generation.max_new_tokens}}},
      {"metrics",
       {{"names", MetricNames(c.metrics)},
        {"aggregation", ToString(c.metrics.aggregation)},
        {"bootstrap_resamples", c.metrics.bootstrap_resamples},
        {"bootstrap_seed", c.metrics.bootstrap_seed},
        {"batch_size", c.metrics.batch_size}}},
      {"loss_curves", curves},
      {"failure_threshold", c.failure_threshold}};
  return Sha256Hex(canonical.dump());
}

Backends MakeBackends(const RunConfig& c) {
  Backends b;
  for (const auto& m : c.models) {
    if (!m.endpoint.empty()) {
      EndpointConfig e;
      e.base_url = m.endpoint;
      e.model_id = m.model_id;
      e.api_key = m.api_key;
      e.timeout = c.retry.timeout;
      e.max_retries = c.retry.max_retries;
      e.backoff_initial = c.retry.backoff_initial;
      e.backoff_max = c.retry.backoff_max;
      e.max_in_flight = static_cast<std::ptrdiff_t>(c.concurrency);
      b.models.push_back(std::make_shared<HttpBackend>(std::move(e)));
    } else {
      b.models.push_back(
          std::make_shared<OfflineBackend>(m.logprob_dump, m.completions_dump, m.model_id));
    }
  }
  if (c.embedding) {
    EndpointConfig e;
    e.base_url = c.embedding->endpoint;
    e.model_id = c.embedding->model_id;
    e.api_key = c.embedding->api_key;
    e.timeout = c.retry.timeout;
    e.max_retries = c.retry.max_retries;
    e.backoff_initial = c.retry.backoff_initial;
    e.backoff_max = c.retry.backoff_max;
    e.max_in_flight = static_cast<std::ptrdiff_t>(c.concurrency);
    e.embedding_dimension = c.embedding->dimension;
    b.embedder = std::make_shared<HttpBackend>(std::move(e));
  }
  return b;
}

std::vector<AbstractRecord> ResolveTestItems(const RunConfig& c) {
  std::vector<AbstractRecord> items;
  if (c.dataset.test_split) {
    items = ReadAbstracts(*c.dataset.test_split);
  } else {
    const CuratedDataset split = SplitTvt(
        CurateFromMetadata(*c.dataset.metadata, c.dataset.recipe, c.dataset.shuffle_seed),
        c.split_seed);
    items = split.RecordsIn(Split::kTest);
  }
  if (c.max_items && items.size() > *c.max_items) items.resize(*c.max_items);
  return items;
}

RunResult RunEval(const RunConfig& config, const std::vector<AbstractRecord>& items,
                  const Backends& backends) {
  ValidateRunConfig(config);
  if (items.empty()) throw RunError("no test items to evaluate");
  if (backends.models.size() != config.models.size()) {
    throw ConfigError("backend count does not match configured models");
  }
  const MetricSettings& ms = config.metrics;
  if (ms.similarity && !backends.embedder) throw ConfigError("no embedding backend");
  const std::size_t n = items.size();
  const std::size_t n_models = config.models.size();

  // Prompt construction is shared by every model.
  std::vector<std::optional<PromptPair>> pairs(n);
  std::vector<std::string> pair_errors(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      pairs[i] = MakePromptPair(items[i]);
    } catch (const std::exception& e) {
      pair_errors[i] = e.what();
    }
  }

  // Ground-truth embeddings, once per item.
  std::vector<std::optional<EmbeddingVector>> truth_embeddings(n);
  std::vector<std::string> truth_embed_errors(n);
  if (ms.similarity) {
    ParallelFor(n, config.concurrency, [&](std::size_t i) {
      if (!pairs[i]) return;
      try {
        truth_embeddings[i] = backends.embedder->Embed(pairs[i]->ground_truth);
      } catch (const std::exception& e) {
        truth_embed_errors[i] = e.what();
      }
    });
  }

  std::vector<ItemOutcome> outcomes(n_models * n);
  ParallelFor(n_models * n, config.concurrency, [&](std::size_t task) {
    const std::size_t m = task / n;
    const std::size_t i = task % n;
    ItemOutcome& out = outcomes[task];
    const std::string& id = items[i].arxiv_id;
    if (!pairs[i]) {
      out.failure = ItemFailure{id, "protocol", pair_errors[i]};
      return;
    }
    const PromptPair& pair = *pairs[i];
    ModelBackend& backend = *backends.models[m];
    ItemResult result;
    result.arxiv_id = id;
    std::string stage;
    try {
      if (ms.perplexity) {
        stage = "score";
        ScoredSequence seq = backend.ScoreLogprobs(id, pair.prompt, " " + pair.ground_truth);
        seq.id = id;
        result.perplexity = SequencePerplexity(seq);
        result.scored_tokens = seq.token_logprobs.size();
        out.scored = std::move(seq);
      }
      if (ms.entropy || ms.similarity) {
        stage = "complete";
        GenerationParams params = config.generation;
        params.model_id = config.models[m].model_id;
        CompletionRecord rec = backend.Complete(id, pair.prompt, params);
        if (ms.entropy) result.completion_entropy = ExpWordEntropy(rec.completion);
        if (ms.similarity) {
          stage = "embed";
          if (!truth_embeddings[i]) {
            throw RunError("ground-truth embedding failed: " + truth_embed_errors[i]);
          }
          const EmbeddingVector e = backends.embedder->Embed(rec.completion);
          stage = "similarity";
          result.similarity = CosineSimilarity(e.values, truth_embeddings[i]->values);
        }
        out.completion = std::move(rec);
      }
      out.result = std::move(result);
    } catch (const std::exception& e) {
      out.failure = ItemFailure{id, stage, e.what()};
      out.scored.reset();
      out.completion.reset();
    }
  });

  RunResult run;
  EvalReport& report = run.report;
  run.completions.resize(n_models);
  run.scored.resize(n_models);
  std::size_t total_ok = 0;
  for (std::size_t m = 0; m < n_models; ++m) {
    ModelReport mr;
    mr.name = config.models[m].name;
    mr.model_id = config.models[m].model_id;
    mr.baseline = config.models[m].baseline;
    std::vector<double> sims;
    for (std::size_t i = 0; i < n; ++i) {
      ItemOutcome& o = outcomes[m * n + i];
      if (o.failure) {
        mr.failures.push_back(std::move(*o.failure));
        continue;
      }
      if (o.result->similarity) sims.push_back(*o.result->similarity);
      mr.items.push_back(std::move(*o.result));
      if (o.scored) run.scored[m].push_back(std::move(*o.scored));
      if (o.completion) run.completions[m].push_back(std::move(*o.completion));
    }
    total_ok += mr.items.size();
    if (ms.perplexity && !run.scored[m].empty()) {
      PerplexityOptions po;
      po.aggregation = ms.aggregation;
      po.n_resamples = ms.bootstrap_resamples;
      po.seed = ms.bootstrap_seed;
      po.batch_size = ms.batch_size;
      po.workers = config.concurrency;
      mr.perplexity = SummarizePerplexity(run.scored[m], po);
    }
    if (ms.similarity && !sims.empty()) mr.similarity = SummarizeSimilarities(sims);
    report.models.push_back(std::move(mr));
  }

  if (total_ok == 0) {
    std::string first = report.models.front().failures.empty()
                            ? std::string()
                            : report.models.front().failures.front().message;
    throw RunError("every item failed; first error: " + first);
  }
  for (const auto& mr : report.models) {
    const double rate = static_cast<double>(mr.failures.size()) / static_cast<double>(n);
    if (rate > config.failure_threshold) {
      throw RunError("model '" + mr.name + "' failed on " +
                     std::to_string(mr.failures.size()) + " of " + std::to_string(n) +
                     " items, above the failure threshold; first error: " +
                     mr.failures.front().message);
    }
  }

  if (ms.entropy) {
    for (std::size_t i = 0; i < n; ++i) {
      if (pairs[i]) {
        report.ground_truth_entropy.push_back(
            {items[i].arxiv_id, ExpWordEntropy(pairs[i]->ground_truth)});
      }
    }
  }

  for (const auto& spec : config.loss_curves) {
    const LossCurve curve = ReadLossCurve(spec.path, spec.steps_per_epoch);
    LossCurveReport lr;
    lr.name = spec.name;
    lr.plateau_tolerance = spec.plateau_tolerance;
    lr.min_drop = spec.min_drop;
    lr.n_points = curve.points.size();
    lr.epoch_boundaries = curve.epoch_boundaries;
    lr.steps = DetectLossSteps(curve, spec.plateau_tolerance, spec.min_drop);
    report.loss_curves.push_back(std::move(lr));
  }

  Provenance& p = report.provenance;
  p.config_digest = ConfigDigest(config);
  p.dataset = DatasetLabel(config.dataset);
  p.split_seed = config.split_seed;
  p.bootstrap_seed = ms.bootstrap_seed;
  p.n_resamples = ms.bootstrap_resamples;
  p.batch_size = ms.batch_size;
  p.aggregation = ToString(ms.aggregation);
  p.generation = config.generation;
  p.n_items = n;
  p.metrics = MetricNames(ms);
  return run;
}

RunResult RunEval(const RunConfig& config) {
  ValidateRunConfig(config);
  const std::vector<AbstractRecord> items = ResolveTestItems(config);
  return RunEval(config, items, MakeBackends(config));
}

}  // namespace lmeval
