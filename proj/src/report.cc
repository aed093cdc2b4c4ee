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

#include "lmeval/report.h"

#include <cstdio>

#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/text.h"

namespace lmeval {
namespace {

using json = nlohmann::json;

template <typename T>
json Opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> GetOpt(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

json ToJson(const PerplexitySummary& s) {
  return {{"per_sequence", s.per_sequence},
          {"arithmetic_mean", s.arithmetic_mean},
          {"geometric_mean", s.geometric_mean},
          {"corpus_perplexity", s.corpus_perplexity},
          {"aggregation", ToString(s.aggregation)},
          {"bootstrap_mean", s.bootstrap_mean},
          {"bootstrap_std", s.bootstrap_std},
          {"n_resamples", s.n_resamples},
          {"seed", s.seed},
          {"batch_size", s.batch_size}};
}

PerplexitySummary PerplexityFromJson(const json& j) {
  PerplexitySummary s;
  s.per_sequence = j.at("per_sequence").get<std::vector<double>>();
  s.arithmetic_mean = j.at("arithmetic_mean").get<double>();
  s.geometric_mean = j.at("geometric_mean").get<double>();
  s.corpus_perplexity = j.at("corpus_perplexity").get<double>();
  s.aggregation = ParseAggregation(j.at("aggregation").get<std::string>());
  s.bootstrap_mean = j.at("bootstrap_mean").get<double>();
  s.bootstrap_std = j.at("bootstrap_std").get<double>();
  s.n_resamples = j.at("n_resamples").get<std::size_t>();
  s.seed = j.at("seed").get<uint64_t>();
  s.batch_size = j.at("batch_size").get<std::size_t>();
  return s;
}

json ToJson(const SimilarityStats& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max},
          {"count", s.count}};
}

SimilarityStats SimilarityFromJson(const json& j) {
  return {j.at("mean").get<double>(), j.at("std").get<double>(),
          j.at("min").get<double>(), j.at("max").get<double>(),
          j.at("count").get<std::size_t>()};
}

json ToJson(const EntropyPoint& p) {
  return {{"length_words", p.length_words}, {"exp_entropy", p.exp_entropy}};
}

EntropyPoint EntropyFromJson(const json& j) {
  return {j.at("length_words").get<std::size_t>(), j.at("exp_entropy").get<double>()};
}

// Shortest round-trip representation, matching the JSON output.
std::string Num(double v) { return json(v).dump(); }

std::string Fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string CsvField(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// Baselines first, then configuration order.
std::vector<const ModelReport*> DisplayOrder(const EvalReport& report) {
  std::vector<const ModelReport*> out;
  for (const auto& m : report.models) {
    if (m.baseline) out.push_back(&m);
  }
  for (const auto& m : report.models) {
    if (!m.baseline) out.push_back(&m);
  }
  return out;
}

}  // namespace

std::string ReportToJson(const EvalReport& report) {
  const Provenance& p = report.provenance;
  json prov = {{"config_digest", p.config_digest},
               {"dataset", p.dataset},
               {"split_seed", p.split_seed},
               {"bootstrap_seed", p.bootstrap_seed},
               {"n_resamples", p.n_resamples},
               {"batch_size", p.batch_size},
               {"aggregation", p.aggregation},
               {"generation",
                {{"temperature", p.generation.temperature},
                 {"max_new_tokens", p.generation.max_new_tokens}}},
               {"n_items", p.n_items},
               {"metrics", p.metrics}};
  if (p.generated_at) prov["generated_at"] = *p.generated_at;

  json models = json::array();
  for (const auto& m : report.models) {
    json items = json::array();
    for (const auto& it : m.items) {
      items.push_back({{"id", it.arxiv_id},
                       {"perplexity", Opt(it.perplexity)},
                       {"scored_tokens", Opt(it.scored_tokens)},
                       {"completion_entropy",
                        it.completion_entropy ? ToJson(*it.completion_entropy)
                                              : json(nullptr)},
                       {"similarity", Opt(it.similarity)}});
    }
    json failures = json::array();
    for (const auto& f : m.failures) {
      failures.push_back({{"id", f.arxiv_id}, {"stage", f.stage}, {"error", f.message}});
    }
    models.push_back(
        {{"name", m.name},
         {"model_id", m.model_id},
         {"baseline", m.baseline},
         {"perplexity", m.perplexity ? ToJson(*m.perplexity) : json(nullptr)},
         {"similarity", m.similarity ? ToJson(*m.similarity) : json(nullptr)},
         {"items", std::move(items)},
         {"failures", std::move(failures)}});
  }

  json gt = json::array();
  for (const auto& g : report.ground_truth_entropy) {
    json e = ToJson(g.point);
    e["id"] = g.arxiv_id;
    gt.push_back(std::move(e));
  }

  json curves = json::array();
  for (const auto& c : report.loss_curves) {
    json steps = json::array();
    for (const auto& s : c.steps) {
      steps.push_back({{"boundary_step", s.boundary_step},
                       {"drop", s.drop},
                       {"mean_before", s.mean_before},
                       {"mean_after", s.mean_after}});
    }
    curves.push_back({{"name", c.name},
                      {"plateau_tolerance", c.plateau_tolerance},
                      {"min_drop", c.min_drop},
                      {"n_points", c.n_points},
                      {"epoch_boundaries", c.epoch_boundaries},
                      {"steps", std::move(steps)}});
  }

  json out = {{"provenance", std::move(prov)},
              {"models", std::move(models)},
              {"ground_truth_entropy", std::move(gt)},
              {"loss_curves", std::move(curves)}};
  return out.dump(2) + "\n";
}

EvalReport ReportFromJson(std::string_view text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    const json& p = j.at("provenance");
    r.provenance.config_digest = p.at("config_digest").get<std::string>();
    r.provenance.dataset = p.at("dataset").get<std::string>();
    r.provenance.split_seed = p.at("split_seed").get<uint64_t>();
    r.provenance.bootstrap_seed = p.at("bootstrap_seed").get<uint64_t>();
    r.provenance.n_resamples = p.at("n_resamples").get<std::size_t>();
    r.provenance.batch_size = p.at("batch_size").get<std::size_t>();
    r.provenance.aggregation = p.at("aggregation").get<std::string>();
    r.provenance.generation.temperature = p.at("generation").at("temperature").get<double>();
    r.provenance.generation.max_new_tokens =
        p.at("generation").at("max_new_tokens").get<std::size_t>();
    r.provenance.n_items = p.at("n_items").get<std::size_t>();
    r.provenance.metrics = p.at("metrics").get<std::vector<std::string>>();
    r.provenance.generated_at = GetOpt<std::string>(p, "generated_at");

    for (const auto& jm : j.at("models")) {
      ModelReport m;
      m.name = jm.at("name").get<std::string>();
      m.model_id = jm.at("model_id").get<std::string>();
      m.baseline = jm.at("baseline").get<bool>();
      if (!jm.at("perplexity").is_null()) m.perplexity = PerplexityFromJson(jm["perplexity"]);
      if (!jm.at("similarity").is_null()) m.similarity = SimilarityFromJson(jm["similarity"]);
      for (const auto& ji : jm.at("items")) {
        ItemResult it;
        it.arxiv_id = ji.at("id").get<std::string>();
        it.perplexity = GetOpt<double>(ji, "perplexity");
        it.scored_tokens = GetOpt<std::size_t>(ji, "scored_tokens");
        if (!ji.at("completion_entropy").is_null()) {
          it.completion_entropy = EntropyFromJson(ji["completion_entropy"]);
        }
        it.similarity = GetOpt<double>(ji, "similarity");
        m.items.push_back(std::move(it));
      }
      for (const auto& jf : jm.at("failures")) {
        m.failures.push_back({jf.at("id").get<std::string>(),
                              jf.at("stage").get<std::string>(),
                              jf.at("error").get<std::string>()});
      }
      r.models.push_back(std::move(m));
    }
    for (const auto& jg : j.at("ground_truth_entropy")) {
      r.ground_truth_entropy.push_back({jg.at("id").get<std::string>(), EntropyFromJson(jg)});
    }
    for (const auto& jc : j.at("loss_curves")) {
      LossCurveReport c;
      c.name = jc.at("name").get<std::string>();
      c.plateau_tolerance = jc.at("plateau_tolerance").get<double>();
      c.min_drop = jc.at("min_drop").get<double>();
      c.n_points = jc.at("n_points").get<std::size_t>();
      c.epoch_boundaries = jc.at("epoch_boundaries").get<std::vector<uint64_t>>();
      for (const auto& js : jc.at("steps")) {
        c.steps.push_back({js.at("boundary_step").get<uint64_t>(),
                           js.at("drop").get<double>(),
                           js.at("mean_before").get<double>(),
                           js.at("mean_after").get<double>()});
      }
      r.loss_curves.push_back(std::move(c));
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what(), 0);
  }
}

std::set<ReportFormat> ParseReportFormats(std::string_view comma_list) {
  std::set<ReportFormat> out;
  std::string list(comma_list);
  for (char& c : list) {
    if (c == ',') c = ' ';
  }
  for (const auto& name : SplitWhitespace(list)) {
    if (name == "table") {
      out.insert(ReportFormat::kTable);
    } else if (name == "structured") {
      out.insert(ReportFormat::kStructured);
    } else if (name == "plot-data") {
      out.insert(ReportFormat::kPlotData);
    } else if (name == "all") {
      out = {ReportFormat::kTable, ReportFormat::kStructured, ReportFormat::kPlotData};
    } else {
      throw ConfigError("unknown report format '" + name + "'");
    }
  }
  return out;
}

std::string RenderPerplexityTable(const EvalReport& report) {
  std::string out =
      "| Model | Arithmetic | Geometric | Bootstrap mean | Bootstrap std |\n"
      "|---|---:|---:|---:|---:|\n";
  for (const ModelReport* m : DisplayOrder(report)) {
    std::string name = m->name + (m->baseline ? " (baseline)" : "");
    if (!m->perplexity) {
      out += "| " + name + " | n/a | n/a | n/a | n/a |\n";
      continue;
    }
    const auto& p = *m->perplexity;
    out += "| " + name + " | " + Fixed2(p.arithmetic_mean) + " | " +
           Fixed2(p.geometric_mean) + " | " + Fixed2(p.bootstrap_mean) + " | " +
           Fixed2(p.bootstrap_std) + " |\n";
  }
  return out;
}

std::vector<std::filesystem::path> EmitReport(const EvalReport& report,
                                              const std::set<ReportFormat>& formats,
                                              const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const std::string& body) {
    WriteFile(dir / name, body);
    written.push_back(dir / name);
  };
  const auto order = DisplayOrder(report);

  if (formats.contains(ReportFormat::kTable)) {
    emit("perplexity_table.md", RenderPerplexityTable(report));

    std::string csv =
        "model,model_id,baseline,n,arithmetic_mean,geometric_mean,corpus_perplexity,"
        "bootstrap_mean,bootstrap_std,n_resamples,seed,batch_size\n";
    for (const ModelReport* m : order) {
      if (!m->perplexity) continue;
      const auto& p = *m->perplexity;
      csv += CsvField(m->name) + "," + CsvField(m->model_id) + "," +
             (m->baseline ? "true" : "false") + "," +
             std::to_string(p.per_sequence.size()) + "," + Num(p.arithmetic_mean) + "," +
             Num(p.geometric_mean) + "," + Num(p.corpus_perplexity) + "," +
             Num(p.bootstrap_mean) + "," + Num(p.bootstrap_std) + "," +
             std::to_string(p.n_resamples) + "," + std::to_string(p.seed) + "," +
             std::to_string(p.batch_size) + "\n";
    }
    emit("perplexity_summary.csv", csv);

    std::string sim = "model,baseline,count,mean,std,min,max\n";
    for (const ModelReport* m : order) {
      if (!m->similarity) continue;
      const auto& s = *m->similarity;
      sim += CsvField(m->name) + "," + (m->baseline ? "true" : "false") + "," +
             std::to_string(s.count) + "," + Num(s.mean) + "," + Num(s.std) + "," +
             Num(s.min) + "," + Num(s.max) + "\n";
    }
    emit("similarity_summary.csv", sim);
  }

  std::string entropy = "source,id,length_words,exp_entropy\n";
  for (const auto& g : report.ground_truth_entropy) {
    entropy += "ground_truth," + CsvField(g.arxiv_id) + "," +
               std::to_string(g.point.length_words) + "," + Num(g.point.exp_entropy) + "\n";
  }
  for (const ModelReport* m : order) {
    for (const auto& it : m->items) {
      if (!it.completion_entropy) continue;
      entropy += CsvField(m->name) + "," + CsvField(it.arxiv_id) + "," +
                 std::to_string(it.completion_entropy->length_words) + "," +
                 Num(it.completion_entropy->exp_entropy) + "\n";
    }
  }
  if (formats.contains(ReportFormat::kTable)) emit("entropy_points.csv", entropy);

  if (formats.contains(ReportFormat::kStructured)) emit("report.json", ReportToJson(report));

  if (formats.contains(ReportFormat::kPlotData)) {
    std::string ppl = "model,baseline,mean,std,lower,upper\n";
    for (const ModelReport* m : order) {
      if (!m->perplexity) continue;
      const auto& p = *m->perplexity;
      ppl += CsvField(m->name) + "," + (m->baseline ? "true" : "false") + "," +
             Num(p.bootstrap_mean) + "," + Num(p.bootstrap_std) + "," +
             Num(p.bootstrap_mean - p.bootstrap_std) + "," +
             Num(p.bootstrap_mean + p.bootstrap_std) + "\n";
    }
    emit("plot_perplexity.csv", ppl);
    emit("plot_entropy.csv", entropy);
    if (!report.loss_curves.empty()) {
      std::string steps = "curve,boundary_step,drop,mean_before,mean_after\n";
      for (const auto& c : report.loss_curves) {
        for (const auto& s : c.steps) {
          steps += CsvField(c.name) + "," + std::to_string(s.boundary_step) + "," +
                   Num(s.drop) + "," + Num(s.mean_before) + "," + Num(s.mean_after) + "\n";
        }
      }
      emit("plot_loss_steps.csv", steps);
    }
  }
  return written;
}

}  // namespace lmeval
