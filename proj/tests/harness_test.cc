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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "eval_fixture.h"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/protocol.h"
#include "lmeval/text.h"
#include "mock_server.h"
#include "test_util.h"

namespace lmeval {
namespace {

using json = nlohmann::json;

// Perplexity the mock implies for a ground truth, computed from the word list.
double OraclePerplexity(const std::string& ground_truth, bool tuned) {
  double loss = 0.0;
  const auto words = SplitWhitespace(ground_truth);
  for (const auto& w : words) {
    loss += 0.1 * (tuned ? 0.5 : 1.0) * static_cast<double>(1 + Utf8Length(w) % 4);
  }
  return std::exp(loss / static_cast<double>(words.size()));
}

double OracleCosine(const std::string& a, const std::string& b) {
  const auto u = MockServer::DefaultEmbedding(a);
  const auto v = MockServer::DefaultEmbedding(b);
  double dot = 0, uu = 0, vv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  return dot / std::sqrt(uu * vv);
}

TEST(RunEvalTest, FixtureMatchesOracles) {
  MockServer server;
  const RunConfig config = FixtureConfig(server.base_url(), 4);
  const RunResult run = RunEval(config);
  const EvalReport& r = run.report;
  const auto items = ReadAbstracts(TestData("fixture3/test.jsonl"));
  ASSERT_EQ(r.models.size(), 2u);
  EXPECT_TRUE(r.models[0].baseline);
  EXPECT_FALSE(r.models[1].baseline);
  for (std::size_t m = 0; m < 2; ++m) {
    const ModelReport& mr = r.models[m];
    ASSERT_EQ(mr.items.size(), 3u);
    EXPECT_TRUE(mr.failures.empty());
    std::vector<double> ppl;
    for (std::size_t i = 0; i < 3; ++i) {
      const PromptPair pair = MakePromptPair(items[i]);
      const ItemResult& it = mr.items[i];
      EXPECT_EQ(it.arxiv_id, items[i].arxiv_id);
      const double want = OraclePerplexity(pair.ground_truth, m == 1);
      EXPECT_NEAR(*it.perplexity, want, 1e-12 * want);
      EXPECT_EQ(*it.scored_tokens, SplitWhitespace(pair.ground_truth).size());
      const std::string completion = MockServer::DefaultCompletionText(pair.prompt, 1024);
      EXPECT_EQ(run.completions[m][i].completion, completion);
      EXPECT_NEAR(*it.similarity, OracleCosine(completion, pair.ground_truth), 1e-12);
      EXPECT_EQ(it.completion_entropy->length_words, SplitWhitespace(completion).size());
      ppl.push_back(want);
    }
    const double am = (ppl[0] + ppl[1] + ppl[2]) / 3.0;
    const double gm = std::cbrt(ppl[0] * ppl[1] * ppl[2]);
    EXPECT_NEAR(mr.perplexity->arithmetic_mean, am, 1e-12 * am);
    EXPECT_NEAR(mr.perplexity->geometric_mean, gm, 1e-12 * gm);
    EXPECT_EQ(mr.perplexity->n_resamples, 2000u);
    EXPECT_EQ(mr.similarity->count, 3u);
  }
  EXPECT_LT(r.models[1].perplexity->arithmetic_mean, r.models[0].perplexity->arithmetic_mean);
  EXPECT_EQ(r.ground_truth_entropy.size(), 3u);
  EXPECT_EQ(r.provenance.n_items, 3u);
  EXPECT_EQ(r.provenance.bootstrap_seed, 17u);
  EXPECT_EQ(r.provenance.generation.temperature, 0.8);
  EXPECT_EQ(r.provenance.generation.max_new_tokens, 1024u);
  EXPECT_FALSE(r.provenance.generated_at.has_value());
  EXPECT_EQ(r.provenance.config_digest, ConfigDigest(config));
}

TEST(RunEvalTest, MatchesGoldenReport) {
  MockServer server;
  const std::string got =
      PortIndependentReport(RunEval(FixtureConfig(server.base_url(), 4)).report);
  const auto golden = TestData("fixture3/golden_report.json");
  if (std::getenv("LMEVAL_UPDATE_GOLDEN") != nullptr) WriteFile(golden, got);
  EXPECT_EQ(got, ReadFile(golden));
}

TEST(RunEvalTest, ByteIdenticalAcrossRunsAndConcurrency) {
  MockServer server;
  const std::string first = ReportToJson(RunEval(FixtureConfig(server.base_url(), 1)).report);
  for (unsigned c : {1u, 4u, 16u}) {
    EXPECT_EQ(ReportToJson(RunEval(FixtureConfig(server.base_url(), c)).report), first) << c;
  }
}

TEST(RunEvalTest, NoBackendsIsConfigError) {
  const json j = {{"dataset", {{"test_split", "x.jsonl"}}}, {"models", json::array()}};
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
}

TEST(RunEvalTest, RecordsPartialFailure) {
  MockServer server;
  RunConfig config = FixtureConfig(server.base_url(), 2);
  config.models.resize(1);
  config.failure_threshold = 0.5;
  std::vector<AbstractRecord> items = ReadAbstracts(TestData("fixture3/test.jsonl"));
  items[1].abstract = "This FAIL case breaks. " + items[1].abstract;
  const RunResult run = RunEval(config, items, MakeBackends(config));
  const ModelReport& mr = run.report.models[0];
  ASSERT_EQ(mr.items.size(), 2u);
  ASSERT_EQ(mr.failures.size(), 1u);
  EXPECT_EQ(mr.failures[0].arxiv_id, items[1].arxiv_id);
  EXPECT_EQ(mr.failures[0].stage, "score");
  EXPECT_EQ(mr.items[0].arxiv_id, items[0].arxiv_id);
  EXPECT_EQ(mr.items[1].arxiv_id, items[2].arxiv_id);
  EXPECT_EQ(mr.perplexity->per_sequence.size(), 2u);

  config.failure_threshold = 0.10;
  EXPECT_THROW(RunEval(config, items, MakeBackends(config)), RunError);
}

TEST(RunEvalTest, AllItemsFailingIsRunError) {
  MockServer server;
  server.OnCompletions([](const json&, httplib::Response& res) { res.status = 500; });
  RunConfig config = FixtureConfig(server.base_url(), 2);
  config.failure_threshold = 1.0;
  EXPECT_THROW(RunEval(config), RunError);
}

TEST(RunEvalTest, ProtocolFailureIsRecorded) {
  MockServer server;
  RunConfig config = FixtureConfig(server.base_url(), 1);
  config.models.resize(1);
  config.failure_threshold = 0.5;
  std::vector<AbstractRecord> items = ReadAbstracts(TestData("fixture3/test.jsonl"));
  items[2].abstract = "Alone.";
  const RunResult run = RunEval(config, items, MakeBackends(config));
  ASSERT_EQ(run.report.models[0].failures.size(), 1u);
  EXPECT_EQ(run.report.models[0].failures[0].stage, "protocol");
  EXPECT_EQ(run.report.ground_truth_entropy.size(), 2u);
}

TEST(RunEvalTest, OfflineDumpsWithoutServer) {
  const auto dir = ScratchDir("offline_run");
  const auto items = ReadAbstracts(TestData("fixture3/test.jsonl"));
  std::string logprobs, completions;
  for (const auto& it : items) {
    logprobs += LogprobToJsonLine({it.arxiv_id, {-0.5, -1.0}, std::nullopt}) + "\n";
    completions += json{{"id", it.arxiv_id}, {"completion", "x y z"}}.dump() + "\n";
  }
  WriteFile(dir / "lp.jsonl", logprobs);
  WriteFile(dir / "c.jsonl", completions);
  WriteFile(dir / "test.jsonl", ReadFile(TestData("fixture3/test.jsonl")));
  WriteFile(dir / "run.json", json{{"dataset", {{"test_split", "test.jsonl"}}},
                                   {"models",
                                    {{{"name", "dump"},
                                      {"logprob_dump", "lp.jsonl"},
                                      {"completions_dump", "c.jsonl"}}}},
                                   {"metrics", {{"similarity", false},
                                                {"bootstrap_resamples", 100}}}}
                                  .dump());
  const RunConfig config = LoadRunConfig(dir / "run.json");
  EXPECT_EQ(config.dataset.test_split, dir / "test.jsonl");
  const EvalReport r = RunEval(config).report;
  ASSERT_EQ(r.models[0].items.size(), 3u);
  EXPECT_NEAR(r.models[0].perplexity->arithmetic_mean, std::exp(0.75), 1e-12);
  EXPECT_NEAR(r.models[0].items[0].completion_entropy->exp_entropy, 3.0, 1e-12);
  EXPECT_FALSE(r.models[0].similarity.has_value());
}

TEST(RunEvalTest, CuratesFromMetadataAndRecipe) {
  const auto dir = ScratchDir("curate_run");
  std::string meta;
  for (int i = 0; i < 40; ++i) {
    meta += json{{"id", "th" + std::to_string(i)},
                 {"categories", i % 2 ? "hep-th" : "gr-qc"},
                 {"abstract", "Claim " + std::to_string(i) + " holds. We prove it. Done."},
                 {"comments", ""}}
                .dump() +
            "\n";
  }
  WriteFile(dir / "meta.jsonl", meta);
  const json j = {{"dataset", {{"metadata", "meta.jsonl"}, {"recipe", "s7"}, {"shuffle_seed", 3}}},
                  {"split_seed", 9},
                  {"models", {{{"name", "m"}, {"logprob_dump", "lp.jsonl"}}}},
                  {"metrics", {{"entropy", false}, {"similarity", false}}}};
  const RunConfig config = ParseRunConfig(j.dump(), dir);
  const auto items = ResolveTestItems(config);
  EXPECT_EQ(items.size(), ComputeSplitSizes(40).test);
  EXPECT_EQ(items, ResolveTestItems(config));
}

TEST(RunConfigTest, EnvironmentOverridesCredentials) {
  setenv("LMEVAL_TEST_KEY", "from-env", 1);
  const json j = {{"dataset", {{"test_split", "t.jsonl"}}},
                  {"models",
                   {{{"name", "a"}, {"endpoint", "http://h/v1"}, {"api_key", "inline"},
                     {"api_key_env", "LMEVAL_TEST_KEY"}},
                    {{"name", "b"}, {"endpoint", "http://h/v1"}, {"api_key", "inline"}}}},
                  {"metrics", {{"similarity", false}}}};
  const RunConfig c = ParseRunConfig(j.dump(), "/base");
  EXPECT_EQ(c.models[0].api_key, "from-env");
  EXPECT_EQ(c.models[1].api_key, "inline");
  EXPECT_EQ(c.dataset.test_split, std::filesystem::path("/base/t.jsonl"));
  unsetenv("LMEVAL_TEST_KEY");
}

TEST(RunConfigTest, DigestIgnoresOperationalSettings) {
  RunConfig a = FixtureConfig("http://127.0.0.1:1/v1", 1);
  RunConfig b = FixtureConfig("http://127.0.0.1:1/v1", 16);
  b.output_dir = "elsewhere";
  b.models[0].api_key = "k";
  b.retry.max_retries = 9;
  EXPECT_EQ(ConfigDigest(a), ConfigDigest(b));
  b.metrics.bootstrap_seed = 18;
  EXPECT_NE(ConfigDigest(a), ConfigDigest(b));
}

TEST(RunConfigTest, RejectsInvalidConfigs) {
  const json base = {{"dataset", {{"test_split", "t.jsonl"}}},
                     {"models", {{{"name", "a"}, {"endpoint", "http://h/v1"}}}},
                     {"metrics", {{"similarity", false}}}};
  EXPECT_NO_THROW(ParseRunConfig(base.dump()));
  json j = base;
  j["metrics"]["similarity"] = true;
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
  j = base;
  j["models"].push_back({{"name", "a"}, {"endpoint", "http://h/v1"}});
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
  j = base;
  j["metrics"]["aggregation"] = "harmonic";
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
  j = base;
  j["failure_threshold"] = 1.5;
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
  j = base;
  j["dataset"]["metadata"] = "m.jsonl";
  EXPECT_THROW(ParseRunConfig(j.dump()), ConfigError);
  EXPECT_THROW(ParseRunConfig("{"), ConfigError);
}

class EmitReportTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    MockServer server;
    RunConfig config = FixtureConfig(server.base_url(), 4);
    config.loss_curves.push_back({"s3", TestData("loss_three_plateaus.jsonl"), std::nullopt,
                                  0.01, 0.05});
    report_ = new EvalReport(RunEval(config).report);
  }
  static void TearDownTestSuite() { delete report_; }
  static EvalReport* report_;
};

EvalReport* EmitReportTest::report_ = nullptr;

TEST_F(EmitReportTest, WritesEveryFormat) {
  const auto dir = ScratchDir("emit_all");
  const auto files = EmitReport(*report_, ParseReportFormats("all"), dir);
  for (const char* name : {"perplexity_table.md", "perplexity_summary.csv",
                           "similarity_summary.csv", "entropy_points.csv", "report.json",
                           "plot_perplexity.csv", "plot_entropy.csv", "plot_loss_steps.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_EQ(files.size(), 8u);
}

TEST_F(EmitReportTest, PlotDataOnly) {
  const auto dir = ScratchDir("emit_plot");
  const auto files = EmitReport(*report_, ParseReportFormats("plot-data"), dir);
  EXPECT_EQ(files.size(), 3u);
  EXPECT_FALSE(std::filesystem::exists(dir / "report.json"));
  EXPECT_THROW(ParseReportFormats("table,pdf"), ConfigError);
}

TEST_F(EmitReportTest, ReEmitIsByteIdentical) {
  const auto a = ScratchDir("emit_a");
  const auto b = ScratchDir("emit_b");
  const auto files = EmitReport(*report_, ParseReportFormats("all"), a);
  EmitReport(ReportFromJson(ReadFile(a / "report.json")), ParseReportFormats("all"), b);
  for (const auto& f : files) {
    EXPECT_EQ(ReadFile(f), ReadFile(b / f.filename())) << f.filename();
  }
}

TEST_F(EmitReportTest, TableListsBaselineFirst) {
  const std::string table = RenderPerplexityTable(*report_);
  const auto base = table.find("base (baseline)");
  const auto tuned = table.find("tuned-s3");
  ASSERT_NE(base, std::string::npos);
  ASSERT_NE(tuned, std::string::npos);
  EXPECT_LT(base, tuned);
  std::size_t rows = 0;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) rows += !line.empty() && line[0] == '|';
  EXPECT_EQ(rows, 4u);  // header, rule, two models
}

TEST_F(EmitReportTest, LossStepsAreReported) {
  ASSERT_EQ(report_->loss_curves.size(), 1u);
  EXPECT_EQ(report_->loss_curves[0].steps.size(), 2u);
}

TEST_F(EmitReportTest, UnwritableDirectoryIsIoError) {
  const auto dir = ScratchDir("emit_bad");
  WriteFile(dir / "file", "x");
  EXPECT_THROW(EmitReport(*report_, ParseReportFormats("structured"), dir / "file" / "sub"),
               IoError);
}

}  // namespace
}  // namespace lmeval
