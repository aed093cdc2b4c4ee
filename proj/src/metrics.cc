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

#include "lmeval/metrics.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/rng.h"
#include "lmeval/text.h"

namespace lmeval {
namespace {

double Mean(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

double PopulationStd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

bool IsAsciiPunct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

}  // namespace

void ValidateScoredSequence(const ScoredSequence& seq) {
  if (seq.token_logprobs.empty()) {
    throw MetricError("sequence '" + seq.id + "' has no scored tokens");
  }
  if (seq.norm_length && *seq.norm_length == 0) {
    throw MetricError("sequence '" + seq.id + "' has zero normalisation length");
  }
  for (double lp : seq.token_logprobs) {
    if (std::isnan(lp) || lp > 0.0) {
      throw MetricError("sequence '" + seq.id + "' has invalid logprob " +
                        std::to_string(lp));
    }
  }
}

double SequenceCrossEntropy(const ScoredSequence& seq) {
  ValidateScoredSequence(seq);
  double sum = 0.0;
  for (double lp : seq.token_logprobs) sum += lp;
  return -sum / static_cast<double>(seq.NormLength());
}

double SequencePerplexity(const ScoredSequence& seq) {
  return std::exp(SequenceCrossEntropy(seq));
}

const char* ToString(Aggregation mode) {
  return mode == Aggregation::kArithmetic ? "arithmetic" : "geometric";
}

Aggregation ParseAggregation(std::string_view name) {
  if (name == "arithmetic") return Aggregation::kArithmetic;
  if (name == "geometric") return Aggregation::kGeometric;
  throw MetricError("unknown aggregation '" + std::string(name) + "'");
}

double AggregatePerplexity(std::span<const double> values, Aggregation mode) {
  if (values.empty()) throw MetricError("cannot aggregate an empty list");
  if (mode == Aggregation::kArithmetic) return Mean(values);
  double log_sum = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw MetricError("geometric mean needs positive values");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

double CorpusPerplexity(std::span<const ScoredSequence> sequences) {
  if (sequences.empty()) throw MetricError("no sequences");
  double loss = 0.0;
  double length = 0.0;
  for (const auto& s : sequences) {
    ValidateScoredSequence(s);
    for (double lp : s.token_logprobs) loss -= lp;
    length += static_cast<double>(s.NormLength());
  }
  return std::exp(loss / length);
}

BootstrapResult BootstrapMeanStd(std::span<const double> values,
                                 std::size_t n_resamples, uint64_t seed,
                                 unsigned workers) {
  if (values.empty()) throw MetricError("bootstrap of an empty list");
  if (n_resamples == 0) throw MetricError("n_resamples must be positive");
  const std::size_t n = values.size();
  std::vector<double> means(n_resamples);

  auto run_block = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      SplitMix64 rng(DeriveSeed(seed, r));
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) sum += values[rng.Below(n)];
      means[r] = sum / static_cast<double>(n);
    }
  };

  const std::size_t n_workers =
      std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, n_resamples / 64));
  if (n_workers == 1) {
    run_block(0, n_resamples);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_resamples + n_workers - 1) / n_workers;
    for (std::size_t w = 0; w < n_workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n_resamples, begin + chunk);
      if (begin < end) pool.emplace_back(run_block, begin, end);
    }
  }

  BootstrapResult out;
  out.mean = Mean(means);
  out.std = PopulationStd(means, out.mean);
  out.n_resamples = n_resamples;
  out.seed = seed;
  return out;
}

BootstrapResult BootstrapExhaustive(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw MetricError("bootstrap of an empty list");
  if (n > 7) throw MetricError("exhaustive bootstrap limited to 7 values");
  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= n;

  std::vector<std::size_t> digits(n, 0);
  std::vector<double> means;
  means.reserve(total);
  for (std::size_t r = 0; r < total; ++r) {
    double sum = 0.0;
    for (std::size_t d : digits) sum += values[d];
    means.push_back(sum / static_cast<double>(n));
    for (std::size_t k = 0; k < n; ++k) {
      if (++digits[k] < n) break;
      digits[k] = 0;
    }
  }
  BootstrapResult out;
  out.mean = Mean(means);
  out.std = PopulationStd(means, out.mean);
  out.n_resamples = total;
  return out;
}

std::vector<double> GroupIntoBatches(std::span<const double> values,
                                     std::size_t batch_size) {
  if (batch_size == 0) throw MetricError("batch_size must be positive");
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); i += batch_size) {
    const std::size_t len = std::min(batch_size, values.size() - i);
    out.push_back(Mean(values.subspan(i, len)));
  }
  return out;
}

PerplexitySummary SummarizePerplexity(std::span<const ScoredSequence> sequences,
                                      const PerplexityOptions& options) {
  if (sequences.empty()) throw MetricError("no sequences to summarise");
  PerplexitySummary s;
  s.per_sequence.reserve(sequences.size());
  for (const auto& seq : sequences) s.per_sequence.push_back(SequencePerplexity(seq));
  s.arithmetic_mean = AggregatePerplexity(s.per_sequence, Aggregation::kArithmetic);
  s.geometric_mean = AggregatePerplexity(s.per_sequence, Aggregation::kGeometric);
  s.corpus_perplexity = CorpusPerplexity(sequences);
  s.aggregation = options.aggregation;
  s.batch_size = options.batch_size;
  const std::vector<double> units = GroupIntoBatches(s.per_sequence, options.batch_size);
  const BootstrapResult boot =
      BootstrapMeanStd(units, options.n_resamples, options.seed, options.workers);
  s.bootstrap_mean = boot.mean;
  s.bootstrap_std = boot.std;
  s.n_resamples = boot.n_resamples;
  s.seed = boot.seed;
  return s;
}

EntropyPoint ExpWordEntropy(std::string_view text, const EntropyOptions& options) {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (std::string word : SplitWhitespace(text)) {
    if (options.strip_punctuation) {
      std::erase_if(word, IsAsciiPunct);
      if (word.empty()) continue;
    }
    if (options.case_fold) word = ToLowerAscii(word);
    ++counts[word];
    ++total;
  }
  EntropyPoint p;
  p.length_words = total;
  if (total == 0) return p;
  double h = 0.0;
  for (const auto& [word, c] : counts) {
    const double f = static_cast<double>(c) / static_cast<double>(total);
    h -= f * std::log(f);
  }
  p.exp_entropy = std::exp(h);
  return p;
}

double CosineSimilarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw MetricError("dimension mismatch: " + std::to_string(u.size()) + " vs " +
                      std::to_string(v.size()));
  }
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) throw MetricError("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

SimilarityStats SummarizeSimilarities(std::span<const double> values) {
  SimilarityStats s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = Mean(values);
  s.std = PopulationStd(values, s.mean);
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  return s;
}

std::vector<LossStep> DetectLossSteps(const LossCurve& curve, double plateau_tolerance,
                                      double min_drop) {
  const auto& pts = curve.points;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].step <= pts[i - 1].step) {
      throw MetricError("loss curve steps are not strictly increasing at step " +
                        std::to_string(pts[i].step));
    }
  }
  const auto& bounds = curve.epoch_boundaries;
  for (std::size_t i = 1; i < bounds.size(); ++i) {
    if (bounds[i] <= bounds[i - 1]) {
      throw MetricError("epoch boundaries are not strictly increasing");
    }
  }

  // Epoch k spans [bounds[k-1], bounds[k]).
  struct Segment {
    double mean = 0.0;
    double range = 0.0;
    std::size_t n = 0;
  };
  std::vector<Segment> segs(bounds.size() + 1);
  {
    std::vector<double> lo(segs.size(), INFINITY), hi(segs.size(), -INFINITY);
    std::vector<double> sum(segs.size(), 0.0);
    for (const auto& p : pts) {
      const std::size_t k = static_cast<std::size_t>(
          std::upper_bound(bounds.begin(), bounds.end(), p.step) - bounds.begin());
      sum[k] += p.loss;
      lo[k] = std::min(lo[k], p.loss);
      hi[k] = std::max(hi[k], p.loss);
      ++segs[k].n;
    }
    for (std::size_t k = 0; k < segs.size(); ++k) {
      if (segs[k].n == 0) continue;
      segs[k].mean = sum[k] / static_cast<double>(segs[k].n);
      segs[k].range = hi[k] - lo[k];
    }
  }

  std::vector<LossStep> steps;
  for (std::size_t b = 0; b < bounds.size(); ++b) {
    const Segment& before = segs[b];
    const Segment& after = segs[b + 1];
    if (before.n < 2 || after.n < 2) {
      throw MetricError("epoch next to boundary " + std::to_string(bounds[b]) +
                        " has fewer than two points");
    }
    const double drop = before.mean - after.mean;
    if (drop >= min_drop && before.range <= plateau_tolerance &&
        after.range <= plateau_tolerance) {
      steps.push_back({bounds[b], drop, before.mean, after.mean});
    }
  }
  return steps;
}

LossCurve ReadLossCurve(const std::filesystem::path& path,
                        std::optional<uint64_t> steps_per_epoch) {
  using json = nlohmann::json;
  if (steps_per_epoch && *steps_per_epoch == 0) {
    throw MetricError("steps_per_epoch must be positive");
  }
  LossCurve curve;
  std::optional<int64_t> last_epoch;
  ForEachLine(path, [&](std::string_view line, std::size_t number) {
    if (Trim(line).empty()) return;
    try {
      const json j = json::parse(line);
      LossPoint p{j.at("step").get<uint64_t>(), j.at("loss").get<double>()};
      if (!steps_per_epoch && j.contains("epoch")) {
        const auto epoch = j["epoch"].get<int64_t>();
        if (last_epoch && epoch != *last_epoch) curve.epoch_boundaries.push_back(p.step);
        last_epoch = epoch;
      }
      curve.points.push_back(p);
    } catch (const json::exception& e) {
      throw FormatError(e.what(), number);
    }
  });
  if (steps_per_epoch && !curve.points.empty()) {
    const uint64_t first = curve.points.front().step;
    const uint64_t last = curve.points.back().step;
    for (uint64_t b = (first / *steps_per_epoch + 1) * *steps_per_epoch; b <= last;
         b += *steps_per_epoch) {
      curve.epoch_boundaries.push_back(b);
    }
  }
  return curve;
}

}  // namespace lmeval
