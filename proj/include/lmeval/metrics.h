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

// Evaluation metrics. All logarithms are natural.
//
// Perplexity of one sequence with token probabilities p_1..p_k and
// normalisation length T:
//
//   CE  = -(1/T) * sum_t ln p_t
//   PPL = exp(CE) = (prod_t 1/p_t)^(1/T)
//
// T defaults to k. Passing a larger T reproduces conventions that count
// unscored leading tokens in the length.
//
// A dataset of sequences can be summarised two ways, and they only agree
// when every sequence has the same perplexity:
//
//   arithmetic: mean_i PPL_i          (average branching factor; default)
//   geometric:  exp(mean_i ln PPL_i)
//
// CorpusPerplexity() is the token-weighted variant obtained by
// exponentiating the loss of the whole dataset; it equals the geometric mean
// when all sequences have the same length.

#ifndef LMEVAL_METRICS_H_
#define LMEVAL_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lmeval {

struct ScoredSequence {
  std::string id;
  std::vector<double> token_logprobs;  // natural log, each <= 0
  std::optional<std::size_t> norm_length;

  std::size_t NormLength() const {
    return norm_length.value_or(token_logprobs.size());
  }

  friend bool operator==(const ScoredSequence&, const ScoredSequence&) = default;
};

// Throws MetricError unless the sequence has at least one token, every
// logprob is <= 0 (and not NaN), and the normalisation length is positive.
void ValidateScoredSequence(const ScoredSequence& seq);

double SequenceCrossEntropy(const ScoredSequence& seq);
double SequencePerplexity(const ScoredSequence& seq);

enum class Aggregation { kArithmetic, kGeometric };

const char* ToString(Aggregation mode);
Aggregation ParseAggregation(std::string_view name);

double AggregatePerplexity(std::span<const double> values, Aggregation mode);

// exp(sum of token losses / sum of normalisation lengths).
double CorpusPerplexity(std::span<const ScoredSequence> sequences);

struct BootstrapResult {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation of the resample means
  std::size_t n_resamples = 0;
  uint64_t seed = 0;
};

// Draws `n_resamples` resamples of size |values| with replacement and returns
// the mean and standard deviation of the resample means. Resample r uses its
// own generator seeded from (seed, r), so the result does not depend on
// `workers`.
BootstrapResult BootstrapMeanStd(std::span<const double> values,
                                 std::size_t n_resamples, uint64_t seed,
                                 unsigned workers = 1);

// Exact bootstrap distribution by enumerating all |values|^|values| equally
// likely ordered resamples. Limited to |values| <= 7.
BootstrapResult BootstrapExhaustive(std::span<const double> values);

// Means of consecutive groups of `batch_size` values; a short final group is
// kept. batch_size 1 returns the input.
std::vector<double> GroupIntoBatches(std::span<const double> values,
                                     std::size_t batch_size);

struct PerplexityOptions {
  Aggregation aggregation = Aggregation::kArithmetic;
  std::size_t n_resamples = 10000;
  uint64_t seed = 0;
  std::size_t batch_size = 1;
  unsigned workers = 1;
};

struct PerplexitySummary {
  std::vector<double> per_sequence;
  double arithmetic_mean = 0.0;
  double geometric_mean = 0.0;
  double corpus_perplexity = 0.0;
  Aggregation aggregation = Aggregation::kArithmetic;
  double bootstrap_mean = 0.0;
  double bootstrap_std = 0.0;
  std::size_t n_resamples = 0;
  uint64_t seed = 0;
  std::size_t batch_size = 1;

  double Headline() const {
    return aggregation == Aggregation::kArithmetic ? arithmetic_mean : geometric_mean;
  }
};

// Per-sequence perplexities, both aggregates, the token-weighted corpus
// perplexity and a bootstrap of the (optionally batch-averaged) values.
PerplexitySummary SummarizePerplexity(std::span<const ScoredSequence> sequences,
                                      const PerplexityOptions& options = {});

struct EntropyOptions {
  bool case_fold = false;
  bool strip_punctuation = false;
};

struct EntropyPoint {
  std::size_t length_words = 0;
  double exp_entropy = 1.0;
};

// exp(H) of the word-frequency distribution, H = -sum_i f_i ln f_i. Words are
// whitespace tokens, punctuation attached, case preserved (by default).
// Empty text gives (0, 1).
EntropyPoint ExpWordEntropy(std::string_view text, const EntropyOptions& options = {});

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws MetricError on a zero
// vector or a dimension mismatch.
double CosineSimilarity(std::span<const double> u, std::span<const double> v);

struct SimilarityStats {
  double mean = 0.0;
  double std = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

SimilarityStats SummarizeSimilarities(std::span<const double> values);

struct LossPoint {
  uint64_t step = 0;
  double loss = 0.0;
};

struct LossCurve {
  std::vector<LossPoint> points;
  // Step at which each new epoch begins.
  std::vector<uint64_t> epoch_boundaries;
};

struct LossStep {
  uint64_t boundary_step = 0;
  double drop = 0.0;
  double mean_before = 0.0;
  double mean_after = 0.0;
};

// Reports each epoch boundary where the previous epoch's mean loss exceeds
// the next epoch's by at least `min_drop`, provided both epochs are plateaus
// (max - min <= plateau_tolerance). Throws MetricError if steps or
// boundaries are not strictly increasing, or if an epoch next to a boundary
// holds fewer than two points.
std::vector<LossStep> DetectLossSteps(const LossCurve& curve, double plateau_tolerance,
                                      double min_drop);

// Reads {"step": int, "loss": real[, "epoch": int]} lines. Boundaries come
// from changes of "epoch" or, when given, from multiples of steps_per_epoch.
LossCurve ReadLossCurve(const std::filesystem::path& path,
                        std::optional<uint64_t> steps_per_epoch = std::nullopt);

}  // namespace lmeval

#endif  // LMEVAL_METRICS_H_
