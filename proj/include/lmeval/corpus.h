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

// Abstract corpus curation: cleaning of arXiv metadata records, dataset
// recipes that mix category pools, and seeded train/validation/test splits.

#ifndef LMEVAL_CORPUS_H_
#define LMEVAL_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace lmeval {

struct RawRecord {
  std::string arxiv_id;
  std::string primary_category;
  std::vector<std::string> categories;
  std::string abstract;
  std::string comments;
};

struct AbstractRecord {
  std::string arxiv_id;
  std::string primary_category;
  std::string abstract;

  friend bool operator==(const AbstractRecord&, const AbstractRecord&) = default;
};

enum class RejectReason { kWithdrawn, kEmpty };

const char* ToString(RejectReason reason);

struct Rejected {
  RejectReason reason;
};

using CleanResult = std::variant<AbstractRecord, Rejected>;

struct CleaningOptions {
  std::string reject_word = "withdrawn";
  // When false, any case-insensitive substring occurrence rejects.
  bool whole_word = true;
};

// Rejects records whose comments or abstract mention the reject word, then
// replaces every linebreak together with the whitespace that follows it by a
// single space and strips both ends.
CleanResult CleanRecord(const RawRecord& raw, const CleaningOptions& options = {});

// True if `word` occurs in `text` under the matching rule of `options`.
bool MentionsRejectWord(std::string_view text, const CleaningOptions& options);

// Parses one line of the public arXiv metadata dump (fields id, categories,
// abstract, comments). The primary category is the first listed category.
RawRecord ParseArxivMetadataLine(std::string_view line, std::size_t line_number);

// "hep-th" -> "hep-th", "cs.LG" -> "cs".
std::string ArchiveOf(std::string_view category);

using Pools = std::map<std::string, std::vector<AbstractRecord>>;

struct IngestStats {
  std::size_t lines = 0;
  std::size_t kept = 0;
  std::size_t withdrawn = 0;
  std::size_t empty = 0;
};

// Reads a (possibly gzip-compressed) metadata dump, cleans every record and
// groups survivors by primary category. A record lands in the pool named by
// its archive ("cs") and, when that exact key is in `wanted`, in the pool of
// its full category ("cs.LG"). With `wanted` set, other pools are dropped.
Pools LoadPools(const std::filesystem::path& path,
                const std::set<std::string>* wanted = nullptr,
                const CleaningOptions& options = {},
                IngestStats* stats = nullptr);

enum class SelectionKind { kAll, kFraction, kCount, kFill };

struct Selection {
  SelectionKind kind = SelectionKind::kAll;
  double fraction = 1.0;  // kFraction: in (0, 1]
  std::size_t count = 0;  // kCount: positive

  static Selection All() { return {SelectionKind::kAll, 1.0, 0}; }
  static Selection Fraction(double f) { return {SelectionKind::kFraction, f, 0}; }
  static Selection Count(std::size_t n) { return {SelectionKind::kCount, 1.0, n}; }
  // Takes whatever is needed to reach the recipe's target size.
  static Selection Fill() { return {SelectionKind::kFill, 1.0, 0}; }
};

struct RecipeComponent {
  std::string source_category;
  Selection selection;
};

struct DatasetRecipe {
  std::string name;
  std::vector<RecipeComponent> components;
  std::optional<std::size_t> target_size;
  uint64_t shuffle_seed = 0;
};

// Parses a recipe from its JSON form:
//   {"name": "mix", "shuffle_seed": 7, "target_size": 1000,
//    "components": [{"category": "hep-th", "select": "all"},
//                   {"category": "gr-qc", "fraction": 0.5},
//                   {"category": "hep-ph", "count": 200},
//                   {"category": "cs", "select": "fill"}]}
DatasetRecipe ParseRecipe(std::string_view json);
std::string RecipeToJson(const DatasetRecipe& recipe);

// Names of the bundled recipes, "s1" .. "s10".
std::vector<std::string> BuiltinRecipeNames();

// Builds a bundled recipe. Sizes that depend on the data (the s9 fraction,
// the s10 padding target, the s4-s6 shares) are computed from `pool_sizes`,
// which must contain every category the recipe reads.
DatasetRecipe BuiltinRecipe(std::string_view name,
                            const std::map<std::string, std::size_t>& pool_sizes,
                            uint64_t shuffle_seed);

// Categories a bundled recipe reads.
std::set<std::string> BuiltinRecipeCategories(std::string_view name);

// round-half-up(fraction * pool_size).
std::size_t FractionCount(double fraction, std::size_t pool_size);

enum class Split { kTrain, kValidation, kTest };

const char* ToString(Split split);

struct CuratedDataset {
  std::string name;
  uint64_t shuffle_seed = 0;
  std::vector<AbstractRecord> records;
  // Parallel to `records`; empty until split_tvt has run.
  std::vector<Split> split_assignment;
  std::optional<uint64_t> split_seed;

  std::vector<AbstractRecord> RecordsIn(Split split) const;
};

// Selects each component (whole pool for kAll, seeded sampling without
// replacement otherwise), concatenates in component order and shuffles with
// recipe.shuffle_seed.
//
// With a target size and a kFill component, the fill component supplies the
// remainder. Without one, any gap left by per-component rounding is closed by
// moving fraction components by at most one record each (largest remainder
// first); a larger gap is a RecipeError.
CuratedDataset ComposeDataset(const DatasetRecipe& recipe, const Pools& pools);

// Loads the pools `recipe_ref` reads from a metadata dump and composes the
// dataset. `recipe_ref` is a bundled recipe name, a path to a recipe file, or
// a recipe in JSON form (starting with '{'). `shuffle_seed` overrides the
// seed stored in a recipe file.
CuratedDataset CurateFromMetadata(const std::filesystem::path& metadata,
                                  const std::string& recipe_ref, uint64_t shuffle_seed,
                                  IngestStats* stats = nullptr);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t validation = 0;
  std::size_t test = 0;

  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

// train = floor(0.70 n), validation = floor(0.15 n), test = the rest.
// Computed in integer arithmetic.
SplitSizes ComputeSplitSizes(std::size_t n);

// Shuffles the records with `seed` and assigns the first train-size records
// to train, the next validation-size to validation, the rest to test.
// Throws SplitError when any of the three splits would be empty.
CuratedDataset SplitTvt(const CuratedDataset& dataset, uint64_t seed);

// Record <-> JSON line ({"id", "primary_category", "abstract"}).
std::string AbstractToJsonLine(const AbstractRecord& record);
AbstractRecord AbstractFromJsonLine(std::string_view line, std::size_t line_number);
std::vector<AbstractRecord> ReadAbstracts(const std::filesystem::path& path);

// SHA-256 over the canonical JSON-lines serialisation of the records,
// prefixed by their split label when assigned.
std::string DatasetDigest(const CuratedDataset& dataset);

// Writes <dir>/<name>.jsonl and <dir>/<name>.manifest.json.
void WriteCuratedDataset(const CuratedDataset& dataset,
                         const std::filesystem::path& dir);

// Writes train.jsonl, validation.jsonl, test.jsonl and manifest.json
// (name, seeds, per-split counts, content digest) into `dir`.
void WriteSplitDataset(const CuratedDataset& dataset,
                       const std::filesystem::path& dir);

}  // namespace lmeval

#endif  // LMEVAL_CORPUS_H_
