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

#include "lmeval/corpus.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "lmeval/error.h"
#include "lmeval/io.h"
#include "lmeval/rng.h"
#include "lmeval/text.h"

namespace lmeval {
namespace {

using json = nlohmann::json;

bool IsWordChar(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

std::string CleanAbstractText(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (IsLinebreak(raw[i])) {
      while (i < raw.size() && IsSpace(raw[i])) ++i;
      out.push_back(' ');
      continue;
    }
    out.push_back(raw[i++]);
  }
  return std::string(Trim(out));
}

std::string StringField(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw FormatError(std::string("field '") + key + "' is not a string", 0);
  }
  return it->get<std::string>();
}

std::string ToJsonLine(const AbstractRecord& r) {
  json j = {{"id", r.arxiv_id},
            {"primary_category", r.primary_category},
            {"abstract", r.abstract}};
  return j.dump();
}

const Pools::mapped_type& PoolFor(const Pools& pools, const std::string& name) {
  auto it = pools.find(name);
  if (it == pools.end()) throw RecipeError("no pool for category '" + name + "'");
  return it->second;
}

void ValidateRecipe(const DatasetRecipe& recipe) {
  if (recipe.components.empty()) {
    throw RecipeError("recipe '" + recipe.name + "' has no components");
  }
  if (recipe.target_size && *recipe.target_size == 0) {
    throw RecipeError("target_size must be positive");
  }
  std::set<std::string> seen;
  int fills = 0;
  for (const auto& c : recipe.components) {
    if (!seen.insert(c.source_category).second) {
      throw RecipeError("category '" + c.source_category +
                        "' appears in more than one component");
    }
    switch (c.selection.kind) {
      case SelectionKind::kFraction:
        if (!(c.selection.fraction > 0.0 && c.selection.fraction <= 1.0)) {
          throw RecipeError("fraction for '" + c.source_category +
                            "' must lie in (0, 1]");
        }
        break;
      case SelectionKind::kCount:
        if (c.selection.count == 0) {
          throw RecipeError("count for '" + c.source_category + "' must be positive");
        }
        break;
      case SelectionKind::kFill:
        ++fills;
        break;
      case SelectionKind::kAll:
        break;
    }
  }
  if (fills > 1) throw RecipeError("at most one fill component is allowed");
  if (fills == 1 && !recipe.target_size) {
    throw RecipeError("a fill component requires target_size");
  }
  // A record filed under "cs" is also filed under "cs.LG"; reading both
  // would draw it twice.
  for (const auto& a : seen) {
    for (const auto& b : seen) {
      if (a != b && ArchiveOf(b) == a) {
        throw RecipeError("components '" + a + "' and '" + b + "' overlap");
      }
    }
  }
}

}  // namespace

const char* ToString(RejectReason reason) {
  switch (reason) {
    case RejectReason::kWithdrawn:
      return "withdrawn";
    case RejectReason::kEmpty:
      return "empty";
  }
  return "unknown";
}

const char* ToString(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

bool MentionsRejectWord(std::string_view text, const CleaningOptions& options) {
  if (options.reject_word.empty()) return false;
  const std::string hay = ToLowerAscii(text);
  const std::string needle = ToLowerAscii(options.reject_word);
  for (auto pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    if (!options.whole_word) return true;
    const bool left_ok = pos == 0 || !IsWordChar(hay[pos - 1]);
    const std::size_t end = pos + needle.size();
    const bool right_ok = end == hay.size() || !IsWordChar(hay[end]);
    if (left_ok && right_ok) return true;
  }
  return false;
}

CleanResult CleanRecord(const RawRecord& raw, const CleaningOptions& options) {
  if (MentionsRejectWord(raw.comments, options) ||
      MentionsRejectWord(raw.abstract, options)) {
    return Rejected{RejectReason::kWithdrawn};
  }
  std::string text = CleanAbstractText(raw.abstract);
  if (text.empty()) return Rejected{RejectReason::kEmpty};
  return AbstractRecord{raw.arxiv_id, raw.primary_category, std::move(text)};
}

RawRecord ParseArxivMetadataLine(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw FormatError("record is not an object", line_number);
  RawRecord r;
  try {
    r.arxiv_id = StringField(j, "id");
    r.categories = SplitWhitespace(StringField(j, "categories"));
    r.primary_category = StringField(j, "primary_category");
    r.abstract = StringField(j, "abstract");
    r.comments = StringField(j, "comments");
  } catch (const FormatError& e) {
    throw FormatError(e.what(), line_number);
  }
  if (r.primary_category.empty() && !r.categories.empty()) {
    r.primary_category = r.categories.front();
  }
  if (r.arxiv_id.empty()) throw FormatError("missing 'id'", line_number);
  if (r.primary_category.empty()) {
    throw FormatError("missing 'categories'", line_number);
  }
  return r;
}

std::string ArchiveOf(std::string_view category) {
  return std::string(category.substr(0, category.find('.')));
}

Pools LoadPools(const std::filesystem::path& path,
                const std::set<std::string>* wanted,
                const CleaningOptions& options, IngestStats* stats) {
  Pools pools;
  IngestStats local;
  ForEachLine(path, [&](std::string_view line, std::size_t number) {
    if (Trim(line).empty()) return;
    ++local.lines;
    const RawRecord raw = ParseArxivMetadataLine(line, number);
    CleanResult cleaned = CleanRecord(raw, options);
    if (const auto* rejected = std::get_if<Rejected>(&cleaned)) {
      if (rejected->reason == RejectReason::kWithdrawn) {
        ++local.withdrawn;
      } else {
        ++local.empty;
      }
      return;
    }
    auto& record = std::get<AbstractRecord>(cleaned);
    const std::string archive = ArchiveOf(record.primary_category);
    bool used = false;
    if (wanted && archive != record.primary_category &&
        wanted->contains(record.primary_category)) {
      pools[record.primary_category].push_back(record);
      used = true;
    }
    if (!wanted || wanted->contains(archive)) {
      pools[archive].push_back(std::move(record));
      used = true;
    }
    if (used) ++local.kept;
  });
  if (stats) *stats = local;
  return pools;
}

DatasetRecipe ParseRecipe(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw RecipeError(std::string("invalid recipe JSON: ") + e.what());
  }
  try {
    DatasetRecipe recipe;
    recipe.name = j.at("name").get<std::string>();
    recipe.shuffle_seed = j.value("shuffle_seed", uint64_t{0});
    if (j.contains("target_size") && !j["target_size"].is_null()) {
      recipe.target_size = j["target_size"].get<std::size_t>();
    }
    for (const auto& c : j.at("components")) {
      RecipeComponent comp;
      comp.source_category = c.at("category").get<std::string>();
      if (c.contains("fraction")) {
        comp.selection = Selection::Fraction(c["fraction"].get<double>());
      } else if (c.contains("count")) {
        const auto n = c["count"].get<int64_t>();
        if (n <= 0) throw RecipeError("count must be positive");
        comp.selection = Selection::Count(static_cast<std::size_t>(n));
      } else {
        const std::string sel = c.value("select", std::string("all"));
        if (sel == "all") {
          comp.selection = Selection::All();
        } else if (sel == "fill") {
          comp.selection = Selection::Fill();
        } else {
          throw RecipeError("unknown selection '" + sel + "'");
        }
      }
      recipe.components.push_back(std::move(comp));
    }
    ValidateRecipe(recipe);
    return recipe;
  } catch (const json::exception& e) {
    throw RecipeError(std::string("malformed recipe: ") + e.what());
  }
}

std::string RecipeToJson(const DatasetRecipe& recipe) {
  json comps = json::array();
  for (const auto& c : recipe.components) {
    json jc = {{"category", c.source_category}};
    switch (c.selection.kind) {
      case SelectionKind::kAll:
        jc["select"] = "all";
        break;
      case SelectionKind::kFill:
        jc["select"] = "fill";
        break;
      case SelectionKind::kFraction:
        jc["fraction"] = c.selection.fraction;
        break;
      case SelectionKind::kCount:
        jc["count"] = c.selection.count;
        break;
    }
    comps.push_back(std::move(jc));
  }
  json j = {{"name", recipe.name},
            {"shuffle_seed", recipe.shuffle_seed},
            {"components", std::move(comps)}};
  j["target_size"] = recipe.target_size ? json(*recipe.target_size) : json(nullptr);
  return j.dump(2);
}

std::vector<std::string> BuiltinRecipeNames() {
  return {"s1", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10"};
}

std::set<std::string> BuiltinRecipeCategories(std::string_view name) {
  if (name == "s1") return {"hep-th"};
  if (name == "s2") return {"hep-ph", "gr-qc"};
  if (name == "s3" || name == "s4" || name == "s9") return {"hep-th", "hep-ph", "gr-qc"};
  if (name == "s5" || name == "s7") return {"hep-th", "gr-qc"};
  if (name == "s6" || name == "s8") return {"hep-th", "hep-ph"};
  if (name == "s10") return {"hep-th", "hep-ph", "gr-qc", "q-bio", "cs"};
  throw RecipeError("unknown built-in recipe '" + std::string(name) + "'");
}

DatasetRecipe BuiltinRecipe(std::string_view name,
                            const std::map<std::string, std::size_t>& pool_sizes,
                            uint64_t shuffle_seed) {
  auto size_of = [&](const std::string& cat) {
    auto it = pool_sizes.find(cat);
    if (it == pool_sizes.end()) {
      throw RecipeError("recipe " + std::string(name) + " needs pool '" + cat + "'");
    }
    return it->second;
  };
  for (const auto& cat : BuiltinRecipeCategories(name)) size_of(cat);

  DatasetRecipe r;
  r.name = std::string(name);
  r.shuffle_seed = shuffle_seed;
  const std::size_t th = name == "s2" ? 0 : size_of("hep-th");
  auto all = [&](const char* cat) { r.components.push_back({cat, Selection::All()}); };

  if (name == "s1") {
    all("hep-th");
  } else if (name == "s2") {
    all("hep-ph");
    all("gr-qc");
  } else if (name == "s3") {
    all("hep-th");
    all("hep-ph");
    all("gr-qc");
  } else if (name == "s4") {
    r.components.push_back({"hep-th", Selection::Count(FractionCount(0.70, th))});
    r.components.push_back({"hep-ph", Selection::Count(FractionCount(0.15, th))});
    r.components.push_back({"gr-qc", Selection::Fill()});
    r.target_size = th;
  } else if (name == "s5" || name == "s6") {
    r.components.push_back({"hep-th", Selection::Count(FractionCount(0.85, th))});
    r.components.push_back({name == "s5" ? "gr-qc" : "hep-ph", Selection::Fill()});
    r.target_size = th;
  } else if (name == "s7") {
    all("hep-th");
    all("gr-qc");
  } else if (name == "s8") {
    all("hep-th");
    all("hep-ph");
  } else if (name == "s9") {
    const double f = static_cast<double>(th) /
                     static_cast<double>(size_of("hep-ph") + size_of("gr-qc"));
    r.components.push_back({"hep-ph", Selection::Fraction(f)});
    r.components.push_back({"gr-qc", Selection::Fraction(f)});
    r.target_size = th;
  } else if (name == "s10") {
    all("hep-th");
    all("q-bio");
    r.components.push_back({"cs", Selection::Fill()});
    r.target_size = th + size_of("hep-ph") + size_of("gr-qc");
  }
  return r;
}

std::size_t FractionCount(double fraction, std::size_t pool_size) {
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(pool_size) + 0.5));
}

std::vector<AbstractRecord> CuratedDataset::RecordsIn(Split split) const {
  std::vector<AbstractRecord> out;
  for (std::size_t i = 0; i < split_assignment.size(); ++i) {
    if (split_assignment[i] == split) out.push_back(records[i]);
  }
  return out;
}

CuratedDataset ComposeDataset(const DatasetRecipe& recipe, const Pools& pools) {
  ValidateRecipe(recipe);
  const std::size_t n_comp = recipe.components.size();
  std::vector<std::size_t> pool_size(n_comp);
  std::vector<std::size_t> take(n_comp, 0);
  std::size_t fill_index = n_comp;

  for (std::size_t i = 0; i < n_comp; ++i) {
    const auto& c = recipe.components[i];
    const std::size_t m = PoolFor(pools, c.source_category).size();
    pool_size[i] = m;
    switch (c.selection.kind) {
      case SelectionKind::kAll:
        take[i] = m;
        break;
      case SelectionKind::kFraction:
        take[i] = FractionCount(c.selection.fraction, m);
        if (take[i] == 0) {
          throw RecipeError("fraction of '" + c.source_category +
                            "' selects zero records");
        }
        break;
      case SelectionKind::kCount:
        if (c.selection.count > m) {
          throw RecipeError("requested " + std::to_string(c.selection.count) +
                            " records from '" + c.source_category + "' but pool has " +
                            std::to_string(m));
        }
        take[i] = c.selection.count;
        break;
      case SelectionKind::kFill:
        fill_index = i;
        break;
    }
  }

  if (recipe.target_size) {
    const std::size_t target = *recipe.target_size;
    const std::size_t fixed = std::accumulate(take.begin(), take.end(), std::size_t{0});
    if (fill_index < n_comp) {
      if (fixed > target) {
        throw RecipeError("components already exceed target_size");
      }
      const std::size_t need = target - fixed;
      if (need > pool_size[fill_index]) {
        throw RecipeError("fill pool '" + recipe.components[fill_index].source_category +
                          "' too small: need " + std::to_string(need));
      }
      take[fill_index] = need;
    } else if (fixed != target) {
      // Close the rounding gap one record per fraction component.
      struct Candidate {
        std::size_t index;
        double residual;  // exact share minus current count
      };
      std::vector<Candidate> cands;
      const bool grow = fixed < target;
      for (std::size_t i = 0; i < n_comp; ++i) {
        const auto& sel = recipe.components[i].selection;
        if (sel.kind != SelectionKind::kFraction) continue;
        if (grow && take[i] >= pool_size[i]) continue;
        if (!grow && take[i] <= 1) continue;
        cands.push_back({i, sel.fraction * static_cast<double>(pool_size[i]) -
                                static_cast<double>(take[i])});
      }
      std::stable_sort(cands.begin(), cands.end(),
                       [grow](const Candidate& a, const Candidate& b) {
                         return grow ? a.residual > b.residual
                                     : a.residual < b.residual;
                       });
      const std::size_t gap = grow ? target - fixed : fixed - target;
      if (gap > cands.size()) {
        throw RecipeError("recipe '" + recipe.name + "' yields " +
                          std::to_string(fixed) + " records; cannot reach target_size " +
                          std::to_string(target));
      }
      for (std::size_t k = 0; k < gap; ++k) {
        take[cands[k].index] += grow ? 1 : std::size_t(-1);
      }
    }
  }

  CuratedDataset out;
  out.name = recipe.name;
  out.shuffle_seed = recipe.shuffle_seed;
  out.records.reserve(std::accumulate(take.begin(), take.end(), std::size_t{0}));
  for (std::size_t i = 0; i < n_comp; ++i) {
    const auto& pool = PoolFor(pools, recipe.components[i].source_category);
    if (take[i] == pool.size() &&
        recipe.components[i].selection.kind == SelectionKind::kAll) {
      out.records.insert(out.records.end(), pool.begin(), pool.end());
      continue;
    }
    for (std::size_t idx :
         SampleWithoutReplacement(pool.size(), take[i], DeriveSeed(recipe.shuffle_seed, i + 1))) {
      out.records.push_back(pool[idx]);
    }
  }
  SplitMix64 rng(recipe.shuffle_seed);
  Shuffle(out.records, rng);
  return out;
}

CuratedDataset CurateFromMetadata(const std::filesystem::path& metadata,
                                  const std::string& recipe_ref, uint64_t shuffle_seed,
                                  IngestStats* stats) {
  const auto builtin = BuiltinRecipeNames();
  if (std::find(builtin.begin(), builtin.end(), recipe_ref) != builtin.end()) {
    const auto wanted = BuiltinRecipeCategories(recipe_ref);
    const Pools pools = LoadPools(metadata, &wanted, {}, stats);
    std::map<std::string, std::size_t> sizes;
    for (const auto& cat : wanted) {
      auto it = pools.find(cat);
      sizes[cat] = it == pools.end() ? 0 : it->second.size();
    }
    return ComposeDataset(BuiltinRecipe(recipe_ref, sizes, shuffle_seed), pools);
  }
  DatasetRecipe recipe = ParseRecipe(
      !recipe_ref.empty() && recipe_ref.front() == '{' ? recipe_ref : ReadFile(recipe_ref));
  recipe.shuffle_seed = shuffle_seed;
  std::set<std::string> wanted;
  for (const auto& comp : recipe.components) wanted.insert(comp.source_category);
  const Pools pools = LoadPools(metadata, &wanted, {}, stats);
  return ComposeDataset(recipe, pools);
}

SplitSizes ComputeSplitSizes(std::size_t n) {
  SplitSizes s;
  s.train = n * 70 / 100;
  s.validation = n * 15 / 100;
  s.test = n - s.train - s.validation;
  return s;
}

CuratedDataset SplitTvt(const CuratedDataset& dataset, uint64_t seed) {
  const std::size_t n = dataset.records.size();
  const SplitSizes sizes = ComputeSplitSizes(n);
  if (sizes.train == 0 || sizes.validation == 0 || sizes.test == 0) {
    throw SplitError("cannot split " + std::to_string(n) +
                     " records into non-empty train/validation/test (sizes " +
                     std::to_string(sizes.train) + "/" +
                     std::to_string(sizes.validation) + "/" +
                     std::to_string(sizes.test) + ")");
  }
  CuratedDataset out;
  out.name = dataset.name;
  out.shuffle_seed = dataset.shuffle_seed;
  out.split_seed = seed;
  out.records.reserve(n);
  for (std::size_t idx : Permutation(n, seed)) out.records.push_back(dataset.records[idx]);
  out.split_assignment.reserve(n);
  out.split_assignment.insert(out.split_assignment.end(), sizes.train, Split::kTrain);
  out.split_assignment.insert(out.split_assignment.end(), sizes.validation,
                              Split::kValidation);
  out.split_assignment.insert(out.split_assignment.end(), sizes.test, Split::kTest);
  return out;
}

std::string AbstractToJsonLine(const AbstractRecord& record) { return ToJsonLine(record); }

AbstractRecord AbstractFromJsonLine(std::string_view line, std::size_t line_number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw FormatError("record is not an object", line_number);
  AbstractRecord r;
  try {
    r.arxiv_id = StringField(j, "id");
    r.primary_category = StringField(j, "primary_category");
    r.abstract = StringField(j, "abstract");
  } catch (const FormatError& e) {
    throw FormatError(e.what(), line_number);
  }
  if (r.arxiv_id.empty()) throw FormatError("missing 'id'", line_number);
  if (r.abstract.empty()) throw FormatError("missing 'abstract'", line_number);
  return r;
}

std::vector<AbstractRecord> ReadAbstracts(const std::filesystem::path& path) {
  std::vector<AbstractRecord> out;
  ForEachLine(path, [&](std::string_view line, std::size_t number) {
    if (Trim(line).empty()) return;
    out.push_back(AbstractFromJsonLine(line, number));
  });
  return out;
}

std::string DatasetDigest(const CuratedDataset& dataset) {
  std::string buf;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (!dataset.split_assignment.empty()) {
      buf += ToString(dataset.split_assignment[i]);
      buf += '\t';
    }
    buf += ToJsonLine(dataset.records[i]);
    buf += '\n';
  }
  return Sha256Hex(buf);
}

void WriteCuratedDataset(const CuratedDataset& dataset,
                         const std::filesystem::path& dir) {
  std::string body;
  for (const auto& r : dataset.records) {
    body += ToJsonLine(r);
    body += '\n';
  }
  WriteFile(dir / (dataset.name + ".jsonl"), body);
  json manifest = {{"name", dataset.name},
                   {"shuffle_seed", dataset.shuffle_seed},
                   {"records", dataset.records.size()},
                   {"digest", DatasetDigest(dataset)}};
  WriteFile(dir / (dataset.name + ".manifest.json"), manifest.dump(2) + "\n");
}

void WriteSplitDataset(const CuratedDataset& dataset,
                       const std::filesystem::path& dir) {
  if (dataset.split_assignment.size() != dataset.records.size()) {
    throw SplitError("dataset has not been split");
  }
  std::map<Split, std::string> bodies;
  std::map<Split, std::size_t> counts;
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    bodies[s];
    counts[s] = 0;
  }
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const Split s = dataset.split_assignment[i];
    bodies[s] += ToJsonLine(dataset.records[i]);
    bodies[s] += '\n';
    ++counts[s];
  }
  json files = json::object();
  for (const auto& [split, body] : bodies) {
    const std::string file = std::string(ToString(split)) + ".jsonl";
    WriteFile(dir / file, body);
    files[ToString(split)] = file;
  }
  json manifest = {
      {"name", dataset.name},
      {"shuffle_seed", dataset.shuffle_seed},
      {"split_seed", dataset.split_seed.value_or(0)},
      {"counts",
       {{"train", counts[Split::kTrain]},
        {"validation", counts[Split::kValidation]},
        {"test", counts[Split::kTest]},
        {"total", dataset.records.size()}}},
      {"digest", DatasetDigest(dataset)},
      {"files", files}};
  WriteFile(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace lmeval
