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

#include "lmeval/protocol.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <regex>

#include "lmeval/error.h"
#include "lmeval/rng.h"
#include "lmeval/text.h"
#include "test_util.h"

namespace lmeval {
namespace {

using ::testing::ElementsAre;

AbstractRecord Rec(std::string text) { return {"id", "hep-th", std::move(text)}; }

// Independent sentence counter: boundaries via regex.
std::size_t OracleSentenceCount(const std::string& text) {
  static const std::regex kBoundary(R"([.!?]\s+\S)");
  const auto begin = std::sregex_iterator(text.begin(), text.end(), kBoundary);
  return 1 + static_cast<std::size_t>(std::distance(begin, std::sregex_iterator()));
}

std::string Sentence(SplitMix64& rng) {
  static const char* kWords[] = {"field", "brane", "We", "show", "X=1", "$N=2$", "the",
                                 "dual", "S.", "e.g.", "a", "theory"};
  static const char* kEnds[] = {".", "!", "?"};
  std::string s = "Result";
  const int n = 1 + static_cast<int>(rng.Below(8));
  for (int i = 0; i < n; ++i) s += std::string(" ") + kWords[rng.Below(12)];
  return s + kEnds[rng.Below(3)];
}

TEST(SegmentSentencesTest, TwoSentences) {
  EXPECT_THAT(SegmentSentences("We prove X. We test Y."),
              ElementsAre("We prove X.", "We test Y."));
}

TEST(SegmentSentencesTest, BreaksAfterInitial) {
  EXPECT_THAT(SegmentSentences("This was written with S. Chaudhuri and C. Johnson."),
              ElementsAre("This was written with S.", "Chaudhuri and C.", "Johnson."));
}

TEST(SegmentSentencesTest, StrictModeStillBreaksBeforeCapital) {
  SegmenterOptions strict{true};
  EXPECT_THAT(SegmentSentences("Fix e.g. this case. Then stop.", strict),
              ElementsAre("Fix e.g. this case.", "Then stop."));
}

TEST(SegmentSentencesTest, NoTerminalPunctuationIsOneSegment) {
  EXPECT_THAT(SegmentSentences("No terminal punctuation here"),
              ElementsAre("No terminal punctuation here"));
}

TEST(SegmentSentencesTest, MixedTerminators) {
  EXPECT_THAT(SegmentSentences("Is it? Yes! Done."), ElementsAre("Is it?", "Yes!", "Done."));
  EXPECT_THAT(SegmentSentences("Value 3.14 holds."), ElementsAre("Value 3.14 holds."));
}

TEST(SegmentSentencesTest, EmptyTextThrows) {
  EXPECT_THROW(SegmentSentences(""), ProtocolError);
  EXPECT_THROW(SegmentSentences("   "), ProtocolError);
}

TEST(MakePromptPairTest, FiveSentencesGiveThreeInPrompt) {
  const PromptPair p = MakePromptPair(Rec("A one. B two. C three. D four. E five."));
  EXPECT_EQ(p.n_units, 5u);
  EXPECT_EQ(p.split_index, 3u);
  EXPECT_EQ(p.unit_kind, UnitKind::kSentence);
  EXPECT_EQ(p.prompt, "A one. B two. C three.");
  EXPECT_EQ(p.ground_truth, "D four. E five.");
}

TEST(MakePromptPairTest, FourSentencesGiveTwoInPrompt) {
  const PromptPair p = MakePromptPair(Rec("A. B. C. D."));
  EXPECT_EQ(p.split_index, 2u);
  EXPECT_EQ(p.prompt, "A. B.");
  EXPECT_EQ(p.ground_truth, "C. D.");
}

TEST(MakePromptPairTest, SingleSentenceFallsBackToWords) {
  const PromptPair p = MakePromptPair(Rec("one two three four five six seven eight nine ten"));
  EXPECT_EQ(p.unit_kind, UnitKind::kWord);
  EXPECT_EQ(p.n_units, 10u);
  EXPECT_EQ(p.split_index, 5u);
  EXPECT_EQ(p.prompt, "one two three four five");
  EXPECT_EQ(p.ground_truth, "six seven eight nine ten");
}

TEST(MakePromptPairTest, SingleWordThrows) {
  EXPECT_THROW(MakePromptPair(Rec("Lonely.")), ProtocolError);
  EXPECT_THROW(MakePromptPair(Rec("")), ProtocolError);
}

TEST(MakePromptPairTest, ReconstructionAndHalvingOverRandomAbstracts) {
  SplitMix64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    std::string abstract;
    const int n = 1 + static_cast<int>(rng.Below(9));
    for (int k = 0; k < n; ++k) abstract += (k ? " " : "") + Sentence(rng);
    const AbstractRecord rec{"id" + std::to_string(i), "hep-th", abstract};
    const PromptPair p = MakePromptPair(rec);
    ASSERT_FALSE(p.prompt.empty());
    ASSERT_FALSE(p.ground_truth.empty());
    ASSERT_EQ(NormalizeWhitespace(p.prompt + " " + p.ground_truth), NormalizeWhitespace(abstract));
    ASSERT_GE(p.split_index, p.n_units - p.split_index);
    ASSERT_EQ(p.split_index, (p.n_units + 1) / 2);
    if (p.unit_kind == UnitKind::kSentence) {
      ASSERT_EQ(p.n_units, OracleSentenceCount(abstract)) << abstract;
    } else {
      ASSERT_EQ(OracleSentenceCount(abstract), 1u);
      ASSERT_EQ(p.n_units, SplitWhitespace(abstract).size());
    }
    ASSERT_EQ(MakePromptPair(rec), p);
  }
}

TEST(PromptPairIoTest, RoundTrip) {
  const auto dir = ScratchDir("pairs");
  std::vector<PromptPair> pairs = {MakePromptPair(Rec("A b. C d. E f.")),
                                   MakePromptPair(Rec("one two three"))};
  pairs[1].arxiv_id = "other";
  WritePromptPairs(pairs, dir / "pairs.jsonl");
  EXPECT_EQ(ReadPromptPairs(dir / "pairs.jsonl"), pairs);
  EXPECT_THROW(PromptPairFromJsonLine(R"({"id":"x"})", 4), FormatError);
}

}  // namespace
}  // namespace lmeval
