// Copyright 2026 The leafkit Authors. All Rights Reserved.
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

#include "leaf/lexicon.hpp"

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "leaf/error.hpp"
#include "leaf/utf8.hpp"
#include "test_util.hpp"

namespace leaf {
namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path, std::ios::binary) << contents;
  return path;
}

TEST(LexiconTest, LoadLowercasesAndDeduplicates) {
  const auto path = write_temp("leaf_lex1.txt", "Bear\nbeer\n# comment\n\nBEAR\n");
  const Lexicon lex = Lexicon::load(path);
  EXPECT_EQ(lex.size(), 2u);
  EXPECT_TRUE(lex.contains(U"bear"));
  EXPECT_TRUE(lex.contains(U"beer"));
  std::filesystem::remove(path);

  const auto dup = write_temp("leaf_lex2.txt", "a\na\n");
  EXPECT_EQ(Lexicon::load(dup).size(), 1u);
  std::filesystem::remove(dup);
}

TEST(LexiconTest, EmptyFileIsAWarningNotAnError) {
  const auto path = write_temp("leaf_lex3.txt", "");
  ::testing::internal::CaptureStderr();
  const Lexicon lex = Lexicon::load(path);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_TRUE(lex.empty());
  EXPECT_NE(err.find("empty"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(LexiconTest, MissingFileThrows) {
  EXPECT_THROW(Lexicon::load("/nonexistent/leaf/words.txt"), ConfigError);
}

TEST(LexiconTest, DropsNonAlphabeticEntries) {
  const Lexicon lex{"ok", "no1", "", "x-y", "Über"};
  EXPECT_EQ(lex.size(), 2u);
  EXPECT_TRUE(lex.contains(U"über"));
}

TEST(CountWordsTest, Examples) {
  const Lexicon lex{"a", "big", "bear"};
  EXPECT_EQ(count_words(U"A big bear", lex), 3u);
  EXPECT_EQ(count_words(U"gri?zly bear", lex), 1u);
  EXPECT_EQ(count_words(U"", lex), 0u);
  EXPECT_EQ(count_words(U"bear bear, BEAR!", lex), 3u);
}

TEST(CountWordsTest, TokenizesOnNonAlphabeticRuns) {
  EXPECT_EQ(extract_words(U"It's 2 big-bears"),
            (std::vector<Sentence>{U"it", U"s", U"big", U"bears"}));
  EXPECT_EQ(extract_words(U"ÉCOLE été"), (std::vector<Sentence>{U"école", U"été"}));
}

TEST(ValidTest, Examples) {
  const Lexicon lex{"a", "grizzly", "bear", "beer"};
  EXPECT_TRUE(valid(U"a grizzly bear", U"a gri?zly bear", lex));
  EXPECT_FALSE(valid(U"a grizzly bear", U"a grizzly beer", lex));
  EXPECT_FALSE(valid(U"a grizzly bear", U"a grizzly bear", lex));
}

TEST(ValidTest, ZeroWordSentencesCanNeverBePerturbed) {
  const Lexicon lex{"bear"};
  EXPECT_FALSE(valid(U"xq zz", U"xq z", lex));
}

TEST(LexiconProperty, IrreflexiveMonotoneAndCaseInvariant) {
  const Lexicon lex{"ab", "ba", "a", "abc", "cab"};
  Rng rng(3);
  for (int trial = 0; trial < 3000; ++trial) {
    const Sentence s = testing::random_sentence(rng, U"abcAB ", 12);
    const Sentence t = testing::random_sentence(rng, U"abcAB ", 12);
    ASSERT_FALSE(valid(s, s, lex));
    if (valid(s, t, lex)) {
      ASSERT_LT(count_words(t, lex), count_words(s, lex));
    }
    Sentence upper = s;
    for (auto& c : upper) {
      if (c >= U'a' && c <= U'z') c -= 32;
    }
    ASSERT_EQ(count_words(upper, lex), count_words(s, lex));
  }
}

TEST(LexiconTest, ShippedWordListLoads) {
  const Lexicon lex = Lexicon::load(LEAF_ASSET_DIR "/english_words.txt");
  EXPECT_GT(lex.size(), 50000u);
  EXPECT_TRUE(lex.contains(U"bear"));
  EXPECT_TRUE(lex.contains(U"grizzly"));
  EXPECT_FALSE(lex.contains(U"gri"));
  EXPECT_FALSE(lex.contains(U"zly"));
  EXPECT_TRUE(valid(U"a big burly grizzly bear", U"a big burly griHzly bear", lex));
}

}  // namespace
}  // namespace leaf
