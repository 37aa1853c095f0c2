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

#pragma once

#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "leaf/textspace.hpp"

namespace leaf {

// Lowercases a scalar value using the C.UTF-8 classification tables.
char32_t to_lower(char32_t c);
bool is_alphabetic(char32_t c);

// Maximal runs of alphabetic characters, lowercased.
std::vector<Sentence> extract_words(std::u32string_view s);

// A set of dictionary words used to reject perturbations that create words.
class Lexicon {
 public:
  Lexicon() = default;
  // Entries are lowercased; empty and non-alphabetic entries are dropped.
  explicit Lexicon(const std::vector<std::string>& words);
  Lexicon(std::initializer_list<std::string_view> words);

  // UTF-8, one word per line, '#' comment lines ignored. An empty result is
  // reported on stderr but is not an error.
  static Lexicon load(const std::filesystem::path& path);

  bool contains(std::u32string_view word) const { return words_.count(Sentence(word)) != 0; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

 private:
  void add(std::string_view utf8_word);

  std::unordered_set<Sentence> words_;
};

// Number of tokens of s (with multiplicity) that are dictionary words.
std::size_t count_words(std::u32string_view s, const Lexicon& lexicon);

// A perturbation is admissible only if it strictly lowers the dictionary word
// count, so no edit can introduce or preserve a word.
bool valid(std::u32string_view original, std::u32string_view perturbed, const Lexicon& lexicon);

}  // namespace leaf
