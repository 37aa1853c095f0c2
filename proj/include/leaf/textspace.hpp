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

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace leaf {

// A sentence is a sequence of Unicode scalar values. Positions always index
// scalar values, never UTF-8 bytes.
using Sentence = std::u32string;

// The character set an attacker may draw from, together with the expansion
// placeholder (xi). The placeholder never belongs to the set itself.
class Alphabet {
 public:
  // Private-use scalar; never produced by ordinary text.
  static constexpr char32_t kDefaultXi = U'\uE000';

  explicit Alphabet(std::u32string chars, char32_t xi = kDefaultXi);

  // Lowercase latin letters, space, '.', ',' and '?': 30 characters.
  static Alphabet standard();

  // One character per line, first line holds xi.
  static Alphabet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::u32string& chars() const { return chars_; }
  char32_t xi() const { return xi_; }
  std::size_t size() const { return chars_.size(); }

  bool contains(char32_t c) const { return index_of(c).has_value(); }
  std::optional<std::size_t> index_of(char32_t c) const;

  // Characters an edit may write: the alphabet, plus xi when deletions are
  // part of the edit space.
  std::u32string edit_pool(bool include_deletion) const;

 private:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  std::u32string chars_;
  char32_t xi_;
  std::array<std::size_t, 128> ascii_index_;
  std::unordered_map<char32_t, std::size_t> other_index_;
};

// A sentence over the alphabet plus xi.
struct ExpandedSentence {
  std::u32string chars;
  char32_t xi = Alphabet::kDefaultXi;

  std::size_t size() const { return chars.size(); }
  bool operator==(const ExpandedSentence&) const = default;
};

// Interleaves xi around every character: "ab" -> "xi a xi b xi".
ExpandedSentence expand(std::u32string_view s, char32_t xi = Alphabet::kDefaultXi);

// Drops every xi.
Sentence contract(const ExpandedSentence& e);

// Throws std::out_of_range when i >= |e|.
ExpandedSentence replace_at(ExpandedSentence e, std::size_t i, char32_t c);

// contract(replace_at(expand(s), pos, c)). Even positions insert, odd
// positions substitute, and writing xi deletes.
Sentence apply_edit(std::u32string_view s, std::size_t pos, char32_t c,
                    char32_t xi = Alphabet::kDefaultXi);

inline std::size_t expanded_size(std::u32string_view s) { return 2 * s.size() + 1; }

// Unit-cost edit distance.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);

// Every distinct sentence one edit away from s (s itself excluded), in order of
// first appearance when scanning positions then edit_pool(true).
std::vector<Sentence> enumerate_edits(std::u32string_view s, const Alphabet& alphabet);

}  // namespace leaf
