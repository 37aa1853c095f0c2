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

#include "leaf/textspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "leaf/error.hpp"
#include "leaf/utf8.hpp"

namespace leaf {

Alphabet::Alphabet(std::u32string chars, char32_t xi) : chars_(std::move(chars)), xi_(xi) {
  if (chars_.empty()) throw ConfigError("alphabet must not be empty");
  ascii_index_.fill(kNoIndex);
  for (std::size_t i = 0; i < chars_.size(); ++i) {
    const char32_t c = chars_[i];
    if (c == xi_) throw ConfigError("alphabet contains its own placeholder character");
    if (index_of(c)) throw ConfigError("alphabet contains duplicate character U+" +
                                       std::to_string(static_cast<unsigned>(c)));
    if (c < 128) {
      ascii_index_[c] = i;
    } else {
      other_index_.emplace(c, i);
    }
  }
}

Alphabet Alphabet::standard() { return Alphabet(U"abcdefghijklmnopqrstuvwxyz .,?"); }

std::optional<std::size_t> Alphabet::index_of(char32_t c) const {
  if (c < 128) {
    const std::size_t i = ascii_index_[c];
    if (i == kNoIndex) return std::nullopt;
    return i;
  }
  const auto it = other_index_.find(c);
  if (it == other_index_.end()) return std::nullopt;
  return it->second;
}

std::u32string Alphabet::edit_pool(bool include_deletion) const {
  std::u32string pool = chars_;
  if (include_deletion) pool.push_back(xi_);
  return pool;
}

Alphabet Alphabet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open alphabet file " + path.string());
  std::string line;
  std::optional<char32_t> xi;
  std::u32string chars;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::u32string decoded = utf8::decode(line);
    if (decoded.empty()) {
      if (!xi) throw FormatError(path.string() + ":1: first line must hold the placeholder");
      continue;
    }
    if (decoded.size() != 1) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected exactly one character per line");
    }
    if (!xi) {
      xi = decoded[0];
    } else {
      chars.push_back(decoded[0]);
    }
  }
  if (!xi) throw FormatError(path.string() + ": empty alphabet file");
  return Alphabet(std::move(chars), *xi);
}

void Alphabet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write alphabet file " + path.string());
  out << utf8::encode(xi_) << '\n';
  for (char32_t c : chars_) out << utf8::encode(c) << '\n';
}

ExpandedSentence expand(std::u32string_view s, char32_t xi) {
  ExpandedSentence e{std::u32string(expanded_size(s), xi), xi};
  for (std::size_t i = 0; i < s.size(); ++i) e.chars[2 * i + 1] = s[i];
  return e;
}

Sentence contract(const ExpandedSentence& e) {
  Sentence out;
  out.reserve(e.chars.size() / 2);
  for (char32_t c : e.chars) {
    if (c != e.xi) out.push_back(c);
  }
  return out;
}

ExpandedSentence replace_at(ExpandedSentence e, std::size_t i, char32_t c) {
  if (i >= e.chars.size()) {
    throw std::out_of_range("replacement index " + std::to_string(i) +
                            " outside expanded sentence of length " +
                            std::to_string(e.chars.size()));
  }
  e.chars[i] = c;
  return e;
}

Sentence apply_edit(std::u32string_view s, std::size_t pos, char32_t c, char32_t xi) {
  const std::size_t slots = expanded_size(s);
  if (pos >= slots) {
    throw std::out_of_range("edit position " + std::to_string(pos) + " outside [0, " +
                            std::to_string(slots) + ")");
  }
  // Same result as contract(replace_at(expand(s), pos, c)) without building
  // the expansion.
  Sentence out;
  out.reserve(s.size() + 1);
  const std::size_t split = pos / 2;
  out.append(s.substr(0, split));
  if (pos % 2 == 0) {
    if (c != xi) out.push_back(c);
    out.append(s.substr(split));
  } else {
    if (c != xi) out.push_back(c);
    out.append(s.substr(split + 1));
  }
  return out;
}

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diagonal = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t above = row[j];
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diagonal + cost});
      diagonal = above;
    }
  }
  return row[b.size()];
}

std::vector<Sentence> enumerate_edits(std::u32string_view s, const Alphabet& alphabet) {
  const std::u32string pool = alphabet.edit_pool(true);
  const std::size_t slots = expanded_size(s);
  std::vector<Sentence> out;
  std::unordered_set<Sentence> seen;
  seen.insert(Sentence(s));
  for (std::size_t pos = 0; pos < slots; ++pos) {
    for (char32_t c : pool) {
      Sentence candidate = apply_edit(s, pos, c, alphabet.xi());
      if (seen.insert(candidate).second) out.push_back(std::move(candidate));
    }
  }
  return out;
}

}  // namespace leaf
