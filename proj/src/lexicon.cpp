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

#include <fstream>
#include <iostream>
#include <locale>

#include "leaf/error.hpp"
#include "leaf/utf8.hpp"

namespace leaf {

namespace {

const std::ctype<wchar_t>* unicode_ctype() {
  static const std::ctype<wchar_t>* facet = []() -> const std::ctype<wchar_t>* {
    static_assert(sizeof(wchar_t) == 4, "wchar_t must hold a Unicode scalar value");
    try {
      static const std::locale loc("C.UTF-8");
      return &std::use_facet<std::ctype<wchar_t>>(loc);
    } catch (const std::runtime_error&) {
      return nullptr;
    }
  }();
  return facet;
}

}  // namespace

bool is_alphabetic(char32_t c) {
  if (c < 128) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
  const auto* facet = unicode_ctype();
  return facet != nullptr && facet->is(std::ctype_base::alpha, static_cast<wchar_t>(c));
}

char32_t to_lower(char32_t c) {
  if (c < 128) return (c >= U'A' && c <= U'Z') ? c + (U'a' - U'A') : c;
  const auto* facet = unicode_ctype();
  if (facet == nullptr) return c;
  return static_cast<char32_t>(facet->tolower(static_cast<wchar_t>(c)));
}

std::vector<Sentence> extract_words(std::u32string_view s) {
  std::vector<Sentence> words;
  Sentence current;
  for (char32_t c : s) {
    if (is_alphabetic(c)) {
      current.push_back(to_lower(c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

Lexicon::Lexicon(const std::vector<std::string>& words) {
  for (const auto& w : words) add(w);
}

Lexicon::Lexicon(std::initializer_list<std::string_view> words) {
  for (auto w : words) add(w);
}

void Lexicon::add(std::string_view utf8_word) {
  Sentence word = utf8::decode(utf8_word);
  if (word.empty()) return;
  for (char32_t& c : word) {
    if (!is_alphabetic(c)) return;
    c = to_lower(c);
  }
  words_.insert(std::move(word));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open lexicon " + path.string());
  Lexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    lex.add(line);
  }
  if (lex.empty()) std::cerr << "warning: lexicon " << path.string() << " is empty\n";
  return lex;
}

std::size_t count_words(std::u32string_view s, const Lexicon& lexicon) {
  std::size_t n = 0;
  for (const auto& w : extract_words(s)) {
    if (lexicon.contains(w)) ++n;
  }
  return n;
}

bool valid(std::u32string_view original, std::u32string_view perturbed, const Lexicon& lexicon) {
  return count_words(original, lexicon) > count_words(perturbed, lexicon);
}

}  // namespace leaf
