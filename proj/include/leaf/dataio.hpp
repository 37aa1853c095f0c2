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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaf/encoder.hpp"
#include "leaf/textspace.hpp"

namespace leaf {

struct TextRecord {
  Sentence text;
  std::optional<std::size_t> label;

  bool operator==(const TextRecord&) const = default;
};

// One JSON object per line with "text" and optional "label". Blank lines are
// skipped; anything else malformed throws FormatError naming the line.
std::vector<TextRecord> load_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, std::span<const TextRecord> records);

std::vector<Sentence> texts_of(std::span<const TextRecord> records);

// Row-major count x dim matrix of binary32 values.
struct EmbeddingStore {
  std::size_t dim = 0;
  std::size_t count = 0;
  std::vector<float> rows;

  std::span<const float> row(std::size_t i) const { return {rows.data() + i * dim, dim}; }
  Embedding embedding(std::size_t i) const;

  static EmbeddingStore from_embeddings(std::span<const Embedding> embeddings);
};

// Header line {"dim":h,"count":n} then n*h little-endian binary32 values.
void write_store(const std::filesystem::path& path, const EmbeddingStore& store);
EmbeddingStore read_store(const std::filesystem::path& path);

// Fixed bank the synthetic topic words are drawn from.
std::span<const std::string_view> topic_word_bank();
std::span<const std::string_view> filler_words();

// Eight disjoint topic words per class.
std::vector<std::vector<std::string>> synth_topics(std::size_t classes, std::uint64_t seed);

// Space-joined topic words of each class; encoded, these serve as class anchors.
std::vector<Sentence> synth_anchor_texts(std::size_t classes, std::uint64_t seed);

// Each text: 5-10 topic words of its class plus 0-3 shared fillers, shuffled.
// Records are interleaved by class: record i has label i % classes.
std::vector<TextRecord> synth_corpus(std::size_t classes, std::size_t per_class,
                                     std::uint64_t seed);

}  // namespace leaf
