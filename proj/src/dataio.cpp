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

#include "leaf/dataio.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <string_view>

#include <nlohmann/json.hpp>

#include "leaf/binio.hpp"
#include "leaf/error.hpp"
#include "leaf/random.hpp"
#include "leaf/utf8.hpp"

namespace leaf {

namespace {

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

Sentence trim(const Sentence& s) {
  const auto first = s.find_first_not_of(U" \t\r\n");
  if (first == Sentence::npos) return {};
  const auto last = s.find_last_not_of(U" \t\r\n");
  return s.substr(first, last - first + 1);
}

constexpr std::array<std::string_view, 96> kTopicBank = {
    "anchor",  "harbor",  "vessel",  "sailor",  "voyage",  "tide",    "coral",   "reef",
    "planet",  "comet",   "orbit",   "rocket",  "galaxy",  "lunar",   "stellar", "nebula",
    "violin",  "melody",  "rhythm",  "chorus",  "tempo",   "lyric",   "piano",   "drummer",
    "goalie",  "stadium", "referee", "penalty", "striker", "league",  "trophy",  "match",
    "kernel",  "compile", "debug",   "server",  "binary",  "cache",   "module",  "syntax",
    "garden",  "tulip",   "orchid",  "blossom", "meadow",  "pollen",  "petal",   "fern",
    "bakery",  "pastry",  "butter",  "oven",    "dough",   "crust",   "sugar",   "yeast",
    "glacier", "summit",  "canyon",  "valley",  "ridge",   "alpine",  "boulder", "trail",
    "verdict", "lawyer",  "judge",   "appeal",  "statute", "jury",    "witness", "court",
    "market",  "profit",  "dividend", "broker", "equity",  "bond",    "ledger",  "asset",
    "vaccine", "clinic",  "nurse",   "therapy", "surgeon", "dose",    "patient", "fever",
    "castle",  "knight",  "throne",  "dragon",  "sword",   "quest",   "banner",  "moat",
};

constexpr std::array<std::string_view, 8> kFillers = {"the", "a",   "of",  "and",
                                                      "with", "in", "for", "on"};

}  // namespace

std::vector<TextRecord> load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<TextRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + "invalid JSON: " + e.what());
    }
    if (!obj.is_object()) throw FormatError(where + "expected a JSON object");
    const auto text = obj.find("text");
    if (text == obj.end() || !text->is_string()) {
      throw FormatError(where + "missing string field \"text\"");
    }
    TextRecord rec;
    rec.text = utf8::decode(text->get<std::string>());
    if (trim(rec.text).empty()) throw FormatError(where + "empty \"text\"");
    const auto label = obj.find("label");
    if (label != obj.end() && !label->is_null()) {
      if (!label->is_number_unsigned()) {
        throw FormatError(where + "\"label\" must be a non-negative integer");
      }
      rec.label = label->get<std::size_t>();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

void write_jsonl(const std::filesystem::path& path, std::span<const TextRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const auto& rec : records) {
    nlohmann::ordered_json obj;
    obj["text"] = utf8::encode(rec.text);
    if (rec.label) obj["label"] = *rec.label;
    out << obj.dump() << '\n';
  }
}

std::vector<Sentence> texts_of(std::span<const TextRecord> records) {
  std::vector<Sentence> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

Embedding EmbeddingStore::embedding(std::size_t i) const {
  const auto r = row(i);
  return Embedding(r.begin(), r.end());
}

EmbeddingStore EmbeddingStore::from_embeddings(std::span<const Embedding> embeddings) {
  EmbeddingStore store;
  store.count = embeddings.size();
  store.dim = embeddings.empty() ? 0 : embeddings.front().size();
  store.rows.reserve(store.count * store.dim);
  for (const auto& e : embeddings) {
    if (e.size() != store.dim) throw ConfigError("embeddings differ in dimension");
    for (double x : e) store.rows.push_back(static_cast<float>(x));
  }
  return store;
}

void write_store(const std::filesystem::path& path, const EmbeddingStore& store) {
  if (store.rows.size() != store.dim * store.count) {
    throw ConfigError("store payload does not match its dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  nlohmann::ordered_json header;
  header["dim"] = store.dim;
  header["count"] = store.count;
  out << header.dump() << '\n';
  binio::write_f32(out, store.rows);
  if (!out) throw ConfigError("failed writing " + path.string());
}

EmbeddingStore read_store(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  EmbeddingStore store;
  try {
    const auto header = nlohmann::json::parse(line);
    store.dim = header.at("dim").get<std::size_t>();
    store.count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": corrupt header: " + e.what());
  }
  store.rows.resize(store.dim * store.count);
  if (!binio::read_f32(in, store.rows)) {
    throw FormatError(path.string() + ": truncated payload (header declares " +
                      std::to_string(store.count) + " x " + std::to_string(store.dim) + ")");
  }
  if (!binio::at_end(in)) throw FormatError(path.string() + ": payload longer than header declares");
  for (float x : store.rows) {
    if (!std::isfinite(x)) throw FormatError(path.string() + ": non-finite value");
  }
  return store;
}

std::span<const std::string_view> topic_word_bank() { return kTopicBank; }
std::span<const std::string_view> filler_words() { return kFillers; }

std::vector<std::vector<std::string>> synth_topics(std::size_t classes, std::uint64_t seed) {
  constexpr std::size_t kPerClass = 8;
  if (classes < 2) throw ConfigError("synthetic corpus needs at least 2 classes");
  if (classes * kPerClass > kTopicBank.size()) {
    throw ConfigError("synthetic corpus supports at most " +
                      std::to_string(kTopicBank.size() / kPerClass) + " classes");
  }
  std::vector<std::string_view> bank(kTopicBank.begin(), kTopicBank.end());
  Rng rng = Rng::stream(seed, 0x746F70696373ULL);
  rng.shuffle(std::span<std::string_view>(bank));
  std::vector<std::vector<std::string>> topics(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t w = 0; w < kPerClass; ++w) topics[c].emplace_back(bank[c * kPerClass + w]);
  }
  return topics;
}

std::vector<Sentence> synth_anchor_texts(std::size_t classes, std::uint64_t seed) {
  std::vector<Sentence> out;
  for (const auto& words : synth_topics(classes, seed)) {
    std::string joined;
    for (const auto& w : words) {
      if (!joined.empty()) joined += ' ';
      joined += w;
    }
    out.push_back(utf8::decode(joined));
  }
  return out;
}

std::vector<TextRecord> synth_corpus(std::size_t classes, std::size_t per_class,
                                     std::uint64_t seed) {
  const auto topics = synth_topics(classes, seed);
  std::vector<TextRecord> records;
  records.reserve(classes * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    for (std::size_t c = 0; c < classes; ++c) {
      Rng rng = Rng::stream(seed, i * classes + c, 0x636F72707573ULL);
      std::vector<std::string_view> words;
      const std::size_t n_topic = 5 + rng.below(6);
      const std::size_t n_filler = rng.below(4);
      for (std::size_t w = 0; w < n_topic; ++w) words.push_back(topics[c][rng.below(topics[c].size())]);
      for (std::size_t w = 0; w < n_filler; ++w) words.push_back(kFillers[rng.below(kFillers.size())]);
      rng.shuffle(std::span<std::string_view>(words));
      std::string text;
      for (auto w : words) {
        if (!text.empty()) text += ' ';
        text += w;
      }
      records.push_back({utf8::decode(text), c});
    }
  }
  return records;
}

}  // namespace leaf
