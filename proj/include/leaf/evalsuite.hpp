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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "leaf/attacks.hpp"
#include "leaf/encoder.hpp"
#include "leaf/lexicon.hpp"
#include "leaf/textspace.hpp"

namespace leaf {

// Class anchors for zero-shot prediction.
struct AnchorSet {
  std::vector<std::string> labels;
  std::vector<Embedding> anchors;

  // At least two anchors, equal dimensions, all nonzero.
  void validate() const;
  std::size_t size() const { return anchors.size(); }
};

// Highest-cosine anchor, ties to the lowest index. Throws ConfigError when the
// embedding has zero norm.
std::size_t predict_from_embedding(const Embedding& embedding, const AnchorSet& anchors);
std::size_t zero_shot_predict(const TextEncoder& encoder, const Sentence& s,
                              const AnchorSet& anchors);

struct LabeledSentence {
  Sentence text;
  std::size_t label = 0;
};

struct ZeroShotSample {
  std::size_t label = 0;
  std::size_t clean_prediction = 0;
  std::size_t adversarial_prediction = 0;
  Sentence adversarial_text;
};

struct ZeroShotReport {
  double clean_accuracy = 0.0;
  double adversarial_accuracy = 0.0;
  std::vector<ZeroShotSample> samples;
};

// Clean accuracy, and accuracy after attacking each correctly classified
// sample with the classification cross-entropy objective. A sample is broken
// when any sentence on its attack path is misclassified. Misclassified
// samples count as non-robust without being attacked.
ZeroShotReport evaluate_zero_shot(std::span<const LabeledSentence> dataset,
                                  const TextEncoder& encoder, const AnchorSet& anchors,
                                  AttackKind attack, const AttackConfig& cfg,
                                  const Alphabet& alphabet, const Lexicon* lexicon = nullptr,
                                  double logit_scale = 100.0);

double adversarial_accuracy(std::span<const LabeledSentence> dataset, const TextEncoder& encoder,
                            const AnchorSet& anchors, AttackKind attack, const AttackConfig& cfg,
                            const Alphabet& alphabet, const Lexicon* lexicon = nullptr,
                            double logit_scale = 100.0);

// Gallery of items; query i is paired with item `pairing[i]`.
struct RetrievalGallery {
  std::vector<std::string> ids;
  std::vector<Embedding> items;
  std::vector<std::string> pairing;

  void validate() const;
  std::size_t index_of(const std::string& id) const;
};

// Fraction of queries whose paired item is among the k most similar items.
// Items tied with the paired item count ahead of it when their index is lower.
double recall_at_k(std::span<const Embedding> query_embeddings, const RetrievalGallery& gallery,
                   std::size_t k);
double recall_at_k(std::span<const Sentence> queries, const TextEncoder& encoder,
                   const RetrievalGallery& gallery, std::size_t k);

// Pushes `query` toward the embedding of `target_text`.
AttackResult retrieval_attack(const Sentence& query, const Sentence& target_text,
                              const TextEncoder& encoder, const Alphabet& alphabet,
                              AttackKind attack, const AttackConfig& cfg,
                              const Lexicon* lexicon = nullptr);

struct InversionConfig {
  std::size_t steps = 400;
  std::size_t restarts = 4;
  std::uint64_t seed = 0;
  std::size_t max_length = 64;
  // Candidates per step; 0 evaluates every single edit.
  std::size_t rho = 0;
  // Starting sentence of the first restart instead of a random one.
  std::optional<Sentence> init;
};

struct InversionResult {
  Sentence sentence;
  double similarity = 0.0;
  // Similarity after each accepted move, per restart (first entry is the start).
  std::vector<std::vector<double>> traces;
};

// Discrete hill climb on cosine similarity to `target` over single edits.
InversionResult invert_embedding(const Embedding& target, const TextEncoder& encoder,
                                 const Alphabet& alphabet, const InversionConfig& cfg);

double word_recall(std::u32string_view reference, std::u32string_view hypothesis);
// Over character 3-grams.
double token_recall(std::u32string_view reference, std::u32string_view hypothesis);

inline constexpr double kBleuFloor = 1e-9;

// Single-reference word BLEU. The order is capped at the reference length so
// that short identical sentences score 1; zero precisions take kBleuFloor.
double bleu(std::u32string_view reference, std::u32string_view hypothesis,
            std::size_t max_n = 4);

std::vector<Sentence> split_words(std::u32string_view s);

}  // namespace leaf
