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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "leaf/encoder.hpp"
#include "leaf/lexicon.hpp"
#include "leaf/textspace.hpp"

namespace leaf {

// What an attacker maximizes over candidate sentences.
class AttackObjective {
 public:
  enum class Kind { kEmbedDistance, kNegSelfSimilarity, kTargetSimilarity, kClassificationCE };

  // |ref - f(s')|^2
  static AttackObjective embed_distance(Embedding ref);
  // -sim(ref, f(s'))
  static AttackObjective neg_self_similarity(Embedding ref);
  // sim(f(s'), target)
  static AttackObjective target_similarity(Embedding target);
  // Cross-entropy of softmax(logit_scale * [sim(f(s'), anchor_j)]_j) at true_label.
  static AttackObjective classification_ce(std::vector<Embedding> anchors, std::size_t true_label,
                                           double logit_scale = 100.0);

  // Higher is better for the attacker. Similarity-based objectives return
  // -infinity when the similarity is undefined (zero-norm embedding).
  double score(const Embedding& embedding) const;

  Kind kind() const { return kind_; }
  std::string_view name() const;

 private:
  AttackObjective(Kind kind, std::vector<Embedding> refs, std::size_t label, double scale)
      : kind_(kind), refs_(std::move(refs)), label_(label), logit_scale_(scale) {}

  Kind kind_;
  std::vector<Embedding> refs_;
  std::size_t label_ = 0;
  double logit_scale_ = 100.0;
};

struct AttackConfig {
  std::size_t k = 1;             // Levenshtein radius
  std::size_t rho = 20;          // candidates per sentence per stage (LEAF)
  char32_t test_char = U' ';
  bool constrained = false;
  bool include_deletion = true;  // xi is part of the sampled character pool
  std::uint64_t seed = 0;
  std::size_t charmer_n = 20;
  std::size_t budget = 5'000'000;  // brute-force candidate cap
};

// One scoring stage of an attack.
struct StageRecord {
  std::string stage;  // "position", "character" or "exhaustive"
  std::size_t candidates_scored = 0;
  double best_score = 0.0;
};

struct AttackResult {
  Sentence input;
  Sentence output;
  // Score of `output`; empty when the attack never scored anything (k = 0).
  std::optional<double> score;
  std::vector<StageRecord> stages;
  // Accepted sentence after each distance step, starting with the input.
  std::vector<Sentence> path;
  // reverted[t]: step t accepted a candidate that had been reset to its
  // predecessor by the semantic constraint.
  std::vector<bool> reverted;
};

// Batched attack with a fixed 2 * rho candidate budget per sentence per step:
// rho sampled positions probed with the test character, then rho sampled
// characters probed at the best position. Random streams depend on
// (seed, first_index + i, step) only, so results do not depend on how a
// dataset is split into batches.
std::vector<AttackResult> leaf_attack(const TextEncoder& encoder, std::span<const Sentence> batch,
                                      std::span<const AttackObjective> objectives,
                                      const Alphabet& alphabet, const AttackConfig& cfg,
                                      const Lexicon* lexicon = nullptr,
                                      std::uint64_t first_index = 0);

// LEAF with rho = 1.
std::vector<AttackResult> random_attack(const TextEncoder& encoder,
                                        std::span<const Sentence> batch,
                                        std::span<const AttackObjective> objectives,
                                        const Alphabet& alphabet, AttackConfig cfg,
                                        const Lexicon* lexicon = nullptr,
                                        std::uint64_t first_index = 0);

// Probes every position with the test character, keeps the best n, then tries
// every pool character at those n positions.
AttackResult charmer_attack(const TextEncoder& encoder, const Sentence& s,
                            const AttackObjective& objective, const Alphabet& alphabet,
                            const AttackConfig& cfg, const Lexicon* lexicon = nullptr);

// Exact maximizer over the radius-k ball (chained-valid sentences only when
// constrained). Throws BudgetError past cfg.budget candidates.
AttackResult bruteforce_attack(const TextEncoder& encoder, const Sentence& s,
                               const AttackObjective& objective, const Alphabet& alphabet,
                               const AttackConfig& cfg, const Lexicon* lexicon = nullptr);

struct EncoderCallCount {
  std::size_t batched_calls = 0;
  std::size_t candidates_scored = 0;
  std::vector<std::size_t> batch_sizes;
};

// Runs `attack` against a counting wrapper of `encoder`.
EncoderCallCount count_encoder_calls(const TextEncoder& encoder,
                                     const std::function<void(const TextEncoder&)>& attack);

enum class AttackKind { kLeaf, kCharmer, kBruteforce };
AttackKind parse_attack_kind(std::string_view name);
std::string_view attack_kind_name(AttackKind kind);

// Runs any attack kind over a list of sentences.
std::vector<AttackResult> run_attack(AttackKind kind, const TextEncoder& encoder,
                                     std::span<const Sentence> batch,
                                     std::span<const AttackObjective> objectives,
                                     const Alphabet& alphabet, const AttackConfig& cfg,
                                     const Lexicon* lexicon = nullptr);

// {input, output, distance, steps, objective_kind, seed}
nlohmann::ordered_json attack_report(const AttackResult& result, std::string_view objective_kind,
                                     std::uint64_t seed);

}  // namespace leaf
