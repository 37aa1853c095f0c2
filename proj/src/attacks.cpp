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

#include "leaf/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "leaf/error.hpp"
#include "leaf/random.hpp"
#include "leaf/utf8.hpp"

namespace leaf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double similarity_or_nan(const Embedding& a, const Embedding& b) {
  const auto sim = cosine_sim(a, b);
  return sim ? *sim : std::numeric_limits<double>::quiet_NaN();
}

// Index of the largest score; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

std::vector<double> score_all(const TextEncoder& encoder, std::span<const Sentence> candidates,
                              const AttackObjective& objective) {
  const auto embeddings = encoder.encode_batch(candidates);
  std::vector<double> scores(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) scores[i] = objective.score(embeddings[i]);
  return scores;
}

void check_common(const AttackConfig& cfg, const Lexicon* lexicon) {
  if (cfg.constrained && lexicon == nullptr) {
    throw ConfigError("constrained attacks need a lexicon");
  }
}

// Candidate after the semantic gate: constraint-invalid edits revert to the
// current sentence.
struct Gated {
  Sentence sentence;
  bool reverted = false;
};

Gated gate(const Sentence& current, Sentence candidate, const AttackConfig& cfg,
           const Lexicon* lexicon) {
  if (cfg.constrained && !valid(current, candidate, *lexicon)) return {current, true};
  return {std::move(candidate), false};
}

}  // namespace

// ---------------------------------------------------------------------------
// Objectives

AttackObjective AttackObjective::embed_distance(Embedding ref) {
  return AttackObjective(Kind::kEmbedDistance, {std::move(ref)}, 0, 0.0);
}

AttackObjective AttackObjective::neg_self_similarity(Embedding ref) {
  return AttackObjective(Kind::kNegSelfSimilarity, {std::move(ref)}, 0, 0.0);
}

AttackObjective AttackObjective::target_similarity(Embedding target) {
  return AttackObjective(Kind::kTargetSimilarity, {std::move(target)}, 0, 0.0);
}

AttackObjective AttackObjective::classification_ce(std::vector<Embedding> anchors,
                                                   std::size_t true_label, double logit_scale) {
  if (anchors.size() < 2) throw ConfigError("classification objective needs at least 2 anchors");
  if (true_label >= anchors.size()) throw ConfigError("true label outside the anchor set");
  return AttackObjective(Kind::kClassificationCE, std::move(anchors), true_label, logit_scale);
}

std::string_view AttackObjective::name() const {
  switch (kind_) {
    case Kind::kEmbedDistance: return "embed-dist";
    case Kind::kNegSelfSimilarity: return "neg-sim";
    case Kind::kTargetSimilarity: return "target-sim";
    case Kind::kClassificationCE: return "class-ce";
  }
  return "unknown";
}

double AttackObjective::score(const Embedding& e) const {
  switch (kind_) {
    case Kind::kEmbedDistance: {
      const Embedding& ref = refs_.front();
      double sq = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const double diff = ref[i] - e[i];
        sq += diff * diff;
      }
      return sq;
    }
    case Kind::kNegSelfSimilarity: {
      const double sim = similarity_or_nan(refs_.front(), e);
      return std::isnan(sim) ? kNegInf : -sim;
    }
    case Kind::kTargetSimilarity: {
      const double sim = similarity_or_nan(e, refs_.front());
      return std::isnan(sim) ? kNegInf : sim;
    }
    case Kind::kClassificationCE: {
      std::vector<double> logits(refs_.size());
      for (std::size_t j = 0; j < refs_.size(); ++j) {
        const double sim = similarity_or_nan(e, refs_[j]);
        if (std::isnan(sim)) return kNegInf;
        logits[j] = logit_scale_ * sim;
      }
      const double top = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double l : logits) sum += std::exp(l - top);
      return top + std::log(sum) - logits[label_];
    }
  }
  return kNegInf;
}

// ---------------------------------------------------------------------------
// LEAF

namespace {

// Stage streams: 0 = positions, 1 = characters.
Rng stage_stream(std::uint64_t seed, std::uint64_t sentence, std::uint64_t step,
                 std::uint64_t stage) {
  return Rng(mix64(seed ^ mix64(sentence, step), stage));
}

// Uniform sample of min(count, n) distinct values of [0, n).
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const std::size_t take = std::min(count, n);
  rng.partial_shuffle(std::span<std::size_t>(all), take);
  all.resize(take);
  return all;
}

}  // namespace

std::vector<AttackResult> leaf_attack(const TextEncoder& encoder, std::span<const Sentence> batch,
                                      std::span<const AttackObjective> objectives,
                                      const Alphabet& alphabet, const AttackConfig& cfg,
                                      const Lexicon* lexicon, std::uint64_t first_index) {
  check_common(cfg, lexicon);
  if (cfg.rho < 1) throw ConfigError("rho must be >= 1");
  if (objectives.size() != batch.size()) {
    throw ConfigError("leaf_attack needs one objective per sentence");
  }
  const std::size_t n = batch.size();
  std::vector<AttackResult> results(n);
  std::vector<Sentence> current(batch.begin(), batch.end());
  for (std::size_t i = 0; i < n; ++i) {
    results[i].input = batch[i];
    results[i].path.push_back(batch[i]);
  }
  const std::u32string pool = alphabet.edit_pool(cfg.include_deletion);
  const char32_t xi = alphabet.xi();

  std::vector<Sentence> candidates;
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::vector<std::size_t>> positions(n);
  std::vector<std::vector<bool>> reverted(n);
  std::vector<std::size_t> best_position(n);

  // Builds the gated candidate list for every sentence and scores it in a
  // single batched call; returns per-sentence argmax candidate indices.
  auto run_stage = [&](const char* stage, auto&& make_candidates) {
    candidates.clear();
    for (std::size_t i = 0; i < n; ++i) {
      offsets[i] = candidates.size();
      reverted[i].clear();
      for (Sentence& raw : make_candidates(i)) {
        Gated g = gate(current[i], std::move(raw), cfg, lexicon);
        reverted[i].push_back(g.reverted);
        candidates.push_back(std::move(g.sentence));
      }
    }
    offsets[n] = candidates.size();
    const auto embeddings = encoder.encode_batch(candidates);
    std::vector<std::size_t> winners(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t begin = offsets[i], end = offsets[i + 1];
      std::vector<double> scores(end - begin);
      for (std::size_t j = begin; j < end; ++j) {
        scores[j - begin] = objectives[i].score(embeddings[j]);
      }
      winners[i] = argmax(scores);
      results[i].stages.push_back({stage, scores.size(), scores[winners[i]]});
    }
    return winners;
  };

  for (std::size_t step = 0; step < cfg.k && n > 0; ++step) {
    const auto pos_winners = run_stage("position", [&](std::size_t i) {
      Rng rng = stage_stream(cfg.seed, first_index + i, step, 0);
      positions[i] = sample_indices(rng, expanded_size(current[i]), cfg.rho);
      std::vector<Sentence> out;
      out.reserve(positions[i].size());
      for (std::size_t p : positions[i]) out.push_back(apply_edit(current[i], p, cfg.test_char, xi));
      return out;
    });
    for (std::size_t i = 0; i < n; ++i) best_position[i] = positions[i][pos_winners[i]];

    const auto char_winners = run_stage("character", [&](std::size_t i) {
      Rng rng = stage_stream(cfg.seed, first_index + i, step, 1);
      const auto picks = sample_indices(rng, pool.size(), cfg.rho);
      std::vector<Sentence> out;
      out.reserve(picks.size());
      for (std::size_t c : picks) out.push_back(apply_edit(current[i], best_position[i], pool[c], xi));
      return out;
    });
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t chosen = offsets[i] + char_winners[i];
      current[i] = candidates[chosen];
      results[i].path.push_back(current[i]);
      results[i].reverted.push_back(reverted[i][char_winners[i]]);
      results[i].score = results[i].stages.back().best_score;
    }
  }
  for (std::size_t i = 0; i < n; ++i) results[i].output = std::move(current[i]);
  return results;
}

std::vector<AttackResult> random_attack(const TextEncoder& encoder,
                                        std::span<const Sentence> batch,
                                        std::span<const AttackObjective> objectives,
                                        const Alphabet& alphabet, AttackConfig cfg,
                                        const Lexicon* lexicon, std::uint64_t first_index) {
  cfg.rho = 1;
  return leaf_attack(encoder, batch, objectives, alphabet, cfg, lexicon, first_index);
}

// ---------------------------------------------------------------------------
// Charmer

AttackResult charmer_attack(const TextEncoder& encoder, const Sentence& s,
                            const AttackObjective& objective, const Alphabet& alphabet,
                            const AttackConfig& cfg, const Lexicon* lexicon) {
  check_common(cfg, lexicon);
  if (cfg.charmer_n < 1) throw ConfigError("charmer n must be >= 1");
  const std::u32string pool = alphabet.edit_pool(cfg.include_deletion);
  const char32_t xi = alphabet.xi();

  AttackResult result;
  result.input = s;
  result.path.push_back(s);
  Sentence current = s;
  for (std::size_t step = 0; step < cfg.k; ++step) {
    const std::size_t slots = expanded_size(current);
    std::vector<Sentence> probes;
    probes.reserve(slots);
    for (std::size_t p = 0; p < slots; ++p) {
      probes.push_back(gate(current, apply_edit(current, p, cfg.test_char, xi), cfg, lexicon).sentence);
    }
    const auto probe_scores = score_all(encoder, probes, objective);
    std::vector<std::size_t> order(slots);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return probe_scores[a] > probe_scores[b];
    });
    order.resize(std::min(cfg.charmer_n, slots));
    result.stages.push_back({"position", slots, probe_scores[order.front()]});

    std::vector<Sentence> candidates;
    std::vector<bool> was_reverted;
    candidates.reserve(order.size() * pool.size());
    for (std::size_t p : order) {
      for (char32_t c : pool) {
        Gated g = gate(current, apply_edit(current, p, c, xi), cfg, lexicon);
        was_reverted.push_back(g.reverted);
        candidates.push_back(std::move(g.sentence));
      }
    }
    const auto scores = score_all(encoder, candidates, objective);
    const std::size_t best = argmax(scores);
    result.stages.push_back({"character", candidates.size(), scores[best]});
    current = candidates[best];
    result.path.push_back(current);
    result.reverted.push_back(was_reverted[best]);
    result.score = scores[best];
  }
  result.output = std::move(current);
  return result;
}

// ---------------------------------------------------------------------------
// Brute force

AttackResult bruteforce_attack(const TextEncoder& encoder, const Sentence& s,
                               const AttackObjective& objective, const Alphabet& alphabet,
                               const AttackConfig& cfg, const Lexicon* lexicon) {
  check_common(cfg, lexicon);
  AttackResult result;
  result.input = s;
  result.path.push_back(s);
  if (cfg.k == 0) {
    result.output = s;
    return result;
  }

  // Breadth-first expansion of the radius-k ball; parent links recover the
  // accepted edit chain of the winner.
  std::vector<Sentence> nodes{s};
  std::vector<std::size_t> parent{0};
  std::unordered_map<Sentence, std::size_t> seen{{s, 0}};
  std::size_t level_begin = 0;
  for (std::size_t depth = 0; depth < cfg.k; ++depth) {
    const std::size_t level_end = nodes.size();
    for (std::size_t idx = level_begin; idx < level_end; ++idx) {
      for (Sentence& child : enumerate_edits(nodes[idx], alphabet)) {
        if (seen.count(child) != 0) continue;
        if (cfg.constrained && !valid(nodes[idx], child, *lexicon)) continue;
        if (nodes.size() >= cfg.budget) {
          throw BudgetError("brute-force search exceeded its budget of " +
                            std::to_string(cfg.budget) + " candidates");
        }
        seen.emplace(child, nodes.size());
        nodes.push_back(std::move(child));
        parent.push_back(idx);
      }
    }
    level_begin = level_end;
  }

  constexpr std::size_t kChunk = 4096;
  std::size_t best = 0;
  double best_score = kNegInf;
  for (std::size_t begin = 0; begin < nodes.size(); begin += kChunk) {
    const std::size_t end = std::min(nodes.size(), begin + kChunk);
    const auto scores =
        score_all(encoder, std::span<const Sentence>(nodes).subspan(begin, end - begin), objective);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if ((begin + j == 0) || scores[j] > best_score) {
        best_score = scores[j];
        best = begin + j;
      }
    }
  }
  result.stages.push_back({"exhaustive", nodes.size(), best_score});

  std::vector<Sentence> chain;
  for (std::size_t idx = best; idx != 0; idx = parent[idx]) chain.push_back(nodes[idx]);
  std::reverse(chain.begin(), chain.end());
  for (auto& step : chain) {
    result.path.push_back(step);
    result.reverted.push_back(false);
  }
  result.output = nodes[best];
  result.score = best_score;
  return result;
}

// ---------------------------------------------------------------------------

EncoderCallCount count_encoder_calls(const TextEncoder& encoder,
                                     const std::function<void(const TextEncoder&)>& attack) {
  CountingEncoder counter(encoder);
  attack(counter);
  return {counter.batched_calls(), counter.candidates_scored(), counter.batch_sizes()};
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "leaf") return AttackKind::kLeaf;
  if (name == "charmer") return AttackKind::kCharmer;
  if (name == "bruteforce") return AttackKind::kBruteforce;
  throw ConfigError("unknown attack '" + std::string(name) + "'");
}

std::string_view attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kLeaf: return "leaf";
    case AttackKind::kCharmer: return "charmer";
    case AttackKind::kBruteforce: return "bruteforce";
  }
  return "unknown";
}

std::vector<AttackResult> run_attack(AttackKind kind, const TextEncoder& encoder,
                                     std::span<const Sentence> batch,
                                     std::span<const AttackObjective> objectives,
                                     const Alphabet& alphabet, const AttackConfig& cfg,
                                     const Lexicon* lexicon) {
  if (kind == AttackKind::kLeaf) {
    return leaf_attack(encoder, batch, objectives, alphabet, cfg, lexicon);
  }
  if (objectives.size() != batch.size()) throw ConfigError("one objective per sentence required");
  std::vector<AttackResult> out;
  out.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (kind == AttackKind::kCharmer) {
      out.push_back(charmer_attack(encoder, batch[i], objectives[i], alphabet, cfg, lexicon));
    } else {
      out.push_back(bruteforce_attack(encoder, batch[i], objectives[i], alphabet, cfg, lexicon));
    }
  }
  return out;
}

nlohmann::ordered_json attack_report(const AttackResult& result, std::string_view objective_kind,
                                     std::uint64_t seed) {
  nlohmann::ordered_json report;
  report["input"] = utf8::encode(result.input);
  report["output"] = utf8::encode(result.output);
  report["distance"] = levenshtein(result.input, result.output);
  auto steps = nlohmann::ordered_json::array();
  for (const auto& st : result.stages) {
    nlohmann::ordered_json entry;
    entry["stage"] = st.stage;
    entry["candidates_scored"] = st.candidates_scored;
    entry["best_score"] = st.best_score;
    steps.push_back(std::move(entry));
  }
  report["steps"] = std::move(steps);
  report["objective_kind"] = objective_kind;
  report["seed"] = seed;
  if (result.score) report["score"] = *result.score;
  return report;
}

}  // namespace leaf
