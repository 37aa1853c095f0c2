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
#include <numeric>

#include <gtest/gtest.h>

#include "leaf/error.hpp"
#include "leaf/random.hpp"
#include "test_util.hpp"

namespace leaf {
namespace {

const Alphabet& alpha() {
  static const Alphabet a(U"abcdefghij ");
  return a;
}

struct Fixture {
  EncoderParams params = EncoderParams::init(21, testing::small_dims(alpha()));
  CharEncoder encoder{params, alpha()};

  AttackObjective distance_from(const Sentence& s) const {
    return AttackObjective::embed_distance(encoder.encode(s));
  }
  double score(const AttackObjective& obj, const Sentence& s) const {
    return obj.score(encoder.encode(s));
  }
};

// Literal transcription of the batched attack: builds phi(S) explicitly,
// replaces, contracts, gates, scores and takes first-maximum argmaxes.
std::vector<Sentence> reference_leaf(const TextEncoder& enc, const std::vector<Sentence>& batch,
                                     const std::vector<AttackObjective>& objs,
                                     const Alphabet& alphabet, const AttackConfig& cfg,
                                     const Lexicon* lex) {
  const char32_t xi = alphabet.xi();
  auto phi = [&](const Sentence& s) {
    std::u32string e;
    e.push_back(xi);
    for (char32_t c : s) {
      e.push_back(c);
      e.push_back(xi);
    }
    return e;
  };
  auto psi = [&](std::u32string e) {
    e.erase(std::remove(e.begin(), e.end(), xi), e.end());
    return e;
  };
  auto sample = [](std::uint64_t seed, std::size_t i, std::size_t step, std::size_t stage,
                   std::size_t n, std::size_t rho) {
    Rng rng(mix64(seed ^ mix64(i, step), stage));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    rng.partial_shuffle(std::span<std::size_t>(idx), std::min(rho, n));
    idx.resize(std::min(rho, n));
    return idx;
  };
  std::u32string pool = alphabet.chars();
  if (cfg.include_deletion) pool.push_back(xi);

  std::vector<Sentence> hat = batch;
  for (std::size_t step = 0; step < cfg.k; ++step) {
    std::vector<std::size_t> chosen_pos(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto positions = sample(cfg.seed, i, step, 0, 2 * hat[i].size() + 1, cfg.rho);
      std::vector<Sentence> cands;
      for (std::size_t p : positions) {
        auto e = phi(hat[i]);
        e[p] = cfg.test_char;
        Sentence c = psi(e);
        if (cfg.constrained && !valid(hat[i], c, *lex)) c = hat[i];
        cands.push_back(c);
      }
      std::size_t best = 0;
      double best_score = -INFINITY;
      for (std::size_t j = 0; j < cands.size(); ++j) {
        const double sc = objs[i].score(enc.encode(cands[j]));
        if (j == 0 || sc > best_score) best_score = sc, best = j;
      }
      chosen_pos[i] = positions[best];
    }
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto chars = sample(cfg.seed, i, step, 1, pool.size(), cfg.rho);
      std::vector<Sentence> cands;
      for (std::size_t c : chars) {
        auto e = phi(hat[i]);
        e[chosen_pos[i]] = pool[c];
        Sentence s = psi(e);
        if (cfg.constrained && !valid(hat[i], s, *lex)) s = hat[i];
        cands.push_back(s);
      }
      std::size_t best = 0;
      double best_score = -INFINITY;
      for (std::size_t j = 0; j < cands.size(); ++j) {
        const double sc = objs[i].score(enc.encode(cands[j]));
        if (j == 0 || sc > best_score) best_score = sc, best = j;
      }
      hat[i] = cands[best];
    }
  }
  return hat;
}

TEST(ObjectiveTest, ScoresMatchDefinitions) {
  const Embedding ref{1.0, 0.0}, e{0.0, 2.0};
  EXPECT_DOUBLE_EQ(AttackObjective::embed_distance(ref).score(e), 5.0);
  EXPECT_DOUBLE_EQ(AttackObjective::neg_self_similarity(ref).score(e), 0.0);
  EXPECT_DOUBLE_EQ(AttackObjective::target_similarity(ref).score(Embedding{3.0, 0.0}), 1.0);
  const auto ce = AttackObjective::classification_ce({{1.0, 0.0}, {0.0, 1.0}}, 0, 100.0);
  // logits (100, 0): CE = log(1 + e^-100)
  EXPECT_NEAR(ce.score(Embedding{1.0, 0.0}), std::log1p(std::exp(-100.0)), 1e-15);
  EXPECT_NEAR(ce.score(Embedding{0.0, 1.0}), 100.0, 1e-9);
  EXPECT_EQ(AttackObjective::target_similarity(ref).score(Embedding{0.0, 0.0}), -INFINITY);
  EXPECT_THROW(AttackObjective::classification_ce({{1.0}}, 0), ConfigError);
}

TEST(LeafTest, ZeroRadiusIsIdentity) {
  Fixture f;
  const std::vector<Sentence> batch{U"abc def", U""};
  const std::vector<AttackObjective> objs{f.distance_from(batch[0]), f.distance_from(batch[1])};
  AttackConfig cfg;
  cfg.k = 0;
  const auto calls = count_encoder_calls(f.encoder, [&](const TextEncoder& enc) {
    const auto out = leaf_attack(enc, batch, objs, alpha(), cfg);
    EXPECT_EQ(out[0].output, batch[0]);
    EXPECT_EQ(out[1].output, batch[1]);
  });
  EXPECT_EQ(calls.batched_calls, 0u);
}

TEST(LeafTest, MatchesStraightLineReference) {
  Fixture f;
  const Lexicon lex{"abc", "bad", "cab", "dig", "gig", "big"};
  for (bool constrained : {false, true}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed + 1000);
      const std::vector<Sentence> batch{
          testing::random_sentence(rng, alpha().chars(), 12) + U"abc big",
          testing::random_sentence(rng, alpha().chars(), 6)};
      const std::vector<AttackObjective> objs{f.distance_from(batch[0]), f.distance_from(batch[1])};
      AttackConfig cfg;
      cfg.k = seed % 3 == 0 ? 2 : 1;
      cfg.rho = 4;
      cfg.seed = seed;
      cfg.constrained = constrained;
      const auto got = leaf_attack(f.encoder, batch, objs, alpha(), cfg, &lex);
      const auto want = reference_leaf(f.encoder, batch, objs, alpha(), cfg, &lex);
      ASSERT_EQ(got[0].output, want[0]);
      ASSERT_EQ(got[1].output, want[1]);
    }
  }
}

TEST(LeafTest, RhoOneIsARandomPerturbation) {
  Fixture f;
  const std::vector<Sentence> batch{U"hello world"};
  const std::vector<AttackObjective> objs{f.distance_from(batch[0])};
  AttackConfig cfg;
  cfg.k = 1;
  cfg.seed = 3;
  const auto random = random_attack(f.encoder, batch, objs, alpha(), cfg);
  cfg.rho = 1;
  const auto leaf = leaf_attack(f.encoder, batch, objs, alpha(), cfg);
  EXPECT_EQ(random[0].output, leaf[0].output);
  EXPECT_EQ(random[0].stages[0].candidates_scored, 1u);
  EXPECT_EQ(random[0].stages[1].candidates_scored, 1u);
  EXPECT_LE(levenshtein(batch[0], random[0].output), 1u);
}

TEST(LeafTest, ResultsIndependentOfBatchSplit) {
  Fixture f;
  const std::vector<Sentence> batch{U"abc", U"hij hij", U"dead beef", U"a"};
  std::vector<AttackObjective> objs;
  for (const auto& s : batch) objs.push_back(f.distance_from(s));
  AttackConfig cfg;
  cfg.k = 2;
  cfg.rho = 3;
  cfg.seed = 17;
  const auto whole = leaf_attack(f.encoder, batch, objs, alpha(), cfg);
  const std::span<const Sentence> b(batch);
  const std::span<const AttackObjective> o(objs);
  const auto head = leaf_attack(f.encoder, b.first(2), o.first(2), alpha(), cfg, nullptr, 0);
  const auto tail = leaf_attack(f.encoder, b.subspan(2), o.subspan(2), alpha(), cfg, nullptr, 2);
  EXPECT_EQ(whole[0].output, head[0].output);
  EXPECT_EQ(whole[1].output, head[1].output);
  EXPECT_EQ(whole[2].output, tail[0].output);
  EXPECT_EQ(whole[3].output, tail[1].output);
}

TEST(LeafTest, CandidateBudgetLaw) {
  Fixture f;
  std::vector<Sentence> batch;
  std::vector<AttackObjective> objs;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(U"a fairly long sentence for the budget " + Sentence(static_cast<std::size_t>(i), U'a'));
    objs.push_back(f.distance_from(batch.back()));
  }
  // 11-character pool (10 letters + space) plus xi: rho 12 uses all of them.
  AttackConfig cfg;
  cfg.rho = 12;
  for (std::size_t k : {1u, 3u}) {
    cfg.k = k;
    const auto calls = count_encoder_calls(f.encoder, [&](const TextEncoder& enc) {
      leaf_attack(enc, batch, objs, alpha(), cfg);
    });
    EXPECT_EQ(calls.batched_calls, 2 * k);
    EXPECT_EQ(calls.candidates_scored, 2 * k * batch.size() * cfg.rho);
    for (auto size : calls.batch_sizes) EXPECT_EQ(size, batch.size() * cfg.rho);
  }
}

TEST(LeafTest, EmptySentenceHasOneSlot) {
  Fixture f;
  const std::vector<Sentence> batch{U""};
  const std::vector<AttackObjective> objs{f.distance_from(U"")};
  AttackConfig cfg;
  cfg.k = 1;
  cfg.rho = 5;
  const auto out = leaf_attack(f.encoder, batch, objs, alpha(), cfg);
  EXPECT_EQ(out[0].stages[0].candidates_scored, 1u);
  EXPECT_LE(out[0].output.size(), 1u);
}

TEST(LeafTest, ConstrainedWithoutLexiconIsAConfigError) {
  Fixture f;
  const std::vector<Sentence> batch{U"abc"};
  const std::vector<AttackObjective> objs{f.distance_from(U"abc")};
  AttackConfig cfg;
  cfg.constrained = true;
  EXPECT_THROW(leaf_attack(f.encoder, batch, objs, alpha(), cfg), ConfigError);
  EXPECT_THROW(charmer_attack(f.encoder, batch[0], objs[0], alpha(), cfg), ConfigError);
}

TEST(CharmerTest, CandidateCounts) {
  Fixture f;
  AttackConfig cfg;
  cfg.k = 1;
  cfg.charmer_n = 1;
  cfg.include_deletion = false;
  const Alphabet ten(U"abcdefghij");  // |pool| = 10
  const EncoderParams p = EncoderParams::init(2, testing::small_dims(ten));
  const CharEncoder enc(p, ten);
  const Sentence s = U"abcde";
  const auto calls = count_encoder_calls(enc, [&](const TextEncoder& e) {
    charmer_attack(e, s, AttackObjective::embed_distance(enc.encode(s)), ten, cfg);
  });
  EXPECT_EQ(calls.candidates_scored, 21u);
  EXPECT_EQ(calls.batched_calls, 2u);
}

TEST(CharmerTest, ZeroRadiusIsIdentity) {
  Fixture f;
  AttackConfig cfg;
  cfg.k = 0;
  const auto r = charmer_attack(f.encoder, U"abc", f.distance_from(U"abc"), alpha(), cfg);
  EXPECT_EQ(r.output, U"abc");
}

TEST(CharmerTest, NeverBeatsBruteForceOnTinyInputs) {
  const Alphabet small(U"abcd");
  const EncoderParams p = EncoderParams::init(5, testing::small_dims(small));
  const CharEncoder enc(p, small);
  AttackConfig cfg;
  cfg.k = 1;
  for (const auto& s : testing::all_strings(small.chars(), 0, 3)) {
    for (std::size_t n : {1u, 2u, 7u}) {
      cfg.charmer_n = n;
      const auto obj = AttackObjective::neg_self_similarity(enc.encode(s));
      const auto ch = charmer_attack(enc, s, obj, small, cfg);
      const auto bf = bruteforce_attack(enc, s, obj, small, cfg);
      ASSERT_LE(obj.score(enc.encode(ch.output)), obj.score(enc.encode(bf.output)));
    }
  }
}

TEST(BruteforceTest, KOneIsMaxOverEnumeration) {
  Fixture f;
  const Sentence s = U"fig jab";
  const auto obj = f.distance_from(U"hhh");
  AttackConfig cfg;
  cfg.k = 1;
  const auto r = bruteforce_attack(f.encoder, s, obj, alpha(), cfg);
  double best = f.score(obj, s);
  for (const auto& e : enumerate_edits(s, alpha())) best = std::max(best, f.score(obj, e));
  EXPECT_EQ(*r.score, best);
  EXPECT_EQ(f.score(obj, r.output), best);
  EXPECT_EQ(r.stages[0].candidates_scored, enumerate_edits(s, alpha()).size() + 1);
}

TEST(BruteforceTest, ConstantObjectiveKeepsInputScore) {
  const testing::ConstantEncoder enc({0.5, -1.0, 2.0});
  const auto obj = AttackObjective::target_similarity({1.0, 1.0, 1.0});
  AttackConfig cfg;
  cfg.k = 2;
  const auto r = bruteforce_attack(enc, U"abc", obj, alpha(), cfg);
  EXPECT_EQ(r.output, U"abc");
  EXPECT_EQ(*r.score, obj.score(enc.encode(U"abc")));
}

TEST(BruteforceTest, BudgetIsEnforced) {
  Fixture f;
  AttackConfig cfg;
  cfg.k = 3;
  cfg.budget = 1000;
  EXPECT_THROW(bruteforce_attack(f.encoder, U"abcdefgh", f.distance_from(U"a"), alpha(), cfg),
               BudgetError);
}

TEST(BruteforceTest, PathIsAChainOfValidEdits) {
  Fixture f;
  const Lexicon lex{"bad", "cab", "dab", "jab", "fig"};
  AttackConfig cfg;
  cfg.k = 2;
  cfg.constrained = true;
  const Sentence s = U"bad cab fig";
  const auto r = bruteforce_attack(f.encoder, s, f.distance_from(s), alpha(), cfg, &lex);
  ASSERT_EQ(r.path.front(), s);
  ASSERT_EQ(r.path.back(), r.output);
  for (std::size_t i = 1; i < r.path.size(); ++i) {
    EXPECT_TRUE(valid(r.path[i - 1], r.path[i], lex));
    EXPECT_EQ(levenshtein(r.path[i - 1], r.path[i]), 1u);
  }
  EXPECT_LE(levenshtein(s, r.output), 2u);
}

// Oracle dominance plus the radius bound for all attack kinds.
TEST(AttackProperty, BruteforceDominatesAndRadiusHolds) {
  Fixture f;
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Sentence s = testing::random_sentence(rng, alpha().chars(), 8);
    const Sentence other = testing::random_sentence(rng, alpha().chars(), 8) + U"x";
    const auto obj = trial % 2 == 0 ? f.distance_from(s)
                                    : AttackObjective::target_similarity(f.encoder.encode(other));
    AttackConfig cfg;
    cfg.k = 1;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const double bf = f.score(obj, bruteforce_attack(f.encoder, s, obj, alpha(), cfg).output);
    for (std::size_t rho : {1u, 3u, 10u, 100u}) {
      cfg.rho = rho;
      const std::vector<Sentence> batch{s};
      const std::vector<AttackObjective> objs{obj};
      const auto out = leaf_attack(f.encoder, batch, objs, alpha(), cfg)[0].output;
      ASSERT_LE(testing::reference_levenshtein(s, out), 1u);
      ASSERT_LE(f.score(obj, out), bf);
    }
    for (std::size_t n : {1u, 5u, 20u}) {
      cfg.charmer_n = n;
      const auto out = charmer_attack(f.encoder, s, obj, alpha(), cfg).output;
      ASSERT_LE(testing::reference_levenshtein(s, out), 1u);
      ASSERT_LE(f.score(obj, out), bf);
    }
  }
}

TEST(AttackProperty, DeterministicAcrossWorkerCounts) {
  const EncoderParams p = EncoderParams::init(4, EncoderDims::for_alphabet(alpha()));
  const CharEncoder one(p, alpha(), 1), eight(p, alpha(), 8);
  std::vector<Sentence> batch;
  std::vector<AttackObjective> objs;
  Rng rng(6);
  for (int i = 0; i < 40; ++i) {
    batch.push_back(testing::random_sentence(rng, alpha().chars(), 20));
    objs.push_back(AttackObjective::neg_self_similarity(one.encode(batch.back() + U"a")));
  }
  AttackConfig cfg;
  cfg.k = 2;
  cfg.rho = 6;
  cfg.seed = 5;
  const auto a = leaf_attack(one, batch, objs, alpha(), cfg);
  const auto b = leaf_attack(eight, batch, objs, alpha(), cfg);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ASSERT_EQ(a[i].output, b[i].output);
    ASSERT_EQ(*a[i].score, *b[i].score);
  }
  const auto c1 = charmer_attack(one, batch[3], objs[3], alpha(), cfg);
  const auto c8 = charmer_attack(eight, batch[3], objs[3], alpha(), cfg);
  EXPECT_EQ(c1.output, c8.output);
}

TEST(AttackReportTest, Schema) {
  Fixture f;
  const std::vector<Sentence> batch{U"abc"};
  const std::vector<AttackObjective> objs{f.distance_from(U"abc")};
  AttackConfig cfg;
  cfg.k = 1;
  cfg.rho = 2;
  cfg.seed = 9;
  const auto r = leaf_attack(f.encoder, batch, objs, alpha(), cfg)[0];
  const auto j = attack_report(r, objs[0].name(), cfg.seed);
  EXPECT_EQ(j["input"], "abc");
  EXPECT_EQ(j["objective_kind"], "embed-dist");
  EXPECT_EQ(j["seed"], 9);
  ASSERT_EQ(j["steps"].size(), 2u);
  EXPECT_EQ(j["steps"][0]["stage"], "position");
  EXPECT_EQ(j["steps"][1]["candidates_scored"], 2);
  EXPECT_LE(j["distance"].get<int>(), 1);
}

}  // namespace
}  // namespace leaf
