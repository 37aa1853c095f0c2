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

#include "leaf/encoder.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "leaf/error.hpp"
#include "leaf/random.hpp"
#include "test_util.hpp"

namespace leaf {
namespace {

using testing::small_dims;

const Alphabet& alpha() {
  static const Alphabet a(U"abcdefgh ");
  return a;
}

bool bitwise_equal(const Embedding& a, const Embedding& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(CosineTest, Examples) {
  const Embedding v{0.3, -1.2, 2.0};
  const Embedding neg{-0.3, 1.2, -2.0};
  EXPECT_DOUBLE_EQ(*cosine_sim(v, v), 1.0);
  EXPECT_DOUBLE_EQ(*cosine_sim(v, neg), -1.0);
  EXPECT_DOUBLE_EQ(*cosine_sim(Embedding{1, 0}, Embedding{0, 1}), 0.0);
  EXPECT_FALSE(cosine_sim(Embedding{0, 0}, Embedding{1, 0}).has_value());
}

TEST(CosineTest, ScaleInvariant) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    Embedding u(6), v(6);
    for (auto& x : u) x = rng.uniform(-1, 1);
    for (auto& x : v) x = rng.uniform(-1, 1);
    const double alpha = rng.uniform(0.01, 50), beta = rng.uniform(0.01, 50);
    Embedding su = u, sv = v;
    for (auto& x : su) x *= alpha;
    for (auto& x : sv) x *= beta;
    ASSERT_NEAR(*cosine_sim(su, sv), *cosine_sim(u, v), 1e-12);
  }
}

TEST(InitTest, DeterministicGlorotWithZeroBiases) {
  const auto dims = EncoderDims::for_alphabet(alpha());
  const auto p = EncoderParams::init(42, dims);
  EXPECT_TRUE(p.bitwise_equal(EncoderParams::init(42, dims)));
  EXPECT_FALSE(p.E == EncoderParams::init(43, dims).E);
  for (float b : p.b1) EXPECT_EQ(b, 0.0f);
  for (float b : p.b2) EXPECT_EQ(b, 0.0f);
  const double bound = std::sqrt(6.0 / static_cast<double>(dims.dh + 2 * dims.de));
  for (float w : p.W1) EXPECT_LT(std::abs(w), bound);
  EXPECT_EQ(p.E.size(), dims.gamma * dims.de);
  EXPECT_THROW(EncoderParams::init(1, EncoderDims{0, 1, 1, 1, 1}), ConfigError);
}

TEST(EncodeTest, DeterministicAndOrderSensitive) {
  const auto p = EncoderParams::init(7, EncoderDims::for_alphabet(alpha()));
  const CharEncoder enc(p, alpha());
  EXPECT_TRUE(bitwise_equal(enc.encode(U"abc"), enc.encode(U"abc")));
  const auto ab = enc.encode(U"ab"), ba = enc.encode(U"ba");
  EXPECT_FALSE(bitwise_equal(ab, ba));
}

TEST(EncodeTest, EmptySentenceUsesZeroPool) {
  auto p = EncoderParams::init(7, small_dims(alpha()));
  Rng rng(1);
  for (auto& b : p.b1) b = static_cast<float>(rng.uniform(-1, 1));
  for (auto& b : p.b2) b = static_cast<float>(rng.uniform(-1, 1));
  const auto got = encode(p, alpha(), U"");
  const auto& d = p.dims;
  for (std::size_t r = 0; r < d.h; ++r) {
    double y = p.b2[r];
    for (std::size_t k = 0; k < d.dh; ++k) y += p.W2[r * d.dh + k] * std::tanh(double{p.b1[k]});
    EXPECT_NEAR(got[r], y, 1e-12);
  }
}

TEST(EncodeTest, BatchMatchesSingleAcrossWorkers) {
  const auto p = EncoderParams::init(3, EncoderDims::for_alphabet(alpha()));
  std::vector<Sentence> batch;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) batch.push_back(testing::random_sentence(rng, alpha().chars(), 20));
  const auto single = CharEncoder(p, alpha(), 1).encode_batch(batch);
  const auto multi = CharEncoder(p, alpha(), 8).encode_batch(batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ASSERT_TRUE(bitwise_equal(single[i], multi[i]));
    ASSERT_TRUE(bitwise_equal(single[i], encode(p, alpha(), batch[i])));
  }
}

TEST(EncodeTest, UnknownCharactersShareReservedRow) {
  const auto p = EncoderParams::init(3, small_dims(alpha()));
  EXPECT_EQ(char_row(alpha(), U'z'), alpha().size());
  EXPECT_EQ(char_row(alpha(), U'€'), alpha().size());
  // Unigram term identical; bigram buckets differ, so only compare single characters.
  EXPECT_TRUE(bitwise_equal(encode(p, alpha(), U"z"), encode(p, alpha(), U"€")));
}

TEST(EncodeTest, LocalityOfAnEdit) {
  // Substituting one character in a long sentence moves the pool by exactly
  // the unigram and the two touching bigram terms.
  auto p = EncoderParams::init(5, small_dims(alpha()));
  const Sentence s = U"abcdefgh abc", t = U"abcdeXgh abc";
  const auto& d = p.dims;
  std::vector<double> pool_s(2 * d.de), pool_t(2 * d.de);
  auto pool = [&](const Sentence& x, std::vector<double>& out) {
    for (char32_t c : x) {
      for (std::size_t k = 0; k < d.de; ++k) out[k] += double{p.E[char_row(alpha(), c) * d.de + k]} / x.size();
    }
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
      for (std::size_t k = 0; k < d.de; ++k) {
        out[d.de + k] += double{p.B[bigram_bucket(x[i], x[i + 1], d.m) * d.de + k]} / (x.size() - 1);
      }
    }
  };
  pool(s, pool_s);
  pool(t, pool_t);
  for (std::size_t k = 0; k < d.de; ++k) {
    const double unigram = (double{p.E[char_row(alpha(), U'X') * d.de + k]} -
                            p.E[char_row(alpha(), U'f') * d.de + k]) / s.size();
    EXPECT_NEAR(pool_t[k] - pool_s[k], unigram, 1e-12);
    const double bigram =
        (double{p.B[bigram_bucket(U'e', U'X', d.m) * d.de + k]} + p.B[bigram_bucket(U'X', U'g', d.m) * d.de + k] -
         p.B[bigram_bucket(U'e', U'f', d.m) * d.de + k] - p.B[bigram_bucket(U'f', U'g', d.m) * d.de + k]) /
        (s.size() - 1);
    EXPECT_NEAR(pool_t[d.de + k] - pool_s[d.de + k], bigram, 1e-12);
  }
  // An unrelated sentence is unaffected by anything above.
  EXPECT_TRUE(bitwise_equal(encode(p, alpha(), U"hhh"), encode(p, alpha(), U"hhh")));
}

TEST(BackwardTest, ZeroGradOutAndOutputBias) {
  const auto p = EncoderParams::init(8, small_dims(alpha()));
  const std::vector<double> zero(p.dims.h, 0.0);
  const auto g0 = backward(p, alpha(), U"abc", zero);
  g0.for_each_tensor([](const char*, const std::vector<double>& t) {
    for (double x : t) EXPECT_EQ(x, 0.0);
  });
  std::vector<double> go(p.dims.h);
  for (std::size_t i = 0; i < go.size(); ++i) go[i] = 0.25 * static_cast<double>(i) - 1.0;
  const auto g = backward(p, alpha(), U"abc", go);
  EXPECT_EQ(g.b2, go);
}

// Central differences through float parameters: the step actually taken is
// the float-rounded one.
double finite_difference(EncoderParams p, std::vector<float>& (*tensor)(EncoderParams&),
                         std::size_t index, const Sentence& s, const std::vector<double>& go) {
  const float original = tensor(p)[index];
  const float up = static_cast<float>(original + 1e-4);
  const float down = static_cast<float>(original - 1e-4);
  auto objective = [&](float value) {
    tensor(p)[index] = value;
    const auto y = encode(p, alpha(), s);
    double dot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += go[i] * y[i];
    return dot;
  };
  return (objective(up) - objective(down)) / (double{up} - double{down});
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  using Accessor = std::vector<float>& (*)(EncoderParams&);
  const std::vector<std::pair<Accessor, std::vector<double> EncoderGrads::*>> tensors{
      {[](EncoderParams& p) -> std::vector<float>& { return p.E; }, &EncoderGrads::E},
      {[](EncoderParams& p) -> std::vector<float>& { return p.B; }, &EncoderGrads::B},
      {[](EncoderParams& p) -> std::vector<float>& { return p.W1; }, &EncoderGrads::W1},
      {[](EncoderParams& p) -> std::vector<float>& { return p.b1; }, &EncoderGrads::b1},
      {[](EncoderParams& p) -> std::vector<float>& { return p.W2; }, &EncoderGrads::W2},
      {[](EncoderParams& p) -> std::vector<float>& { return p.b2; }, &EncoderGrads::b2},
  };
  Rng rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = EncoderParams::init(100 + trial, small_dims(alpha()));
    for (auto& b : p.b1) b = static_cast<float>(rng.uniform(-0.5, 0.5));
    const Sentence s = testing::random_sentence(rng, alpha().chars(), 15) + U"ab";
    std::vector<double> go(p.dims.h);
    for (auto& x : go) x = rng.uniform(-1, 1);
    const auto g = backward(p, alpha(), s, go);
    for (const auto& [accessor, member] : tensors) {
      const auto& analytic = g.*member;
      // Prefer coordinates that the sentence actually touches.
      for (int c = 0; c < 6; ++c) {
        std::size_t idx = rng.below(analytic.size());
        for (int tries = 0; tries < 50 && analytic[idx] == 0.0; ++tries) idx = rng.below(analytic.size());
        const double numeric = finite_difference(p, accessor, idx, s, go);
        const double scale = std::max(std::abs(numeric), std::abs(analytic[idx]));
        if (scale < 1e-9) continue;
        EXPECT_LE(std::abs(numeric - analytic[idx]) / scale, 1e-4) << "index " << idx;
      }
    }
  }
}

std::filesystem::path temp(const char* name) { return std::filesystem::temp_directory_path() / name; }

TEST(ParamsIoTest, RoundTripIsBitExact) {
  auto p = EncoderParams::init(12, small_dims(alpha()));
  p.E[0] = -0.0f;
  p.B[3] = 1e-40f;  // subnormal
  const auto path = temp("leaf_params_rt.bin");
  p.save(path);
  EXPECT_TRUE(EncoderParams::load(path).bitwise_equal(p));
  EXPECT_TRUE(EncoderParams::load(path, alpha()).bitwise_equal(p));
  std::filesystem::remove(path);
}

TEST(ParamsIoTest, HeaderLayout) {
  const auto p = EncoderParams::init(12, small_dims(alpha()));
  const auto path = temp("leaf_params_hdr.bin");
  p.save(path);
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, R"({"gamma":10,"de":8,"m":64,"dh":16,"h":8})");
  EXPECT_EQ(std::filesystem::file_size(path), header.size() + 1 + 4 * p.parameter_count());
  std::filesystem::remove(path);
}

TEST(ParamsIoTest, TruncatedCorruptAndMismatched) {
  const auto p = EncoderParams::init(12, small_dims(alpha()));
  const auto path = temp("leaf_params_bad.bin");
  p.save(path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(EncoderParams::load(path), FormatError);

  std::ofstream(path, std::ios::binary) << "{not json\n";
  EXPECT_THROW(EncoderParams::load(path), FormatError);

  p.save(path);
  EXPECT_THROW(EncoderParams::load(path, Alphabet(U"abc")), ConfigError);
  std::filesystem::remove(path);
}

TEST(CountingEncoderTest, RecordsBatches) {
  const testing::ConstantEncoder inner({1.0, 0.0});
  CountingEncoder counter(inner);
  const std::vector<Sentence> batch{U"a", U"b", U"c"};
  counter.encode_batch(batch);
  counter.encode(U"x");
  EXPECT_EQ(counter.batched_calls(), 2u);
  EXPECT_EQ(counter.candidates_scored(), 4u);
  EXPECT_EQ(counter.batch_sizes(), (std::vector<std::size_t>{3, 1}));
}

}  // namespace
}  // namespace leaf
