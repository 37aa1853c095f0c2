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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "leaf/textspace.hpp"

namespace leaf {

using Embedding = std::vector<double>;

// u.v / (|u| |v|); nullopt when either vector has zero norm or the sizes differ.
std::optional<double> cosine_sim(std::span<const double> u, std::span<const double> v);

// The text-embedding oracle every attack and evaluation talks to.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;

  virtual std::size_t embedding_dim() const = 0;

  // One batched invocation. Results are positionally aligned with `batch` and
  // do not depend on what else is in the batch.
  virtual std::vector<Embedding> encode_batch(std::span<const Sentence> batch) const = 0;

  Embedding encode(const Sentence& s) const;
};

// Wraps another encoder and counts invocations.
class CountingEncoder : public TextEncoder {
 public:
  explicit CountingEncoder(const TextEncoder& inner) : inner_(inner) {}

  std::size_t embedding_dim() const override { return inner_.embedding_dim(); }
  std::vector<Embedding> encode_batch(std::span<const Sentence> batch) const override;

  std::size_t batched_calls() const;
  std::size_t candidates_scored() const;
  std::vector<std::size_t> batch_sizes() const;
  void reset();

 private:
  const TextEncoder& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<std::size_t> batch_sizes_;
};

struct EncoderDims {
  std::size_t gamma = 0;  // rows of the character table: alphabet size + 1 (unknown)
  std::size_t de = 32;
  std::size_t m = 1024;   // hashed bigram buckets
  std::size_t dh = 64;
  std::size_t h = 64;

  static EncoderDims for_alphabet(const Alphabet& alphabet, std::size_t de = 32,
                                  std::size_t m = 1024, std::size_t dh = 64, std::size_t h = 64) {
    return {alphabet.size() + 1, de, m, dh, h};
  }

  bool operator==(const EncoderDims&) const = default;
};

// Weights of the character encoder
//   pool = [mean E[c_i] ; mean B[hash(c_i, c_i+1) mod M]]
//   f(s) = W2 tanh(W1 pool + b1) + b2
// Matrices are row-major.
struct EncoderParams {
  EncoderDims dims;
  std::vector<float> E;   // gamma x de
  std::vector<float> B;   // m x de
  std::vector<float> W1;  // dh x 2de
  std::vector<float> b1;  // dh
  std::vector<float> W2;  // h x dh
  std::vector<float> b2;  // h

  // Glorot-uniform matrices, zero biases.
  static EncoderParams init(std::uint64_t seed, const EncoderDims& dims);

  // JSON header line then the six tensors as little-endian binary32.
  void save(const std::filesystem::path& path) const;
  static EncoderParams load(const std::filesystem::path& path);
  // Also checks that the character table matches `alphabet`.
  static EncoderParams load(const std::filesystem::path& path, const Alphabet& alphabet);

  std::size_t parameter_count() const;

  // Visits (name, tensor) in serialization order.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("E", E), fn("B", B), fn("W1", W1), fn("b1", b1), fn("W2", W2), fn("b2", b2);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn("E", E), fn("B", B), fn("W1", W1), fn("b1", b1), fn("W2", W2), fn("b2", b2);
  }

  // Bitwise comparison (so -0.0 != 0.0 and NaN payloads matter).
  bool bitwise_equal(const EncoderParams& other) const;
};

// Same layout as EncoderParams, in double precision.
struct EncoderGrads {
  std::vector<double> E, B, W1, b1, W2, b2;

  static EncoderGrads zeros_like(const EncoderParams& params);

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("E", E), fn("B", B), fn("W1", W1), fn("b1", b1), fn("W2", W2), fn("b2", b2);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn("E", E), fn("B", B), fn("W1", W1), fn("b1", b1), fn("W2", W2), fn("b2", b2);
  }

  EncoderGrads& operator+=(const EncoderGrads& other);
};

// Bigram bucket: splitmix64 of the packed scalar pair, reduced mod m.
std::size_t bigram_bucket(char32_t first, char32_t second, std::size_t m);

// Character-table row for c; characters outside the alphabet share the last row.
std::size_t char_row(const Alphabet& alphabet, char32_t c);

Embedding encode(const EncoderParams& params, const Alphabet& alphabet, std::u32string_view s);

// Exact gradient of grad_out . encode(params, s) with respect to every weight.
EncoderGrads backward(const EncoderParams& params, const Alphabet& alphabet,
                      std::u32string_view s, std::span<const double> grad_out);

// Adds the gradient into `into` instead of allocating a fresh record.
void accumulate_backward(const EncoderParams& params, const Alphabet& alphabet,
                         std::u32string_view s, std::span<const double> grad_out,
                         EncoderGrads& into);

// The built-in encoder. Holds references: params and alphabet must outlive it.
// Batches are spread over `workers` threads.
class CharEncoder : public TextEncoder {
 public:
  CharEncoder(const EncoderParams& params, const Alphabet& alphabet, std::size_t workers = 1);

  std::size_t embedding_dim() const override { return params_.dims.h; }
  std::vector<Embedding> encode_batch(std::span<const Sentence> batch) const override;

  const EncoderParams& params() const { return params_; }
  const Alphabet& alphabet() const { return alphabet_; }

 private:
  const EncoderParams& params_;
  const Alphabet& alphabet_;
  std::size_t workers_;
};

}  // namespace leaf
