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

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "leaf/binio.hpp"
#include "leaf/error.hpp"
#include "leaf/parallel.hpp"
#include "leaf/random.hpp"

namespace leaf {

std::optional<double> cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) return std::nullopt;
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu == 0.0 || vv == 0.0) return std::nullopt;
  const double sim = dot / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(sim, -1.0, 1.0);
}

Embedding TextEncoder::encode(const Sentence& s) const {
  return std::move(encode_batch(std::span<const Sentence>(&s, 1)).front());
}

std::vector<Embedding> CountingEncoder::encode_batch(std::span<const Sentence> batch) const {
  {
    std::lock_guard lock(mutex_);
    batch_sizes_.push_back(batch.size());
  }
  return inner_.encode_batch(batch);
}

std::size_t CountingEncoder::batched_calls() const {
  std::lock_guard lock(mutex_);
  return batch_sizes_.size();
}

std::size_t CountingEncoder::candidates_scored() const {
  std::lock_guard lock(mutex_);
  std::size_t total = 0;
  for (auto n : batch_sizes_) total += n;
  return total;
}

std::vector<std::size_t> CountingEncoder::batch_sizes() const {
  std::lock_guard lock(mutex_);
  return batch_sizes_;
}

void CountingEncoder::reset() {
  std::lock_guard lock(mutex_);
  batch_sizes_.clear();
}

// ---------------------------------------------------------------------------
// Parameters

namespace {

void fill_glorot(std::vector<float>& w, std::size_t rows, std::size_t cols, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  w.resize(rows * cols);
  for (auto& x : w) x = static_cast<float>(rng.uniform(-a, a));
}

void check_dims(const EncoderDims& d) {
  if (d.gamma == 0 || d.de == 0 || d.m == 0 || d.dh == 0 || d.h == 0) {
    throw ConfigError("encoder dimensions must all be >= 1");
  }
}

std::size_t expected_size(const EncoderDims& d, std::string_view tensor) {
  if (tensor == "E") return d.gamma * d.de;
  if (tensor == "B") return d.m * d.de;
  if (tensor == "W1") return d.dh * 2 * d.de;
  if (tensor == "b1") return d.dh;
  if (tensor == "W2") return d.h * d.dh;
  return d.h;
}

}  // namespace

EncoderParams EncoderParams::init(std::uint64_t seed, const EncoderDims& dims) {
  check_dims(dims);
  EncoderParams p;
  p.dims = dims;
  Rng rng(seed);
  fill_glorot(p.E, dims.gamma, dims.de, rng);
  fill_glorot(p.B, dims.m, dims.de, rng);
  fill_glorot(p.W1, dims.dh, 2 * dims.de, rng);
  p.b1.assign(dims.dh, 0.0f);
  fill_glorot(p.W2, dims.h, dims.dh, rng);
  p.b2.assign(dims.h, 0.0f);
  return p;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](const char*, const auto& t) { n += t.size(); });
  return n;
}

bool EncoderParams::bitwise_equal(const EncoderParams& other) const {
  if (!(dims == other.dims)) return false;
  auto same = [](const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
  };
  return same(E, other.E) && same(B, other.B) && same(W1, other.W1) && same(b1, other.b1) &&
         same(W2, other.W2) && same(b2, other.b2);
}

void EncoderParams::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write encoder parameters to " + path.string());
  nlohmann::ordered_json header;
  header["gamma"] = dims.gamma;
  header["de"] = dims.de;
  header["m"] = dims.m;
  header["dh"] = dims.dh;
  header["h"] = dims.h;
  out << header.dump() << '\n';
  for_each_tensor([&](const char*, const std::vector<float>& t) { binio::write_f32(out, t); });
  if (!out) throw ConfigError("failed writing " + path.string());
}

EncoderParams EncoderParams::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open encoder parameters " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing header");
  EncoderParams p;
  try {
    const auto header = nlohmann::json::parse(line);
    p.dims.gamma = header.at("gamma").get<std::size_t>();
    p.dims.de = header.at("de").get<std::size_t>();
    p.dims.m = header.at("m").get<std::size_t>();
    p.dims.dh = header.at("dh").get<std::size_t>();
    p.dims.h = header.at("h").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": corrupt header: " + e.what());
  }
  try {
    check_dims(p.dims);
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  p.for_each_tensor([&](const char* name, std::vector<float>& t) {
    t.resize(expected_size(p.dims, name));
    if (!binio::read_f32(in, t)) {
      throw FormatError(path.string() + ": truncated payload in tensor " + name);
    }
    for (float x : t) {
      if (!std::isfinite(x)) throw FormatError(path.string() + ": non-finite value in " + name);
    }
  });
  if (!binio::at_end(in)) throw FormatError(path.string() + ": trailing bytes after payload");
  return p;
}

EncoderParams EncoderParams::load(const std::filesystem::path& path, const Alphabet& alphabet) {
  EncoderParams p = load(path);
  if (p.dims.gamma != alphabet.size() + 1) {
    throw ConfigError(path.string() + ": character table has " + std::to_string(p.dims.gamma) +
                      " rows but the alphabet needs " + std::to_string(alphabet.size() + 1));
  }
  return p;
}

EncoderGrads EncoderGrads::zeros_like(const EncoderParams& p) {
  EncoderGrads g;
  g.E.assign(p.E.size(), 0.0);
  g.B.assign(p.B.size(), 0.0);
  g.W1.assign(p.W1.size(), 0.0);
  g.b1.assign(p.b1.size(), 0.0);
  g.W2.assign(p.W2.size(), 0.0);
  g.b2.assign(p.b2.size(), 0.0);
  return g;
}

EncoderGrads& EncoderGrads::operator+=(const EncoderGrads& other) {
  auto add = [](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  add(E, other.E), add(B, other.B), add(W1, other.W1);
  add(b1, other.b1), add(W2, other.W2), add(b2, other.b2);
  return *this;
}

// ---------------------------------------------------------------------------
// Forward / backward

std::size_t bigram_bucket(char32_t first, char32_t second, std::size_t m) {
  const std::uint64_t packed = (static_cast<std::uint64_t>(first) << 32) | second;
  return static_cast<std::size_t>(mix64(packed) % m);
}

std::size_t char_row(const Alphabet& alphabet, char32_t c) {
  return alphabet.index_of(c).value_or(alphabet.size());
}

namespace {

struct Activations {
  std::vector<double> pool;    // 2de
  std::vector<double> hidden;  // dh, after tanh
};

Activations forward_hidden(const EncoderParams& p, const Alphabet& alphabet,
                           std::u32string_view s) {
  const auto& d = p.dims;
  if (alphabet.size() + 1 != d.gamma) {
    throw ConfigError("encoder character table does not match the alphabet");
  }
  Activations act;
  act.pool.assign(2 * d.de, 0.0);
  if (!s.empty()) {
    for (char32_t c : s) {
      const float* row = &p.E[char_row(alphabet, c) * d.de];
      for (std::size_t k = 0; k < d.de; ++k) act.pool[k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(s.size());
    for (std::size_t k = 0; k < d.de; ++k) act.pool[k] *= inv;
  }
  if (s.size() >= 2) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      const float* row = &p.B[bigram_bucket(s[i], s[i + 1], d.m) * d.de];
      for (std::size_t k = 0; k < d.de; ++k) act.pool[d.de + k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(s.size() - 1);
    for (std::size_t k = 0; k < d.de; ++k) act.pool[d.de + k] *= inv;
  }
  const std::size_t in = 2 * d.de;
  act.hidden.resize(d.dh);
  for (std::size_t r = 0; r < d.dh; ++r) {
    const float* w = &p.W1[r * in];
    double z = p.b1[r];
    for (std::size_t k = 0; k < in; ++k) z += w[k] * act.pool[k];
    act.hidden[r] = std::tanh(z);
  }
  return act;
}

}  // namespace

Embedding encode(const EncoderParams& p, const Alphabet& alphabet, std::u32string_view s) {
  const auto& d = p.dims;
  const Activations act = forward_hidden(p, alphabet, s);
  Embedding out(d.h);
  for (std::size_t r = 0; r < d.h; ++r) {
    const float* w = &p.W2[r * d.dh];
    double y = p.b2[r];
    for (std::size_t k = 0; k < d.dh; ++k) y += w[k] * act.hidden[k];
    out[r] = y;
  }
  return out;
}

void accumulate_backward(const EncoderParams& p, const Alphabet& alphabet, std::u32string_view s,
                         std::span<const double> grad_out, EncoderGrads& g) {
  const auto& d = p.dims;
  if (grad_out.size() != d.h) throw ConfigError("grad_out length does not match embedding size");
  const Activations act = forward_hidden(p, alphabet, s);

  std::vector<double> grad_hidden(d.dh, 0.0);
  for (std::size_t r = 0; r < d.h; ++r) {
    const double go = grad_out[r];
    g.b2[r] += go;
    if (go == 0.0) continue;
    const float* w = &p.W2[r * d.dh];
    double* gw = &g.W2[r * d.dh];
    for (std::size_t k = 0; k < d.dh; ++k) {
      gw[k] += go * act.hidden[k];
      grad_hidden[k] += go * w[k];
    }
  }

  const std::size_t in = 2 * d.de;
  std::vector<double> grad_pool(in, 0.0);
  for (std::size_t r = 0; r < d.dh; ++r) {
    const double gz = grad_hidden[r] * (1.0 - act.hidden[r] * act.hidden[r]);
    g.b1[r] += gz;
    if (gz == 0.0) continue;
    const float* w = &p.W1[r * in];
    double* gw = &g.W1[r * in];
    for (std::size_t k = 0; k < in; ++k) {
      gw[k] += gz * act.pool[k];
      grad_pool[k] += gz * w[k];
    }
  }

  if (!s.empty()) {
    const double inv = 1.0 / static_cast<double>(s.size());
    for (char32_t c : s) {
      double* row = &g.E[char_row(alphabet, c) * d.de];
      for (std::size_t k = 0; k < d.de; ++k) row[k] += grad_pool[k] * inv;
    }
  }
  if (s.size() >= 2) {
    const double inv = 1.0 / static_cast<double>(s.size() - 1);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      double* row = &g.B[bigram_bucket(s[i], s[i + 1], d.m) * d.de];
      for (std::size_t k = 0; k < d.de; ++k) row[k] += grad_pool[d.de + k] * inv;
    }
  }
}

EncoderGrads backward(const EncoderParams& p, const Alphabet& alphabet, std::u32string_view s,
                      std::span<const double> grad_out) {
  EncoderGrads g = EncoderGrads::zeros_like(p);
  accumulate_backward(p, alphabet, s, grad_out, g);
  return g;
}

CharEncoder::CharEncoder(const EncoderParams& params, const Alphabet& alphabet,
                         std::size_t workers)
    : params_(params), alphabet_(alphabet), workers_(workers) {
  if (params_.dims.gamma != alphabet_.size() + 1) {
    throw ConfigError("encoder character table has " + std::to_string(params_.dims.gamma) +
                      " rows but the alphabet needs " + std::to_string(alphabet_.size() + 1));
  }
}

std::vector<Embedding> CharEncoder::encode_batch(std::span<const Sentence> batch) const {
  std::vector<Embedding> out(batch.size());
  // Thread start-up dominates for small batches.
  const std::size_t workers = batch.size() >= 64 ? workers_ : 1;
  parallel_for(batch.size(), workers,
               [&](std::size_t i) { out[i] = leaf::encode(params_, alphabet_, batch[i]); });
  return out;
}

}  // namespace leaf
