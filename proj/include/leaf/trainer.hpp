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
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "leaf/encoder.hpp"
#include "leaf/lexicon.hpp"
#include "leaf/textspace.hpp"

namespace leaf {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t k = 1;
  std::size_t rho = 20;
  bool constrained = false;
  double lr_max = 1e-2;
  std::size_t warmup_steps = 100;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  char32_t test_char = U' ';
  bool include_deletion = true;
  std::size_t workers = 1;

  // Small-corpus defaults.
  static TrainConfig desk();
  // Batch 128, k = 1, rho = 50, lr 1e-5, warmup 1400, 30 epochs.
  static TrainConfig paper();

  void validate() const;
  nlohmann::ordered_json to_json() const;
};

struct OptimizerState {
  EncoderGrads m;  // first moment
  EncoderGrads v;  // second moment
  std::size_t t = 0;

  static OptimizerState zeros_like(const EncoderParams& params);
};

// Mean over the batch of |reference_i - perturbed_i|^2.
double textfare_loss(std::span<const Embedding> reference, std::span<const Embedding> perturbed);

// Frozen encoder on the clean side, trainable encoder on the perturbed side.
double textfare_loss(const EncoderParams& frozen, const EncoderParams& trainable,
                     const Alphabet& alphabet, std::span<const Sentence> clean,
                     std::span<const Sentence> perturbed);

// One AdamW update of a single tensor with decoupled weight decay. `step` is the
// already-incremented step counter.
void adamw_update(std::span<float> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::size_t step, double lr, const TrainConfig& cfg);

// Increments state.t and updates every tensor. Throws NumericError naming the
// first non-finite gradient entry; params are left untouched in that case.
void adamw_step(EncoderParams& params, const EncoderGrads& grads, OptimizerState& state,
                double lr, const TrainConfig& cfg);

// Linear warmup from 0 to lr_max, then half-cosine decay to 0 at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct TrainHooks {
  // Called with the parameter set behind every encoder call the inner attack makes.
  std::function<void(const EncoderParams&)> on_attack_call;
  // Called after every optimizer step with (global step, batch mean loss).
  std::function<void(std::size_t, double)> on_step;
};

struct TrainResult {
  EncoderParams params;
  std::vector<double> epoch_loss;  // mean per-sample loss of each epoch
  std::size_t steps = 0;
};

// Adversarial finetuning: each batch is attacked with LEAF against the current
// trainable encoder (objective: squared distance to the frozen clean
// embedding), then the same distance is minimized with AdamW.
TrainResult train(std::span<const Sentence> dataset, const TrainConfig& cfg,
                  const EncoderParams& frozen, const EncoderParams& init, const Alphabet& alphabet,
                  const Lexicon* lexicon = nullptr, const TrainHooks& hooks = {});

// Writes `params` to `path` and {epoch, step, cfg, loss} to `path`.json.
void write_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                      std::size_t epoch, std::size_t step, const TrainConfig& cfg, double loss);

}  // namespace leaf
