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

#include "leaf/trainer.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "leaf/attacks.hpp"
#include "leaf/error.hpp"
#include "leaf/random.hpp"
#include "leaf/utf8.hpp"

namespace leaf {

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::paper() {
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 128;
  cfg.k = 1;
  cfg.rho = 50;
  cfg.lr_max = 1e-5;
  cfg.warmup_steps = 1400;
  cfg.weight_decay = 1e-4;
  return cfg;
}

void TrainConfig::validate() const {
  if (!(lr_max > 0.0)) throw ConfigError("lr_max must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (rho == 0) throw ConfigError("rho must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["k"] = k;
  j["rho"] = rho;
  j["constrained"] = constrained;
  j["lr_max"] = lr_max;
  j["warmup_steps"] = warmup_steps;
  j["weight_decay"] = weight_decay;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["eps"] = eps;
  j["seed"] = seed;
  j["test_char"] = utf8::encode(test_char);
  j["include_deletion"] = include_deletion;
  return j;
}

OptimizerState OptimizerState::zeros_like(const EncoderParams& params) {
  return {EncoderGrads::zeros_like(params), EncoderGrads::zeros_like(params), 0};
}

double textfare_loss(std::span<const Embedding> reference, std::span<const Embedding> perturbed) {
  if (reference.size() != perturbed.size()) {
    throw ConfigError("clean and perturbed batches differ in size");
  }
  if (reference.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    double sq = 0.0;
    for (std::size_t d = 0; d < reference[i].size(); ++d) {
      const double diff = reference[i][d] - perturbed[i][d];
      sq += diff * diff;
    }
    total += sq;
  }
  return total / static_cast<double>(reference.size());
}

double textfare_loss(const EncoderParams& frozen, const EncoderParams& trainable,
                     const Alphabet& alphabet, std::span<const Sentence> clean,
                     std::span<const Sentence> perturbed) {
  if (clean.size() != perturbed.size()) {
    throw ConfigError("clean and perturbed batches differ in size");
  }
  std::vector<Embedding> ref, pert;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    ref.push_back(encode(frozen, alphabet, clean[i]));
    pert.push_back(encode(trainable, alphabet, perturbed[i]));
  }
  return textfare_loss(ref, pert);
}

void adamw_update(std::span<float> theta, std::span<const double> grad, std::span<double> m,
                  std::span<double> v, std::size_t step, double lr, const TrainConfig& cfg) {
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    const double w = theta[i];
    theta[i] = static_cast<float>(w - lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                                            cfg.weight_decay * w));
  }
}

void adamw_step(EncoderParams& params, const EncoderGrads& grads, OptimizerState& state,
                double lr, const TrainConfig& cfg) {
  grads.for_each_tensor([](const char* name, const std::vector<double>& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        std::ostringstream msg;
        msg << "non-finite gradient " << g[i] << " in tensor " << name << " at index " << i;
        throw NumericError(msg.str());
      }
    }
  });
  state.t += 1;
  adamw_update(params.E, grads.E, state.m.E, state.v.E, state.t, lr, cfg);
  adamw_update(params.B, grads.B, state.m.B, state.v.B, state.t, lr, cfg);
  adamw_update(params.W1, grads.W1, state.m.W1, state.v.W1, state.t, lr, cfg);
  adamw_update(params.b1, grads.b1, state.m.b1, state.v.b1, state.t, lr, cfg);
  adamw_update(params.W2, grads.W2, state.m.W2, state.v.W2, state.t, lr, cfg);
  adamw_update(params.b2, grads.b2, state.m.b2, state.v.b2, state.t, lr, cfg);
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (step >= total_steps) return 0.0;
  if (step < cfg.warmup_steps) {
    return cfg.lr_max * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double span = static_cast<double>(total_steps - cfg.warmup_steps);
  const double progress = static_cast<double>(step - cfg.warmup_steps) / span;
  return cfg.lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

// Reports every batched call to the hook, then forwards.
class ObservedEncoder : public TextEncoder {
 public:
  ObservedEncoder(const CharEncoder& inner, const std::function<void(const EncoderParams&)>& hook)
      : inner_(inner), hook_(hook) {}

  std::size_t embedding_dim() const override { return inner_.embedding_dim(); }

  std::vector<Embedding> encode_batch(std::span<const Sentence> batch) const override {
    if (hook_) hook_(inner_.params());
    return inner_.encode_batch(batch);
  }

 private:
  const CharEncoder& inner_;
  const std::function<void(const EncoderParams&)>& hook_;
};

}  // namespace

TrainResult train(std::span<const Sentence> dataset, const TrainConfig& cfg,
                  const EncoderParams& frozen, const EncoderParams& init, const Alphabet& alphabet,
                  const Lexicon* lexicon, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  if (!(frozen.dims == init.dims)) throw ConfigError("frozen and initial encoders differ in shape");
  if (cfg.constrained && lexicon == nullptr) throw ConfigError("constrained training needs a lexicon");

  TrainResult result{init, {}, 0};
  EncoderParams& params = result.params;
  OptimizerState state = OptimizerState::zeros_like(params);

  // The frozen encoder never changes, so its clean embeddings are computed once.
  const CharEncoder frozen_encoder(frozen, alphabet, cfg.workers);
  const std::vector<Embedding> reference = frozen_encoder.encode_batch(dataset);

  const std::size_t n = dataset.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  AttackConfig attack_cfg;
  attack_cfg.k = cfg.k;
  attack_cfg.rho = cfg.rho;
  attack_cfg.constrained = cfg.constrained;
  attack_cfg.test_char = cfg.test_char;
  attack_cfg.include_deletion = cfg.include_deletion;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::stream(cfg.seed, 0x5348554646ULL, epoch);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<Sentence> clean;
      std::vector<AttackObjective> objectives;
      for (std::size_t j = begin; j < end; ++j) {
        clean.push_back(dataset[order[j]]);
        objectives.push_back(AttackObjective::embed_distance(reference[order[j]]));
      }

      attack_cfg.seed = mix64(cfg.seed, global_step);
      const CharEncoder trainable(params, alphabet, cfg.workers);
      const ObservedEncoder observed(trainable, hooks.on_attack_call);
      const auto attacked = leaf_attack(observed, clean, objectives, alphabet, attack_cfg, lexicon);

      const double inv_batch = 1.0 / static_cast<double>(clean.size());
      EncoderGrads grads = EncoderGrads::zeros_like(params);
      double batch_total = 0.0;
      for (std::size_t i = 0; i < clean.size(); ++i) {
        const Embedding& ref = reference[order[begin + i]];
        const Embedding out = encode(params, alphabet, attacked[i].output);
        std::vector<double> grad_out(out.size());
        double sq = 0.0;
        for (std::size_t d = 0; d < out.size(); ++d) {
          const double diff = out[d] - ref[d];
          sq += diff * diff;
          grad_out[d] = 2.0 * diff * inv_batch;
        }
        batch_total += sq;
        accumulate_backward(params, alphabet, attacked[i].output, grad_out, grads);
      }
      ++global_step;
      adamw_step(params, grads, state, lr_at(global_step, total_steps, cfg), cfg);
      epoch_total += batch_total;
      if (hooks.on_step) hooks.on_step(global_step, batch_total * inv_batch);
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(n));
  }
  result.steps = global_step;
  return result;
}

void write_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                      std::size_t epoch, std::size_t step, const TrainConfig& cfg, double loss) {
  params.save(path);
  nlohmann::ordered_json sidecar;
  sidecar["epoch"] = epoch;
  sidecar["step"] = step;
  sidecar["cfg"] = cfg.to_json();
  sidecar["loss"] = loss;
  std::ofstream out(path.string() + ".json", std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint sidecar for " + path.string());
  out << sidecar.dump(2) << '\n';
}

}  // namespace leaf
