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

#include "leaf/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

#include "leaf/error.hpp"
#include "leaf/random.hpp"

namespace leaf {

void AnchorSet::validate() const {
  if (anchors.size() < 2) throw ConfigError("anchor set needs at least 2 anchors");
  if (!labels.empty() && labels.size() != anchors.size()) {
    throw ConfigError("anchor labels and vectors differ in count");
  }
  for (const auto& a : anchors) {
    if (a.size() != anchors.front().size()) throw ConfigError("anchors differ in dimension");
    if (!cosine_sim(a, a)) throw ConfigError("anchor with zero norm");
  }
}

std::size_t predict_from_embedding(const Embedding& embedding, const AnchorSet& anchors) {
  std::size_t best = 0;
  double best_sim = -2.0;
  for (std::size_t j = 0; j < anchors.size(); ++j) {
    const auto sim = cosine_sim(embedding, anchors.anchors[j]);
    if (!sim) throw ConfigError("zero-norm embedding: similarity undefined");
    if (*sim > best_sim) {
      best_sim = *sim;
      best = j;
    }
  }
  return best;
}

std::size_t zero_shot_predict(const TextEncoder& encoder, const Sentence& s,
                              const AnchorSet& anchors) {
  return predict_from_embedding(encoder.encode(s), anchors);
}

ZeroShotReport evaluate_zero_shot(std::span<const LabeledSentence> dataset,
                                  const TextEncoder& encoder, const AnchorSet& anchors,
                                  AttackKind attack, const AttackConfig& cfg,
                                  const Alphabet& alphabet, const Lexicon* lexicon,
                                  double logit_scale) {
  anchors.validate();
  if (dataset.empty()) throw ConfigError("evaluation dataset is empty");
  ZeroShotReport report;
  report.samples.resize(dataset.size());

  std::vector<Sentence> texts;
  for (const auto& d : dataset) texts.push_back(d.text);
  const auto clean = encoder.encode_batch(texts);

  std::vector<std::size_t> to_attack;
  std::vector<Sentence> attack_inputs;
  std::vector<AttackObjective> objectives;
  std::size_t clean_correct = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto& sample = report.samples[i];
    sample.label = dataset[i].label;
    sample.clean_prediction = predict_from_embedding(clean[i], anchors);
    sample.adversarial_prediction = sample.clean_prediction;
    sample.adversarial_text = dataset[i].text;
    if (sample.clean_prediction == sample.label) {
      ++clean_correct;
      to_attack.push_back(i);
      attack_inputs.push_back(dataset[i].text);
      objectives.push_back(
          AttackObjective::classification_ce(anchors.anchors, dataset[i].label, logit_scale));
    }
  }

  const auto attacked = run_attack(attack, encoder, attack_inputs, objectives, alphabet, cfg, lexicon);
  // Every intermediate sentence on an attack path is a valid adversarial
  // example too; the first misclassified one is reported.
  std::vector<Sentence> visited;
  std::vector<std::size_t> first_visited(attacked.size() + 1);
  for (std::size_t j = 0; j < attacked.size(); ++j) {
    first_visited[j] = visited.size();
    const auto& path = attacked[j].path;
    for (std::size_t t = 1; t < path.size(); ++t) visited.push_back(path[t]);
    if (path.size() <= 1 || path.back() != attacked[j].output) visited.push_back(attacked[j].output);
  }
  first_visited[attacked.size()] = visited.size();
  const auto adv = encoder.encode_batch(visited);
  std::size_t robust = 0;
  for (std::size_t j = 0; j < to_attack.size(); ++j) {
    auto& sample = report.samples[to_attack[j]];
    for (std::size_t v = first_visited[j]; v < first_visited[j + 1]; ++v) {
      sample.adversarial_text = visited[v];
      sample.adversarial_prediction = predict_from_embedding(adv[v], anchors);
      if (sample.adversarial_prediction != sample.label) break;
    }
    if (sample.adversarial_prediction == sample.label) ++robust;
  }
  const auto n = static_cast<double>(dataset.size());
  report.clean_accuracy = static_cast<double>(clean_correct) / n;
  report.adversarial_accuracy = static_cast<double>(robust) / n;
  return report;
}

double adversarial_accuracy(std::span<const LabeledSentence> dataset, const TextEncoder& encoder,
                            const AnchorSet& anchors, AttackKind attack, const AttackConfig& cfg,
                            const Alphabet& alphabet, const Lexicon* lexicon,
                            double logit_scale) {
  return evaluate_zero_shot(dataset, encoder, anchors, attack, cfg, alphabet, lexicon, logit_scale)
      .adversarial_accuracy;
}

// ---------------------------------------------------------------------------
// Retrieval

void RetrievalGallery::validate() const {
  if (ids.size() != items.size()) throw ConfigError("gallery ids and items differ in count");
  std::set<std::string> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) throw ConfigError("gallery item ids are not unique");
  for (const auto& p : pairing) {
    if (unique.count(p) == 0) throw ConfigError("pairing names unknown gallery item '" + p + "'");
  }
}

std::size_t RetrievalGallery::index_of(const std::string& id) const {
  const auto it = std::find(ids.begin(), ids.end(), id);
  if (it == ids.end()) throw ConfigError("unknown gallery item '" + id + "'");
  return static_cast<std::size_t>(it - ids.begin());
}

double recall_at_k(std::span<const Embedding> query_embeddings, const RetrievalGallery& gallery,
                   std::size_t k) {
  if (k < 1) throw ConfigError("recall@k needs k >= 1");
  gallery.validate();
  if (query_embeddings.size() != gallery.pairing.size()) {
    throw ConfigError("every query needs a paired gallery item");
  }
  if (query_embeddings.empty()) return 0.0;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gallery.ids.size(); ++i) index.emplace(gallery.ids[i], i);

  constexpr double kUndefined = -2.0;
  std::size_t hits = 0;
  for (std::size_t q = 0; q < query_embeddings.size(); ++q) {
    const std::size_t target = index.at(gallery.pairing[q]);
    const double target_sim = cosine_sim(query_embeddings[q], gallery.items[target]).value_or(kUndefined);
    std::size_t ahead = 0;
    for (std::size_t j = 0; j < gallery.items.size() && ahead < k; ++j) {
      if (j == target) continue;
      const double sim = cosine_sim(query_embeddings[q], gallery.items[j]).value_or(kUndefined);
      if (sim > target_sim || (sim == target_sim && j < target)) ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(query_embeddings.size());
}

double recall_at_k(std::span<const Sentence> queries, const TextEncoder& encoder,
                   const RetrievalGallery& gallery, std::size_t k) {
  return recall_at_k(encoder.encode_batch(queries), gallery, k);
}

AttackResult retrieval_attack(const Sentence& query, const Sentence& target_text,
                              const TextEncoder& encoder, const Alphabet& alphabet,
                              AttackKind attack, const AttackConfig& cfg, const Lexicon* lexicon) {
  const std::vector<AttackObjective> objective{
      AttackObjective::target_similarity(encoder.encode(target_text))};
  const std::vector<Sentence> batch{query};
  return run_attack(attack, encoder, batch, objective, alphabet, cfg, lexicon).front();
}

// ---------------------------------------------------------------------------
// Inversion

InversionResult invert_embedding(const Embedding& target, const TextEncoder& encoder,
                                 const Alphabet& alphabet, const InversionConfig& cfg) {
  if (cfg.steps < 1) throw ConfigError("inversion needs at least one step");
  if (cfg.max_length < 1) throw ConfigError("inversion max_length must be >= 1");
  constexpr double kUndefined = -2.0;
  auto similarities = [&](std::span<const Sentence> batch) {
    const auto embeddings = encoder.encode_batch(batch);
    std::vector<double> sims(embeddings.size());
    for (std::size_t i = 0; i < sims.size(); ++i) {
      sims[i] = cosine_sim(embeddings[i], target).value_or(kUndefined);
    }
    return sims;
  };

  InversionResult result;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(cfg.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(cfg.seed, r, 0x696E76ULL);
    Sentence current;
    if (r == 0 && cfg.init) {
      current = *cfg.init;
    } else {
      const std::size_t len = 1 + rng.below(cfg.max_length);
      for (std::size_t i = 0; i < len; ++i) current.push_back(alphabet.chars()[rng.below(alphabet.size())]);
    }
    const std::vector<Sentence> start{current};
    double current_sim = similarities(start).front();
    std::vector<double> trace{current_sim};

    for (std::size_t step = 0; step < cfg.steps; ++step) {
      std::vector<Sentence> candidates;
      for (auto& c : enumerate_edits(current, alphabet)) {
        if (c.size() <= cfg.max_length) candidates.push_back(std::move(c));
      }
      const bool subsampled = cfg.rho > 0 && candidates.size() > cfg.rho;
      if (subsampled) {
        rng.partial_shuffle(std::span<Sentence>(candidates), cfg.rho);
        candidates.resize(cfg.rho);
      }
      if (candidates.empty()) break;
      const auto sims = similarities(candidates);
      const auto best = static_cast<std::size_t>(std::max_element(sims.begin(), sims.end()) - sims.begin());
      if (sims[best] > current_sim) {
        current = std::move(candidates[best]);
        current_sim = sims[best];
        trace.push_back(current_sim);
      } else if (!subsampled) {
        break;  // local optimum over the full neighbourhood
      }
    }
    if (!have_best || current_sim > result.similarity) {
      result.sentence = current;
      result.similarity = current_sim;
      have_best = true;
    }
    result.traces.push_back(std::move(trace));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reconstruction metrics

std::vector<Sentence> split_words(std::u32string_view s) {
  std::vector<Sentence> out;
  Sentence cur;
  auto is_space = [](char32_t c) {
    return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v';
  };
  for (char32_t c : s) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

double unit_recall(const std::vector<Sentence>& ref_units, const std::vector<Sentence>& hyp_units) {
  const std::unordered_set<Sentence> ref(ref_units.begin(), ref_units.end());
  if (ref.empty()) return 1.0;
  const std::unordered_set<Sentence> hyp(hyp_units.begin(), hyp_units.end());
  std::size_t found = 0;
  for (const auto& u : ref) found += hyp.count(u);
  return static_cast<double>(found) / static_cast<double>(ref.size());
}

std::vector<Sentence> char_trigrams(std::u32string_view s) {
  std::vector<Sentence> out;
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) out.emplace_back(s.substr(i, 3));
  return out;
}

std::map<std::vector<Sentence>, std::size_t> ngram_counts(const std::vector<Sentence>& words,
                                                          std::size_t n) {
  std::map<std::vector<Sentence>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[std::vector<Sentence>(words.begin() + static_cast<std::ptrdiff_t>(i),
                                   words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double word_recall(std::u32string_view reference, std::u32string_view hypothesis) {
  return unit_recall(split_words(reference), split_words(hypothesis));
}

double token_recall(std::u32string_view reference, std::u32string_view hypothesis) {
  return unit_recall(char_trigrams(reference), char_trigrams(hypothesis));
}

double bleu(std::u32string_view reference, std::u32string_view hypothesis, std::size_t max_n) {
  const auto ref = split_words(reference);
  const auto hyp = split_words(hypothesis);
  if (ref.empty()) return hyp.empty() ? 1.0 : 0.0;
  if (hyp.empty()) return 0.0;
  const std::size_t order = std::min(std::max<std::size_t>(max_n, 1), ref.size());
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    const auto ref_counts = ngram_counts(ref, n);
    const auto hyp_counts = ngram_counts(hyp, n);
    std::size_t matched = 0, total = 0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      const auto it = ref_counts.find(gram);
      if (it != ref_counts.end()) matched += std::min(count, it->second);
    }
    const double precision =
        matched == 0 ? kBleuFloor : static_cast<double>(matched) / static_cast<double>(total);
    log_sum += std::log(precision);
  }
  const double r = static_cast<double>(ref.size());
  const double c = static_cast<double>(hyp.size());
  const double brevity = std::min(1.0, std::exp(1.0 - r / c));
  return std::clamp(brevity * std::exp(log_sum / static_cast<double>(order)), 0.0, 1.0);
}

}  // namespace leaf
