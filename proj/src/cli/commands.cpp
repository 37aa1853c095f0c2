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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "leaf/attacks.hpp"
#include "leaf/cli.hpp"
#include "leaf/dataio.hpp"
#include "leaf/encoder.hpp"
#include "leaf/error.hpp"
#include "leaf/evalsuite.hpp"
#include "leaf/lexicon.hpp"
#include "leaf/random.hpp"
#include "leaf/textspace.hpp"
#include "leaf/trainer.hpp"
#include "leaf/utf8.hpp"

namespace leaf::cli {
namespace {

using nlohmann::ordered_json;

struct Common {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string alphabet;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool seed_required) {
  auto* seed = cmd->add_option("--seed", c.seed, "Seed for every random choice");
  if (seed_required) seed->required();
  cmd->add_option("--workers", c.workers, "Threads used to score candidates")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--alphabet", c.alphabet, "Alphabet file (default: a-z, space, '.', ',', '?')");
  cmd->add_option("--out", c.out, "Output path (default: stdout)");
}

struct AttackFlags {
  std::string objective = "embed-dist";
  std::string attack = "leaf";
  std::size_t k = 1;
  std::size_t rho = 20;
  std::size_t n = 20;
  bool constrained = false;
  std::string lexicon;
  std::string test_char = " ";
  bool no_deletion = false;
  std::size_t budget = AttackConfig{}.budget;
};

void add_attack_flags(CLI::App* cmd, AttackFlags& f, bool with_objective) {
  if (with_objective) {
    cmd->add_option("--objective", f.objective, "embed-dist | neg-sim | target-sim | class-ce")
        ->check(CLI::IsMember({"embed-dist", "neg-sim", "target-sim", "class-ce"}));
  }
  cmd->add_option("--attack", f.attack, "leaf | charmer | bruteforce")
      ->check(CLI::IsMember({"leaf", "charmer", "bruteforce"}));
  cmd->add_option("--k", f.k, "Levenshtein radius");
  cmd->add_option("--rho", f.rho, "LEAF candidates per stage")->check(CLI::PositiveNumber);
  cmd->add_option("--n", f.n, "Charmer positions kept")->check(CLI::PositiveNumber);
  cmd->add_flag("--constrained", f.constrained, "Only keep edits that remove no English word");
  cmd->add_option("--lexicon", f.lexicon, "Word list for --constrained");
  cmd->add_option("--test-char", f.test_char, "Character probed in the position stage");
  cmd->add_flag("--no-deletion", f.no_deletion, "Exclude deletions from the character pool");
  cmd->add_option("--budget", f.budget, "Brute-force candidate cap");
}

char32_t single_char(const std::string& s, const char* flag) {
  const auto decoded = utf8::decode(s);
  if (decoded.size() != 1) throw ConfigError(std::string(flag) + " must be exactly one character");
  return decoded.front();
}

AttackConfig attack_config(const AttackFlags& f, std::uint64_t seed) {
  AttackConfig cfg;
  cfg.k = f.k;
  cfg.rho = f.rho;
  cfg.charmer_n = f.n;
  cfg.constrained = f.constrained;
  cfg.test_char = single_char(f.test_char, "--test-char");
  cfg.include_deletion = !f.no_deletion;
  cfg.seed = seed;
  cfg.budget = f.budget;
  return cfg;
}

ordered_json attack_config_json(const AttackFlags& f, const AttackConfig& cfg) {
  ordered_json j;
  j["attack"] = f.attack;
  j["k"] = cfg.k;
  j["rho"] = cfg.rho;
  j["n"] = cfg.charmer_n;
  j["constrained"] = cfg.constrained;
  j["test_char"] = utf8::encode(cfg.test_char);
  j["include_deletion"] = cfg.include_deletion;
  j["seed"] = cfg.seed;
  return j;
}

// Every option of `cmd` except output location, worker count and help, as
// given on the command line or defaulted.
ordered_json flag_snapshot(const CLI::App* cmd) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name == "--workers" || name == "--out" || name == "--trace") continue;
    const bool is_flag = opt->get_expected_max() == 0 || opt->get_type_size() == 0;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (is_flag) {
        j[name] = true;
      } else if (results.size() == 1) {
        j[name] = results.front();
      } else {
        j[name] = results;
      }
    } else if (is_flag) {
      j[name] = false;
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

RunManifest manifest_for(const CLI::App* cmd, const Common& c) {
  std::string path = cmd->get_name();
  for (const CLI::App* p = cmd->get_parent(); p != nullptr && p->get_parent() != nullptr;
       p = p->get_parent()) {
    path = p->get_name() + " " + path;
  }
  RunManifest m(path);
  m.set_config(flag_snapshot(cmd));
  m.add_seed("seed", c.seed);
  return m;
}

Alphabet load_alphabet(const Common& c, RunManifest& m) {
  if (c.alphabet.empty()) return Alphabet::standard();
  m.add_input("alphabet", c.alphabet);
  return Alphabet::load(c.alphabet);
}

EncoderParams load_encoder(const std::string& path, const Alphabet& alphabet, RunManifest& m,
                           const char* role = "encoder") {
  if (path.empty()) throw ConfigError(std::string("--") + role + " is required");
  m.add_input(role, path);
  return EncoderParams::load(path, alphabet);
}

std::optional<Lexicon> load_lexicon(const AttackFlags& f, RunManifest& m) {
  if (f.constrained && f.lexicon.empty()) throw ConfigError("--constrained requires --lexicon");
  if (f.lexicon.empty()) return std::nullopt;
  m.add_input("lexicon", f.lexicon);
  return Lexicon::load(f.lexicon);
}

std::vector<TextRecord> load_records(const std::string& path, RunManifest& m, const char* role) {
  if (path.empty()) throw ConfigError(std::string("--") + role + " is required");
  m.add_input(role, path);
  auto records = load_jsonl(path);
  if (records.empty()) throw ConfigError(path + " holds no records");
  return records;
}

void emit(const ordered_json& report, const std::string& path, std::ostream& out) {
  const std::string text = report.dump(2) + "\n";
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

// Class anchors from an embedding store or from a JSON array of label texts.
AnchorSet load_anchors(const std::string& store, const std::string& labels, const TextEncoder& enc,
                       RunManifest& m) {
  if (store.empty() == labels.empty()) throw ConfigError("give exactly one of --anchors or --labels");
  AnchorSet set;
  if (!store.empty()) {
    m.add_input("anchors", store);
    const auto s = read_store(store);
    for (std::size_t i = 0; i < s.count; ++i) {
      set.labels.push_back(std::to_string(i));
      set.anchors.push_back(s.embedding(i));
    }
  } else {
    m.add_input("labels", labels);
    std::ifstream in(labels, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + labels);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(labels + ": " + e.what());
    }
    if (!j.is_array()) throw FormatError(labels + ": expected a JSON array of label texts");
    std::vector<Sentence> texts;
    for (const auto& item : j) {
      if (!item.is_string()) throw FormatError(labels + ": label texts must be strings");
      set.labels.push_back(item.get<std::string>());
      texts.push_back(utf8::decode(set.labels.back()));
    }
    set.anchors = enc.encode_batch(texts);
  }
  if (set.anchors.size() >= 1 && set.anchors.front().size() != enc.embedding_dim()) {
    throw ConfigError("anchor dimension does not match the encoder");
  }
  set.validate();
  return set;
}

std::size_t require_label(const TextRecord& r, std::size_t index, std::size_t classes) {
  if (!r.label) throw ConfigError("record " + std::to_string(index + 1) + " has no label");
  if (*r.label >= classes) {
    throw ConfigError("record " + std::to_string(index + 1) + " has label " +
                      std::to_string(*r.label) + " but only " + std::to_string(classes) +
                      " classes exist");
  }
  return *r.label;
}

// One target per record, or a single target shared by all.
std::vector<Sentence> broadcast_targets(const std::vector<TextRecord>& targets, std::size_t n) {
  if (targets.size() != 1 && targets.size() != n) {
    throw ConfigError("--targets must hold one record or one per input");
  }
  std::vector<Sentence> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(targets[targets.size() == 1 ? 0 : i].text);
  return out;
}

struct ObjectiveSources {
  std::string targets;
  std::string anchors;
  std::string labels;
};

std::vector<AttackObjective> build_objectives(const std::string& kind,
                                              const std::vector<TextRecord>& records,
                                              const ObjectiveSources& src, const TextEncoder& enc,
                                              RunManifest& m) {
  const auto texts = texts_of(records);
  std::vector<AttackObjective> objs;
  if (kind == "embed-dist" || kind == "neg-sim") {
    for (auto& e : enc.encode_batch(texts)) {
      objs.push_back(kind == "embed-dist" ? AttackObjective::embed_distance(std::move(e))
                                          : AttackObjective::neg_self_similarity(std::move(e)));
    }
  } else if (kind == "target-sim") {
    if (src.targets.empty()) throw ConfigError("--objective target-sim requires --targets");
    const auto targets = broadcast_targets(load_records(src.targets, m, "targets"), records.size());
    for (auto& e : enc.encode_batch(targets)) objs.push_back(AttackObjective::target_similarity(std::move(e)));
  } else {
    const AnchorSet anchors = load_anchors(src.anchors, src.labels, enc, m);
    for (std::size_t i = 0; i < records.size(); ++i) {
      objs.push_back(AttackObjective::classification_ce(anchors.anchors,
                                                        require_label(records[i], i, anchors.size())));
    }
  }
  return objs;
}

double final_score(const AttackResult& r, const AttackObjective& obj, const TextEncoder& enc) {
  return r.score ? *r.score : obj.score(enc.encode(r.output));
}

double mean(const std::vector<double>& xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  return xs.empty() ? 0.0 : total / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------

struct AttackCmd {
  Common common;
  AttackFlags flags;
  std::string input, encoder;
  ObjectiveSources sources;
};

int cmd_attack(const CLI::App* app, const AttackCmd& a, std::ostream& out) {
  RunManifest m = manifest_for(app, a.common);
  const Alphabet alphabet = load_alphabet(a.common, m);
  const auto records = load_records(a.input, m, "input");
  const EncoderParams params = load_encoder(a.encoder, alphabet, m);
  const CharEncoder enc(params, alphabet, a.common.workers);
  const auto lexicon = load_lexicon(a.flags, m);
  const AttackConfig cfg = attack_config(a.flags, a.common.seed);
  const auto objectives = build_objectives(a.flags.objective, records, a.sources, enc, m);
  const auto texts = texts_of(records);
  const auto results = run_attack(parse_attack_kind(a.flags.attack), enc, texts, objectives,
                                  alphabet, cfg, lexicon ? &*lexicon : nullptr);

  ordered_json report;
  report["task"] = "attack";
  report["objective"] = a.flags.objective;
  report["attack_cfg"] = attack_config_json(a.flags, cfg);
  report["results"] = ordered_json::array();
  for (const auto& r : results) report["results"].push_back(attack_report(r, a.flags.objective, cfg.seed));
  report["manifest"] = m.to_json();
  emit(report, a.common.out, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainCmd {
  Common common;
  std::string data, frozen, init, preset = "desk", lexicon, trace;
  std::optional<std::size_t> epochs, batch_size, k, rho, warmup;
  std::optional<double> lr, weight_decay;
  bool constrained = false;
};

int cmd_train(const CLI::App* app, const TrainCmd& t, std::ostream& out) {
  if (t.common.out.empty()) throw ConfigError("train needs --out for the checkpoint");
  if (t.init.empty()) throw ConfigError("--init is required (a checkpoint path or 'fresh')");
  RunManifest m = manifest_for(app, t.common);
  const Alphabet alphabet = load_alphabet(t.common, m);
  const auto records = load_records(t.data, m, "data");
  const EncoderParams frozen = load_encoder(t.frozen, alphabet, m, "frozen");
  const EncoderParams init = t.init == "fresh"
                                 ? EncoderParams::init(mix64(t.common.seed, 0x696E6974ULL), frozen.dims)
                                 : load_encoder(t.init, alphabet, m, "init");

  TrainConfig cfg = t.preset == "paper" ? TrainConfig::paper() : TrainConfig::desk();
  if (t.epochs) cfg.epochs = *t.epochs;
  if (t.batch_size) cfg.batch_size = *t.batch_size;
  if (t.k) cfg.k = *t.k;
  if (t.rho) cfg.rho = *t.rho;
  if (t.warmup) cfg.warmup_steps = *t.warmup;
  if (t.lr) cfg.lr_max = *t.lr;
  if (t.weight_decay) cfg.weight_decay = *t.weight_decay;
  cfg.constrained = t.constrained;
  cfg.seed = t.common.seed;
  cfg.workers = t.common.workers;
  cfg.validate();

  AttackFlags lex_flags;
  lex_flags.constrained = t.constrained;
  lex_flags.lexicon = t.lexicon;
  const auto lexicon = load_lexicon(lex_flags, m);

  std::vector<double> step_loss;
  TrainHooks hooks;
  hooks.on_step = [&](std::size_t, double loss) { step_loss.push_back(loss); };
  const auto texts = texts_of(records);
  const TrainResult result =
      train(texts, cfg, frozen, init, alphabet, lexicon ? &*lexicon : nullptr, hooks);

  const double last = result.epoch_loss.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : result.epoch_loss.back();
  write_checkpoint(t.common.out, result.params, cfg.epochs, result.steps, cfg, last);

  ordered_json trace;
  trace["task"] = "train";
  trace["config"] = cfg.to_json();
  trace["steps"] = result.steps;
  trace["epoch_loss"] = result.epoch_loss;
  trace["step_loss"] = step_loss;
  trace["manifest"] = m.to_json();
  const std::string trace_path = t.trace.empty() ? t.common.out + ".trace.json" : t.trace;
  emit(trace, trace_path, out);

  ordered_json summary;
  summary["checkpoint"] = t.common.out;
  summary["trace"] = trace_path;
  summary["steps"] = result.steps;
  summary["final_epoch_loss"] = last;
  out << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ZeroShotCmd {
  Common common;
  AttackFlags flags;
  std::string input, encoder, anchors, labels;
  bool per_sample = false;
};

int cmd_zeroshot(const CLI::App* app, const ZeroShotCmd& z, std::ostream& out) {
  RunManifest m = manifest_for(app, z.common);
  const Alphabet alphabet = load_alphabet(z.common, m);
  const auto records = load_records(z.input, m, "input");
  const EncoderParams params = load_encoder(z.encoder, alphabet, m);
  const CharEncoder enc(params, alphabet, z.common.workers);
  const AnchorSet anchors = load_anchors(z.anchors, z.labels, enc, m);
  const auto lexicon = load_lexicon(z.flags, m);
  const AttackConfig cfg = attack_config(z.flags, z.common.seed);

  std::vector<LabeledSentence> data;
  for (std::size_t i = 0; i < records.size(); ++i) {
    data.push_back({records[i].text, require_label(records[i], i, anchors.size())});
  }
  const auto r = evaluate_zero_shot(data, enc, anchors, parse_attack_kind(z.flags.attack), cfg,
                                    alphabet, lexicon ? &*lexicon : nullptr);

  ordered_json report;
  report["task"] = "zeroshot";
  report["model_checkpoint"] = z.encoder;
  report["attack_cfg"] = attack_config_json(z.flags, cfg);
  report["metrics"] = {{"clean", r.clean_accuracy}, {"adv", r.adversarial_accuracy}};
  if (z.per_sample) {
    report["per_sample"] = ordered_json::array();
    for (const auto& s : r.samples) {
      ordered_json e;
      e["label"] = s.label;
      e["clean_prediction"] = s.clean_prediction;
      e["adv_prediction"] = s.adversarial_prediction;
      e["adv_text"] = utf8::encode(s.adversarial_text);
      report["per_sample"].push_back(std::move(e));
    }
  }
  report["seed"] = z.common.seed;
  report["manifest"] = m.to_json();
  emit(report, z.common.out, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct RetrievalCmd {
  Common common;
  AttackFlags flags;
  std::string input, encoder, gallery, targets;
  std::size_t metric_k = 1;
  bool pair_by_label = false;
};

int cmd_retrieval(const CLI::App* app, const RetrievalCmd& rc, std::ostream& out) {
  RunManifest m = manifest_for(app, rc.common);
  const Alphabet alphabet = load_alphabet(rc.common, m);
  const auto records = load_records(rc.input, m, "input");
  const EncoderParams params = load_encoder(rc.encoder, alphabet, m);
  const CharEncoder enc(params, alphabet, rc.common.workers);
  if (rc.gallery.empty()) throw ConfigError("--gallery is required");
  m.add_input("gallery", rc.gallery);
  const EmbeddingStore store = read_store(rc.gallery);
  if (store.count > 0 && store.dim != enc.embedding_dim()) {
    throw ConfigError("gallery dimension does not match the encoder");
  }

  // Query i is paired with gallery row i, or with row `label` under --pair-by-label.
  RetrievalGallery gallery;
  for (std::size_t i = 0; i < store.count; ++i) {
    gallery.ids.push_back(std::to_string(i));
    gallery.items.push_back(store.embedding(i));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (rc.pair_by_label && !records[i].label) {
      throw ConfigError("record " + std::to_string(i + 1) + " has no label to pair by");
    }
    gallery.pairing.push_back(std::to_string(rc.pair_by_label ? *records[i].label : i));
  }
  gallery.validate();

  const auto queries = texts_of(records);
  ordered_json report;
  report["task"] = "retrieval";
  report["model_checkpoint"] = rc.encoder;
  ordered_json metrics;
  metrics["k"] = rc.metric_k;
  metrics["recall_clean"] = recall_at_k(queries, enc, gallery, rc.metric_k);

  if (!rc.targets.empty()) {
    const auto lexicon = load_lexicon(rc.flags, m);
    const AttackConfig cfg = attack_config(rc.flags, rc.common.seed);
    const auto targets = broadcast_targets(load_records(rc.targets, m, "targets"), records.size());
    const AttackKind kind = parse_attack_kind(rc.flags.attack);
    std::vector<AttackObjective> objectives;
    for (auto& e : enc.encode_batch(targets)) objectives.push_back(AttackObjective::target_similarity(std::move(e)));
    const auto results = run_attack(kind, enc, queries, objectives, alphabet, cfg,
                                    lexicon ? &*lexicon : nullptr);
    std::vector<Sentence> attacked;
    ordered_json per_query = ordered_json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
      attacked.push_back(results[i].output);
      ordered_json e;
      e["query"] = utf8::encode(queries[i]);
      e["attacked"] = utf8::encode(results[i].output);
      e["target"] = utf8::encode(targets[i]);
      e["distance"] = levenshtein(queries[i], results[i].output);
      per_query.push_back(std::move(e));
    }
    metrics["recall_attacked"] = recall_at_k(attacked, enc, gallery, rc.metric_k);
    report["attack_cfg"] = attack_config_json(rc.flags, cfg);
    report["metrics"] = metrics;
    report["per_query"] = per_query;
  } else {
    report["metrics"] = metrics;
  }
  report["seed"] = rc.common.seed;
  report["manifest"] = m.to_json();
  emit(report, rc.common.out, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct InvertCmd {
  Common common;
  std::string encoder, targets, gallery;
  std::size_t steps = 400, restarts = 4, max_length = 64, rho = 0;
};

int cmd_invert(const CLI::App* app, const InvertCmd& iv, std::ostream& out) {
  RunManifest m = manifest_for(app, iv.common);
  const Alphabet alphabet = load_alphabet(iv.common, m);
  const EncoderParams params = load_encoder(iv.encoder, alphabet, m);
  const CharEncoder enc(params, alphabet, iv.common.workers);
  if (iv.targets.empty() == iv.gallery.empty()) throw ConfigError("give exactly one of --targets or --gallery");

  std::vector<std::optional<Sentence>> references;
  std::vector<Embedding> targets;
  if (!iv.targets.empty()) {
    const auto records = load_records(iv.targets, m, "targets");
    const auto texts = texts_of(records);
    targets = enc.encode_batch(texts);
    references.assign(texts.begin(), texts.end());
  } else {
    m.add_input("gallery", iv.gallery);
    const auto store = read_store(iv.gallery);
    if (store.count > 0 && store.dim != enc.embedding_dim()) {
      throw ConfigError("gallery dimension does not match the encoder");
    }
    for (std::size_t i = 0; i < store.count; ++i) targets.push_back(store.embedding(i));
    references.resize(targets.size());
  }

  InversionConfig cfg;
  cfg.steps = iv.steps;
  cfg.restarts = iv.restarts;
  cfg.max_length = iv.max_length;
  cfg.rho = iv.rho;

  std::vector<double> sims, words, tokens, bleus;
  ordered_json per_target = ordered_json::array();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    cfg.seed = mix64(iv.common.seed, i);
    const auto r = invert_embedding(targets[i], enc, alphabet, cfg);
    ordered_json e;
    e["recovered"] = utf8::encode(r.sentence);
    e["sim"] = r.similarity;
    sims.push_back(r.similarity);
    if (references[i]) {
      e["reference"] = utf8::encode(*references[i]);
      words.push_back(word_recall(*references[i], r.sentence));
      tokens.push_back(token_recall(*references[i], r.sentence));
      bleus.push_back(bleu(*references[i], r.sentence));
      e["word_recall"] = words.back();
      e["token_recall"] = tokens.back();
      e["bleu"] = bleus.back();
    }
    e["traces"] = r.traces;
    per_target.push_back(std::move(e));
  }

  ordered_json report;
  report["task"] = "invert";
  report["model_checkpoint"] = iv.encoder;
  report["inversion_cfg"] = {{"steps", cfg.steps},
                             {"restarts", cfg.restarts},
                             {"max_length", cfg.max_length},
                             {"rho", cfg.rho}};
  ordered_json metrics;
  metrics["sim"] = mean(sims);
  if (!words.empty()) {
    metrics["word_recall"] = mean(words);
    metrics["token_recall"] = mean(tokens);
    metrics["bleu"] = mean(bleus);
  }
  report["metrics"] = metrics;
  report["per_target"] = per_target;
  report["seed"] = iv.common.seed;
  report["manifest"] = m.to_json();
  emit(report, iv.common.out, out);
  return 0;
}

// ---------------------------------------------------------------------------

struct OracleCmd {
  Common common;
  AttackFlags flags;
  std::string input, encoder, rho_list = "1,5,exhaustive";
  ObjectiveSources sources;
};

struct RhoSetting {
  std::string label;
  std::size_t rho;
};

std::vector<RhoSetting> parse_rho_list(const std::string& text) {
  std::vector<RhoSetting> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "exhaustive") {
      out.push_back({item, std::numeric_limits<std::size_t>::max()});
      continue;
    }
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.empty() || v == 0 || item.front() == '-') {
      throw ConfigError("--rho-list entries must be positive integers or 'exhaustive', got '" + item + "'");
    }
    out.push_back({item, static_cast<std::size_t>(v)});
  }
  if (out.empty()) throw ConfigError("--rho-list is empty");
  return out;
}

// Thrown after the report is written when an attack beats the exact maximum.
struct DominanceViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int cmd_oracle_check(const CLI::App* app, const OracleCmd& o, std::ostream& out) {
  RunManifest m = manifest_for(app, o.common);
  const Alphabet alphabet = load_alphabet(o.common, m);
  const auto records = load_records(o.input, m, "input");
  const EncoderParams params = load_encoder(o.encoder, alphabet, m);
  const CharEncoder enc(params, alphabet, o.common.workers);
  const auto lexicon = load_lexicon(o.flags, m);
  const Lexicon* lex = lexicon ? &*lexicon : nullptr;
  const auto rhos = parse_rho_list(o.rho_list);
  AttackConfig cfg = attack_config(o.flags, o.common.seed);
  const auto objectives = build_objectives(o.flags.objective, records, o.sources, enc, m);
  const auto texts = texts_of(records);

  std::vector<double> brute_scores, charmer_scores;
  std::vector<std::vector<double>> leaf_scores(rhos.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    brute_scores.push_back(final_score(bruteforce_attack(enc, texts[i], objectives[i], alphabet, cfg, lex),
                                       objectives[i], enc));
    charmer_scores.push_back(final_score(charmer_attack(enc, texts[i], objectives[i], alphabet, cfg, lex),
                                         objectives[i], enc));
  }
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    cfg.rho = rhos[r].rho;
    const auto results = leaf_attack(enc, texts, objectives, alphabet, cfg, lex);
    for (std::size_t i = 0; i < results.size(); ++i) {
      leaf_scores[r].push_back(final_score(results[i], objectives[i], enc));
    }
  }

  std::size_t violations = 0;
  ordered_json per_sentence = ordered_json::array();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    ordered_json e;
    e["input"] = utf8::encode(texts[i]);
    e["bruteforce"] = brute_scores[i];
    e["charmer"] = charmer_scores[i];
    if (charmer_scores[i] > brute_scores[i]) ++violations;
    ordered_json leaf = ordered_json::object();
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      leaf[rhos[r].label] = leaf_scores[r][i];
      if (leaf_scores[r][i] > brute_scores[i]) ++violations;
    }
    e["leaf"] = leaf;
    per_sentence.push_back(std::move(e));
  }

  ordered_json summary;
  summary["bruteforce"] = mean(brute_scores);
  summary["charmer"] = mean(charmer_scores);
  ordered_json leaf_mean = ordered_json::object(), leaf_gap = ordered_json::object();
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    leaf_mean[rhos[r].label] = mean(leaf_scores[r]);
    std::vector<double> gaps;
    for (std::size_t i = 0; i < texts.size(); ++i) gaps.push_back(brute_scores[i] - leaf_scores[r][i]);
    leaf_gap[rhos[r].label] = mean(gaps);
  }
  summary["leaf"] = leaf_mean;
  summary["leaf_gap"] = leaf_gap;
  summary["dominance_violations"] = violations;

  ordered_json report;
  report["task"] = "oracle-check";
  report["objective"] = o.flags.objective;
  report["attack_cfg"] = attack_config_json(o.flags, cfg);
  report["attack_cfg"].erase("attack");
  report["attack_cfg"]["rho"] = o.rho_list;
  report["summary"] = summary;
  report["per_sentence"] = per_sentence;
  report["manifest"] = m.to_json();
  emit(report, o.common.out, out);
  if (violations > 0) {
    throw DominanceViolation(std::to_string(violations) +
                             " attack scores exceed the exhaustive maximum");
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct InitCmd {
  Common common;
  std::size_t de = 32, m = 1024, dh = 64, h = 64;
};

int cmd_init(const InitCmd& c, std::ostream& out) {
  if (c.common.out.empty()) throw ConfigError("init needs --out");
  RunManifest unused("init");
  const Alphabet alphabet = load_alphabet(c.common, unused);
  const auto params = EncoderParams::init(c.common.seed, EncoderDims::for_alphabet(alphabet, c.de, c.m, c.dh, c.h));
  params.save(c.common.out);
  ordered_json summary;
  summary["checkpoint"] = c.common.out;
  summary["parameters"] = params.parameter_count();
  out << summary.dump() << '\n';
  return 0;
}

struct SynthCmd {
  Common common;
  std::size_t classes = 4, per_class = 500;
  std::string labels_out;
};

int cmd_synth(const SynthCmd& s, std::ostream& out) {
  if (s.common.out.empty()) throw ConfigError("synth needs --out");
  const auto records = synth_corpus(s.classes, s.per_class, s.common.seed);
  write_jsonl(s.common.out, records);
  if (!s.labels_out.empty()) {
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (const auto& t : synth_anchor_texts(s.classes, s.common.seed)) labels.push_back(utf8::encode(t));
    emit(labels, s.labels_out, out);
  }
  ordered_json summary;
  summary["records"] = records.size();
  out << summary.dump() << '\n';
  return 0;
}

struct EmbedCmd {
  Common common;
  std::string input, encoder;
};

int cmd_embed(const EmbedCmd& e, std::ostream& out) {
  if (e.common.out.empty()) throw ConfigError("embed needs --out");
  RunManifest unused("embed");
  const Alphabet alphabet = load_alphabet(e.common, unused);
  const auto records = load_records(e.input, unused, "input");
  const EncoderParams params = load_encoder(e.encoder, alphabet, unused);
  const CharEncoder enc(params, alphabet, e.common.workers);
  const auto texts = texts_of(records);
  write_store(e.common.out, EmbeddingStore::from_embeddings(enc.encode_batch(texts)));
  ordered_json summary;
  summary["rows"] = records.size();
  summary["dim"] = enc.embedding_dim();
  out << summary.dump() << '\n';
  return 0;
}

void diagnose(std::ostream& err, std::string_view kind, std::string_view message) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Character-level adversarial attacks and robust finetuning for text encoders", "leaf"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  AttackCmd attack;
  auto* attack_app = app.add_subcommand("attack", "Attack every sentence of a JSONL file");
  add_common(attack_app, attack.common, true);
  add_attack_flags(attack_app, attack.flags, true);
  attack_app->add_option("--input", attack.input, "Sentences (JSONL)")->required();
  attack_app->add_option("--encoder", attack.encoder, "Encoder checkpoint")->required();
  attack_app->add_option("--targets", attack.sources.targets, "Target texts for target-sim (JSONL)");
  attack_app->add_option("--anchors", attack.sources.anchors, "Class anchors for class-ce (store)");
  attack_app->add_option("--labels", attack.sources.labels, "Class label texts for class-ce (JSON array)");

  TrainCmd train_cmd;
  auto* train_app = app.add_subcommand("train", "Adversarially finetune an encoder");
  add_common(train_app, train_cmd.common, true);
  train_app->add_option("--data", train_cmd.data, "Training sentences (JSONL)")->required();
  train_app->add_option("--frozen", train_cmd.frozen, "Frozen reference encoder")->required();
  train_app->add_option("--init", train_cmd.init, "Starting checkpoint, or 'fresh'")->required();
  train_app->add_option("--preset", train_cmd.preset, "desk | paper")
      ->check(CLI::IsMember({"desk", "paper"}));
  train_app->add_option("--epochs", train_cmd.epochs);
  train_app->add_option("--batch-size", train_cmd.batch_size);
  train_app->add_option("--k", train_cmd.k);
  train_app->add_option("--rho", train_cmd.rho);
  train_app->add_option("--lr", train_cmd.lr);
  train_app->add_option("--warmup", train_cmd.warmup);
  train_app->add_option("--weight-decay", train_cmd.weight_decay);
  train_app->add_flag("--constrained", train_cmd.constrained);
  train_app->add_option("--lexicon", train_cmd.lexicon);
  train_app->add_option("--trace", train_cmd.trace, "Loss trace path (default: <out>.trace.json)");

  auto* eval_app = app.add_subcommand("eval", "Zero-shot, retrieval and inversion evaluations");
  eval_app->require_subcommand(1);

  ZeroShotCmd zs;
  auto* zs_app = eval_app->add_subcommand("zeroshot", "Clean and adversarial zero-shot accuracy");
  add_common(zs_app, zs.common, true);
  add_attack_flags(zs_app, zs.flags, false);
  zs_app->add_option("--input", zs.input, "Labelled sentences (JSONL)")->required();
  zs_app->add_option("--encoder", zs.encoder)->required();
  zs_app->add_option("--anchors", zs.anchors, "Class anchors (store)");
  zs_app->add_option("--labels", zs.labels, "Class label texts (JSON array)");
  zs_app->add_flag("--per-sample", zs.per_sample, "Include every sample in the report");

  RetrievalCmd rt;
  auto* rt_app = eval_app->add_subcommand("retrieval", "Recall@k, optionally under targeted attack");
  add_common(rt_app, rt.common, true);
  add_attack_flags(rt_app, rt.flags, false);
  rt_app->add_option("--input", rt.input, "Queries (JSONL)")->required();
  rt_app->add_option("--encoder", rt.encoder)->required();
  rt_app->add_option("--gallery", rt.gallery, "Gallery embeddings (store)")->required();
  rt_app->add_option("--targets", rt.targets, "Attack target texts (JSONL)");
  rt_app->add_option("--metric-k", rt.metric_k, "Recall depth")->check(CLI::PositiveNumber);
  rt_app->add_flag("--pair-by-label", rt.pair_by_label, "Pair each query with gallery row `label`");

  InvertCmd iv;
  auto* iv_app = eval_app->add_subcommand("invert", "Recover text from embeddings by hill climbing");
  add_common(iv_app, iv.common, true);
  iv_app->add_option("--encoder", iv.encoder)->required();
  iv_app->add_option("--targets", iv.targets, "Texts whose embeddings are inverted (JSONL)");
  iv_app->add_option("--gallery", iv.gallery, "Embeddings to invert (store)");
  iv_app->add_option("--steps", iv.steps)->check(CLI::PositiveNumber);
  iv_app->add_option("--restarts", iv.restarts)->check(CLI::PositiveNumber);
  iv_app->add_option("--max-length", iv.max_length)->check(CLI::PositiveNumber);
  iv_app->add_option("--rho", iv.rho, "Sampled edits per step (0 = all)");

  OracleCmd oc;
  auto* oc_app = app.add_subcommand("oracle-check", "Compare attacks against the exhaustive maximum");
  add_common(oc_app, oc.common, true);
  add_attack_flags(oc_app, oc.flags, true);
  oc_app->add_option("--input", oc.input)->required();
  oc_app->add_option("--encoder", oc.encoder)->required();
  oc_app->add_option("--rho-list", oc.rho_list, "Comma-separated rho values; 'exhaustive' allowed");
  oc_app->add_option("--targets", oc.sources.targets);
  oc_app->add_option("--anchors", oc.sources.anchors);
  oc_app->add_option("--labels", oc.sources.labels);

  InitCmd init;
  auto* init_app = app.add_subcommand("init", "Write a randomly initialised encoder");
  add_common(init_app, init.common, true);
  init_app->add_option("--char-dim", init.de, "Character and bigram embedding width")->check(CLI::PositiveNumber);
  init_app->add_option("--buckets", init.m, "Bigram hash buckets")->check(CLI::PositiveNumber);
  init_app->add_option("--hidden", init.dh, "Hidden layer width")->check(CLI::PositiveNumber);
  init_app->add_option("--embed-dim", init.h, "Output embedding width")->check(CLI::PositiveNumber);

  SynthCmd synth;
  auto* synth_app = app.add_subcommand("synth", "Generate the synthetic topic corpus");
  add_common(synth_app, synth.common, true);
  synth_app->add_option("--classes", synth.classes);
  synth_app->add_option("--per-class", synth.per_class);
  synth_app->add_option("--labels-out", synth.labels_out, "Write anchor texts (JSON array)");

  EmbedCmd embed;
  auto* embed_app = app.add_subcommand("embed", "Encode a JSONL file into an embedding store");
  add_common(embed_app, embed.common, false);
  embed_app->add_option("--input", embed.input)->required();
  embed_app->add_option("--encoder", embed.encoder)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    diagnose(err, "usage", e.what());
    return 2;
  }

  try {
    if (attack_app->parsed()) return cmd_attack(attack_app, attack, out);
    if (train_app->parsed()) return cmd_train(train_app, train_cmd, out);
    if (zs_app->parsed()) return cmd_zeroshot(zs_app, zs, out);
    if (rt_app->parsed()) return cmd_retrieval(rt_app, rt, out);
    if (iv_app->parsed()) return cmd_invert(iv_app, iv, out);
    if (oc_app->parsed()) return cmd_oracle_check(oc_app, oc, out);
    if (init_app->parsed()) return cmd_init(init, out);
    if (synth_app->parsed()) return cmd_synth(synth, out);
    if (embed_app->parsed()) return cmd_embed(embed, out);
  } catch (const ConfigError& e) {
    diagnose(err, "config", e.what());
    return 2;
  } catch (const FormatError& e) {
    diagnose(err, "format", e.what());
    return 1;
  } catch (const BudgetError& e) {
    diagnose(err, "budget", e.what());
    return 1;
  } catch (const NumericError& e) {
    diagnose(err, "numeric", e.what());
    return 1;
  } catch (const DominanceViolation& e) {
    diagnose(err, "dominance", e.what());
    return 1;
  } catch (const std::exception& e) {
    diagnose(err, "runtime", e.what());
    return 1;
  }
  diagnose(err, "usage", "no command given");
  return 2;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"leaf"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace leaf::cli
