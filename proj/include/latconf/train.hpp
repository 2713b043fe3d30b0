// Copyright 2026 The latconf Authors
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

#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "latconf/metrics.hpp"
#include "latconf/model.hpp"

namespace latconf {

/// One training/evaluation unit: a scored graph plus derived targets.
struct Utterance {
  std::string id;
  Lattice graph;  // CN-as-lattice or lattice proper, posteriors present
  std::vector<std::string> ref;
  std::vector<int> targets;  // per arc, indexed like graph.arcs
  std::vector<int> one_best;  // arc ids
  LatticeFeats lattice_feats;
  bool lattice_unmatched = false;
};

using Dataset = std::vector<Utterance>;

inline Utterance make_utterance(Lattice graph, std::vector<std::string> ref) {
  Utterance u;
  u.id = graph.utterance_id;
  u.graph = std::move(graph);
  u.ref = std::move(ref);
  auto tags = tag_graph_arcs(u.graph, u.ref);
  u.targets.resize(u.graph.arcs.size());
  for (size_t i = 0; i < tags.size(); ++i) u.targets[i] = tags[i].target;
  u.one_best = one_best_path(u.graph);
  return u;
}

enum class OptimizerKind { Sgd, Adam };

inline std::string to_string(OptimizerKind o) {
  return o == OptimizerKind::Sgd ? "sgd" : "adam";
}
inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw DataError("unknown optimizer '" + s + "'");
}

struct TrainConfig {
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int epochs = 10;
  int patience = 3;
  double clip_norm = 5.0;
  unsigned seed = 42;

  void validate() const {
    if (lr < 0.0) throw DataError("learning rate must be >= 0");
    if (patience < 0) throw DataError("patience must be >= 0");
    if (epochs < 1) throw DataError("epochs must be >= 1");
  }
};

/// Adam/SGD over a ParamSet, with global-norm gradient clipping.
class Optimizer {
 public:
  Optimizer(nn::ParamSet& ps, const TrainConfig& cfg)
      : ps_(ps), cfg_(cfg) {
    if (cfg_.optimizer == OptimizerKind::Adam) {
      for (nn::Tensor* t : ps_.all()) {
        m_[t->name].assign(t->size(), 0.0);
        v_[t->name].assign(t->size(), 0.0);
      }
    }
  }

  void step() {
    double sq = 0.0;
    for (nn::Tensor* t : ps_.all()) {
      if (!t->trainable) continue;
      for (double g : t->grad) sq += g * g;
    }
    double scale = 1.0;
    double norm = std::sqrt(sq);
    if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
      scale = cfg_.clip_norm / norm;
    ++steps_;
    for (nn::Tensor* t : ps_.all()) {
      if (!t->trainable) continue;
      if (cfg_.optimizer == OptimizerKind::Sgd) {
        for (int i = 0; i < t->size(); ++i)
          t->value[i] -= cfg_.lr * scale * t->grad[i];
      } else {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        auto& m = m_[t->name];
        auto& v = v_[t->name];
        double bc1 = 1.0 - std::pow(b1, steps_);
        double bc2 = 1.0 - std::pow(b2, steps_);
        for (int i = 0; i < t->size(); ++i) {
          double g = scale * t->grad[i];
          m[i] = b1 * m[i] + (1.0 - b1) * g;
          v[i] = b2 * v[i] + (1.0 - b2) * g * g;
          t->value[i] -= cfg_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
      }
    }
  }

 private:
  nn::ParamSet& ps_;
  TrainConfig cfg_;
  long steps_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Scoring a dataset (read-only on parameters, parallel per utterance).
// ---------------------------------------------------------------------------

enum class EvalScope { OneBest, AllArcs };

inline std::string to_string(EvalScope s) {
  return s == EvalScope::OneBest ? "one-best" : "all-arcs";
}

/// Collects (confidence, target) pairs over a dataset in utterance order.
/// Epsilon filler arcs are not words and are excluded from metrics.
inline void score_dataset(ConfidenceModel& model, const Dataset& data,
                          EvalScope scope, std::vector<double>* confs,
                          std::vector<int>* targets, int threads = 1) {
  struct PerUtt {
    std::vector<double> c;
    std::vector<int> t;
  };
  std::vector<PerUtt> results(data.size());
  auto worker = [&](size_t begin, size_t end) {
    for (size_t u = begin; u < end; ++u) {
      const Utterance& utt = data[u];
      nn::Tape tape;
      ScoredGraph sg = model.score(tape, utt.graph, &utt.lattice_feats);
      std::map<int, double> by_id;
      for (size_t i = 0; i < sg.arc_ids.size(); ++i)
        by_id[sg.arc_ids[i]] = sg.confidences[i];
      auto push = [&](int arc_id) {
        if (utt.graph.arc(arc_id).word == kEpsWord) return;
        results[u].c.push_back(by_id.at(arc_id));
        results[u].t.push_back(
            utt.targets[utt.graph.arc_index.at(arc_id)]);
      };
      if (scope == EvalScope::OneBest) {
        for (int id : utt.one_best) push(id);
      } else {
        for (int id : sg.arc_ids) push(id);
      }
    }
  };
  threads = std::max(1, threads);
  if (threads == 1 || data.size() < 2) {
    worker(0, data.size());
  } else {
    size_t n = data.size();
    size_t nt = std::min<size_t>(threads, n);
    std::vector<std::thread> pool;
    for (size_t k = 0; k < nt; ++k)
      pool.emplace_back(worker, n * k / nt, n * (k + 1) / nt);
    for (auto& th : pool) th.join();
  }
  for (const auto& r : results) {
    confs->insert(confs->end(), r.c.begin(), r.c.end());
    targets->insert(targets->end(), r.t.begin(), r.t.end());
  }
}

inline EvalReport evaluate(ConfidenceModel& model, const Dataset& data,
                           EvalScope scope, int threads = 1) {
  std::vector<double> confs;
  std::vector<int> targets;
  score_dataset(model, data, scope, &confs, &targets, threads);
  if (confs.empty()) throw DataError("evaluate: scope yields zero words");
  EvalReport r = make_report(confs, targets, to_string(scope));
  r.config_hash = model.cfg.hash();
  return r;
}

// ---------------------------------------------------------------------------
// Training loop.
// ---------------------------------------------------------------------------

struct TrainResult {
  std::string log;      // one line per epoch
  double best_cv_nce = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
};

/// Fits z-normalization statistics on the training portion.
inline NormStats fit_norm_stats(const Dataset& train) {
  auto stats = [](const std::vector<double>& xs) {
    double mean = 0.0, sd = 1.0;
    if (!xs.empty()) {
      double s = 0.0, s2 = 0.0;
      for (double x : xs) {
        s += x;
        s2 += x * x;
      }
      mean = s / xs.size();
      sd = std::sqrt(std::max(0.0, s2 / xs.size() - mean * mean));
    }
    return std::make_pair(mean, sd);
  };
  std::vector<double> durs, sub_durs, ams, lms;
  for (const auto& u : train) {
    for (const auto& a : u.graph.arcs) {
      durs.push_back(u.graph.arc_duration(a.id));
      for (const auto& sw : a.subwords) sub_durs.push_back(sw.duration);
      auto it = u.lattice_feats.find(a.id);
      if (it != u.lattice_feats.end() && it->second) {
        ams.push_back(it->second->first);
        lms.push_back(it->second->second);
      }
    }
  }
  NormStats n;
  std::tie(n.dur_mean, n.dur_std) = stats(durs);
  std::tie(n.sub_dur_mean, n.sub_dur_std) = stats(sub_durs);
  std::tie(n.am_mean, n.am_std) = stats(ams);
  std::tie(n.lm_mean, n.lm_std) = stats(lms);
  return n;
}

/// Per-epoch full pass in seeded shuffled order, Adam/SGD updates per
/// utterance, early stopping on cross-validation NCE. Forward propagation
/// always covers all arcs; the loss mode only selects which arcs contribute.
inline TrainResult train(ConfidenceModel& model, const Dataset& train_set,
                         const Dataset& cv_set, const TrainConfig& tc) {
  tc.validate();
  if (train_set.empty() || cv_set.empty())
    throw DataError("train: empty train or cv set");
  Optimizer opt(model.params, tc);
  std::mt19937_64 shuffle_rng(tc.seed);

  // Snapshot/restore of parameter values for best-checkpoint keeping.
  auto snapshot = [&]() {
    std::vector<std::vector<double>> s;
    for (nn::Tensor* t : model.params.all()) s.push_back(t->value);
    return s;
  };
  auto restore = [&](const std::vector<std::vector<double>>& s) {
    auto all = model.params.all();
    for (size_t i = 0; i < all.size(); ++i) all[i]->value = s[i];
  };

  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult res;
  std::vector<std::vector<double>> best = snapshot();
  double best_nce = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::ostringstream log;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    long loss_count = 0;
    for (size_t oi : order) {
      const Utterance& u = train_set[oi];
      if (model.cfg.use_lattice && u.lattice_unmatched) continue;
      nn::Tape tape;
      ScoredGraph sg = model.score(tape, u.graph, &u.lattice_feats);
      std::vector<nn::Tape::Id> sel;
      std::vector<double> tgt;
      std::set<int> one_best(u.one_best.begin(), u.one_best.end());
      for (size_t i = 0; i < sg.arc_ids.size(); ++i) {
        int arc_id = sg.arc_ids[i];
        if (u.graph.arc(arc_id).word == kEpsWord) continue;
        if (model.cfg.loss_mode == LossMode::OneBest && !one_best.count(arc_id))
          continue;
        sel.push_back(sg.conf_ids[i]);
        tgt.push_back(u.targets[u.graph.arc_index.at(arc_id)]);
      }
      if (sel.empty()) continue;
      nn::Tape::Id loss = tape.bce_mean(sel, tgt);
      double lv = tape.scalar_value(loss);
      if (!std::isfinite(lv))
        throw NumericError("training diverged: non-finite loss on utterance '" +
                           u.id + "' at epoch " + std::to_string(epoch));
      loss_sum += lv;
      ++loss_count;
      model.params.zero_grads();
      tape.backward(loss);
      opt.step();
    }
    std::vector<double> cv_confs;
    std::vector<int> cv_targets;
    score_dataset(model, cv_set, EvalScope::OneBest, &cv_confs, &cv_targets);
    double cv_nce = nce(cv_confs, cv_targets);
    double cv_auc = pr_auc(cv_confs, cv_targets);
    log << "epoch=" << epoch << " train_loss="
        << fmt_real(loss_count ? loss_sum / loss_count : 0.0)
        << " cv_nce=" << fmt_real(cv_nce) << " cv_auc=" << fmt_real(cv_auc)
        << "\n";
    res.epochs_run = epoch;
    if (cv_nce > best_nce) {
      best_nce = cv_nce;
      best = snapshot();
      res.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > tc.patience) break;
    }
  }
  restore(best);
  res.best_cv_nce = best_nce;
  res.log = log.str();
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoint format (versioned text, exact round-trip).
// ---------------------------------------------------------------------------

inline std::string save_checkpoint(const ConfidenceModel& model) {
  std::ostringstream out;
  out << "LATCONF_CHECKPOINT v1\n";
  out << "config_hash=" << model.cfg.hash() << "\n";
  out << "[config]\n" << model.cfg.to_kv();
  out << "[norm]\n";
  const NormStats& n = model.norm;
  out << "dur_mean=" << fmt_exact(n.dur_mean) << "\n"
      << "dur_std=" << fmt_exact(n.dur_std) << "\n"
      << "sub_dur_mean=" << fmt_exact(n.sub_dur_mean) << "\n"
      << "sub_dur_std=" << fmt_exact(n.sub_dur_std) << "\n"
      << "am_mean=" << fmt_exact(n.am_mean) << "\n"
      << "am_std=" << fmt_exact(n.am_std) << "\n"
      << "lm_mean=" << fmt_exact(n.lm_mean) << "\n"
      << "lm_std=" << fmt_exact(n.lm_std) << "\n";
  if (!model.pmap.empty()) out << "[pmap]\n" << model.pmap.serialize();
  out << "[vocab.word] trainable=" << (model.word_table.trainable() ? 1 : 0)
      << "\n";
  for (const auto& tok : model.word_table.tokens()) out << tok << "\n";
  if (model.cfg.subword != SubwordFeature::None) {
    out << "[vocab.sub] trainable=" << (model.sub_table.trainable() ? 1 : 0)
        << "\n";
    for (const auto& tok : model.sub_table.tokens()) out << tok << "\n";
  }
  for (const nn::Tensor* t : model.params.all()) {
    out << "[tensor] name=" << t->name << " rows=" << t->rows
        << " cols=" << t->cols << " trainable=" << (t->trainable ? 1 : 0)
        << "\n";
    for (int i = 0; i < t->size(); ++i) {
      if (i) out << ' ';
      out << fmt_exact(t->value[i]);
    }
    out << "\n";
  }
  out << "END\n";
  return out.str();
}

inline ConfidenceModel load_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "LATCONF_CHECKPOINT v1")
    throw DataError("not a latconf checkpoint");
  std::uint64_t declared_hash = 0;
  if (!std::getline(in, line) || line.rfind("config_hash=", 0) != 0)
    throw DataError("checkpoint missing config_hash");
  declared_hash = std::stoull(line.substr(12));
  if (!std::getline(in, line) || line != "[config]")
    throw DataError("checkpoint missing [config]");
  std::map<std::string, std::string> kv;
  std::streampos section_start;
  while (true) {
    section_start = in.tellg();
    if (!std::getline(in, line)) throw DataError("truncated checkpoint");
    if (line.rfind("[", 0) == 0) break;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ModelConfig cfg = ModelConfig::from_kv(kv);
  if (cfg.hash() != declared_hash)
    throw DataError("checkpoint config hash mismatch");

  NormStats norm;
  PosteriorMap pmap;
  std::vector<std::string> word_vocab, sub_vocab;
  bool word_trainable = true, sub_trainable = true;
  struct RawTensor {
    std::string name;
    int rows, cols;
    bool trainable;
    std::vector<double> values;
  };
  std::vector<RawTensor> tensors;

  // `line` currently holds a section header.
  while (line != "END") {
    if (line == "[norm]") {
      std::map<std::string, double> nk;
      while (std::getline(in, line) && line.rfind("[", 0) != 0 &&
             line != "END") {
        auto eq = line.find('=');
        nk[line.substr(0, eq)] = parse_real(line.substr(eq + 1));
      }
      norm.dur_mean = nk.at("dur_mean");
      norm.dur_std = nk.at("dur_std");
      norm.sub_dur_mean = nk.at("sub_dur_mean");
      norm.sub_dur_std = nk.at("sub_dur_std");
      norm.am_mean = nk.at("am_mean");
      norm.am_std = nk.at("am_std");
      norm.lm_mean = nk.at("lm_mean");
      norm.lm_std = nk.at("lm_std");
    } else if (line == "[pmap]") {
      std::string body;
      while (std::getline(in, line) && line.rfind("[", 0) != 0 && line != "END")
        body += line + "\n";
      pmap = PosteriorMap::parse(body);
    } else if (line.rfind("[vocab.word]", 0) == 0) {
      word_trainable = line.find("trainable=1") != std::string::npos;
      while (std::getline(in, line) && line.rfind("[", 0) != 0 && line != "END")
        if (!line.empty()) word_vocab.push_back(line);
    } else if (line.rfind("[vocab.sub]", 0) == 0) {
      sub_trainable = line.find("trainable=1") != std::string::npos;
      while (std::getline(in, line) && line.rfind("[", 0) != 0 && line != "END")
        if (!line.empty()) sub_vocab.push_back(line);
    } else if (line.rfind("[tensor]", 0) == 0) {
      RawTensor rt;
      auto toks = split_ws(line);
      std::map<std::string, std::string> f;
      for (size_t i = 1; i < toks.size(); ++i) {
        auto eq = toks[i].find('=');
        f[toks[i].substr(0, eq)] = toks[i].substr(eq + 1);
      }
      rt.name = f.at("name");
      rt.rows = static_cast<int>(parse_int(f.at("rows")));
      rt.cols = static_cast<int>(parse_int(f.at("cols")));
      rt.trainable = f.at("trainable") == "1";
      if (!std::getline(in, line)) throw DataError("truncated tensor block");
      for (const auto& v : split_ws(line)) rt.values.push_back(parse_real(v));
      if (static_cast<int>(rt.values.size()) != rt.rows * rt.cols)
        throw DataError("tensor '" + rt.name + "' value count mismatch");
      tensors.push_back(std::move(rt));
      if (!std::getline(in, line)) throw DataError("truncated checkpoint");
      continue;
    } else {
      throw DataError("unknown checkpoint section: " + line);
    }
  }

  // Rebuild embedding tables from the stored tensors.
  auto find_tensor = [&](const std::string& name) -> const RawTensor* {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  };
  auto table_from = [&](const RawTensor* t, const std::vector<std::string>& vocab,
                        bool trainable) {
    std::vector<std::vector<double>> rows(vocab.size());
    for (size_t r = 0; r < vocab.size(); ++r)
      rows[r].assign(t->values.begin() + static_cast<long>(r) * t->cols,
                     t->values.begin() + static_cast<long>(r + 1) * t->cols);
    std::vector<double> unk(
        t->values.begin() + static_cast<long>(vocab.size()) * t->cols,
        t->values.begin() + static_cast<long>(vocab.size() + 1) * t->cols);
    return EmbeddingTable::from_rows(vocab, rows, std::move(unk), trainable);
  };
  const RawTensor* we = find_tensor("emb.word");
  if (!we) throw DataError("checkpoint missing emb.word tensor");
  EmbeddingTable wt = table_from(we, word_vocab, word_trainable);
  EmbeddingTable st;
  if (cfg.subword != SubwordFeature::None) {
    const RawTensor* se = find_tensor("emb.sub");
    if (!se) throw DataError("checkpoint missing emb.sub tensor");
    st = table_from(se, sub_vocab, sub_trainable);
  }
  ConfidenceModel model(cfg, std::move(wt), std::move(st));
  model.norm = norm;
  model.pmap = pmap;
  for (const auto& rt : tensors) {
    nn::Tensor& t = model.params.get(rt.name);
    if (t.rows != rt.rows || t.cols != rt.cols)
      throw DataError("tensor '" + rt.name + "' shape mismatch");
    t.value = rt.values;
    t.trainable = rt.trainable;
  }
  return model;
}

}  // namespace latconf
