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

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "latconf/synth.hpp"
#include "latconf/train.hpp"

namespace latconf::cli {

namespace fs = std::filesystem;

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
}

/// Splits a multi-document file at lines starting with the given header word.
inline std::vector<std::string> split_documents(const std::string& text,
                                                const std::string& header) {
  std::vector<std::string> docs;
  std::istringstream in(text);
  std::string line, cur;
  while (std::getline(in, line)) {
    auto toks = split_ws(line);
    if (!toks.empty() && toks[0] == header) {
      if (!cur.empty()) docs.push_back(cur);
      cur.clear();
    }
    cur += line + "\n";
  }
  if (!cur.empty()) docs.push_back(cur);
  return docs;
}

inline std::vector<ConfusionNetwork> read_cn_file(const fs::path& path) {
  std::vector<ConfusionNetwork> out;
  for (const auto& doc : split_documents(read_file(path), "CN"))
    out.push_back(parse_confusion_network(doc));
  return out;
}

inline std::vector<Lattice> read_lattice_file(const fs::path& path) {
  std::vector<Lattice> out;
  for (const auto& doc : split_documents(read_file(path), "LATTICE"))
    out.push_back(parse_lattice(doc));
  return out;
}

/// Reference file: one line per utterance, `<utt-id> <word> ...`.
inline std::map<std::string, std::vector<std::string>> read_refs(
    const fs::path& path) {
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    std::vector<std::string> words(toks.begin() + 1, toks.end());
    if (!out.emplace(toks[0], std::move(words)).second)
      throw ParseError(ParseError::Kind::DuplicateId, lineno,
                       "duplicate utterance '" + toks[0] + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets: the ablation ladder as named configurations.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "words",          "word-duration",  "word-posteriors", "word-mapping",
      "subword-embedding", "subword-duration", "subword-encoder",
      "cn-1best",       "cn-cn",          "cn-subword",      "lattice"};
  return names;
}

inline ModelConfig preset_config(const std::string& name) {
  ModelConfig c;
  c.use_duration = false;
  c.posterior = PosteriorFeature::None;
  if (name == "words") return c;
  c.use_duration = true;
  if (name == "word-duration") return c;
  c.posterior = PosteriorFeature::Raw;
  if (name == "word-posteriors") return c;
  c.posterior = PosteriorFeature::RawAndMapped;
  if (name == "word-mapping") return c;
  if (name == "subword-embedding") {
    c.subword = SubwordFeature::DirectEmb;
    return c;
  }
  if (name == "subword-duration") {
    c.subword = SubwordFeature::DirectEmbDur;
    return c;
  }
  if (name == "subword-encoder") {
    c.subword = SubwordFeature::Encoder;
    return c;
  }
  if (name == "cn-1best") {
    c.use_graph = true;
    c.loss_mode = LossMode::OneBest;
    return c;
  }
  if (name == "cn-cn") {
    c.use_graph = true;
    c.loss_mode = LossMode::AllArcs;
    return c;
  }
  if (name == "cn-subword") {
    c.use_graph = true;
    c.subword = SubwordFeature::Encoder;
    return c;
  }
  if (name == "lattice") {
    c.use_graph = true;
    c.subword = SubwordFeature::Encoder;
    c.use_lattice = true;
    return c;
  }
  std::string all;
  for (const auto& n : preset_names()) all += " " + n;
  throw DataError("unknown preset '" + name + "'; available:" + all);
}

// ---------------------------------------------------------------------------
// Dataset assembly.
// ---------------------------------------------------------------------------

struct DataOptions {
  fs::path cn_path;
  fs::path lattice_path;  // optional, for lattice feature transfer
  fs::path refs_path;
  bool use_lattice = false;
  double tolerance = 0.5;
};

inline Dataset load_dataset(const DataOptions& opt) {
  auto cns = read_cn_file(opt.cn_path);
  auto refs = read_refs(opt.refs_path);
  std::map<std::string, Lattice> lattices;
  if (opt.use_lattice) {
    for (auto& lat : read_lattice_file(opt.lattice_path)) {
      Lattice scored = compute_arc_posteriors(lat);
      lattices.emplace(scored.utterance_id, std::move(scored));
    }
  }
  Dataset data;
  data.reserve(cns.size());
  for (const auto& cn : cns) {
    auto rit = refs.find(cn.utterance_id);
    if (rit == refs.end())
      throw DataError("no reference for utterance '" + cn.utterance_id + "'");
    Utterance u = make_utterance(cn_to_lattice(cn), rit->second);
    if (opt.use_lattice) {
      auto lit = lattices.find(cn.utterance_id);
      if (lit == lattices.end())
        throw DataError("no lattice for utterance '" + cn.utterance_id + "'");
      CnLatticeMap map = align_cn_to_lattice(cn, lit->second, opt.tolerance);
      u.lattice_unmatched = map.any_unmatched;
      int arc_id = 0;
      for (size_t k = 0; k < cn.sets.size(); ++k)
        for (size_t i = 0; i < cn.sets[k].entries.size(); ++i)
          u.lattice_feats[arc_id++] =
              aggregate_lattice_features(lit->second, map.matched[k][i]);
    }
    data.push_back(std::move(u));
  }
  return data;
}

/// Seeded 8:1:1 split by utterance.
struct Split {
  Dataset train, cv, test;
};

inline Split split_dataset(Dataset data, unsigned seed) {
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  Split s;
  size_t n = data.size();
  size_t n_cv = n / 10, n_test = n / 10;
  size_t n_train = n - n_cv - n_test;
  for (size_t i = 0; i < n; ++i) {
    Utterance& u = data[order[i]];
    if (i < n_train)
      s.train.push_back(std::move(u));
    else if (i < n_train + n_cv)
      s.cv.push_back(std::move(u));
    else
      s.test.push_back(std::move(u));
  }
  return s;
}

/// One-best confidences/targets with raw or mapped posteriors as scores.
inline void posterior_baseline(const Dataset& data, const PosteriorMap* pmap,
                               bool oracle, std::vector<double>* confs,
                               std::vector<int>* targets) {
  for (const auto& u : data) {
    for (int arc_id : u.one_best) {
      const auto& a = u.graph.arc(arc_id);
      if (a.word == kEpsWord) continue;
      int tgt = u.targets[u.graph.arc_index.at(arc_id)];
      double c;
      if (oracle)
        c = tgt;
      else if (pmap)
        c = pmap->apply(a.posterior.value_or(0.0));
      else
        c = a.posterior.value_or(0.0);
      confs->push_back(c);
      targets->push_back(tgt);
    }
  }
}

// ---------------------------------------------------------------------------
// Subcommand bodies (also used directly by tests).
// ---------------------------------------------------------------------------

struct SynthArgs {
  SynthSpec spec;
  fs::path out_dir;
};

inline void cmd_synth(const SynthArgs& args) {
  auto utts = synthesize(args.spec);
  std::string cns, lats, refs;
  for (const auto& u : utts) {
    cns += serialize_confusion_network(u.cn);
    lats += serialize_lattice(u.lattice);
    refs += u.cn.utterance_id;
    for (const auto& w : u.ref) refs += " " + w;
    refs += "\n";
  }
  write_file(args.out_dir / "cns.txt", cns);
  write_file(args.out_dir / "lattices.txt", lats);
  write_file(args.out_dir / "refs.txt", refs);
}

struct CalibrateArgs {
  fs::path data_dir;
  int bins = 50;
  fs::path out_file;
};

inline void cmd_calibrate(const CalibrateArgs& args) {
  DataOptions opt;
  opt.cn_path = args.data_dir / "cns.txt";
  opt.refs_path = args.data_dir / "refs.txt";
  Dataset data = load_dataset(opt);
  if (data.empty()) throw DataError("calibrate: empty dev set");
  std::vector<double> posts;
  std::vector<int> targets;
  for (const auto& u : data) {
    for (int arc_id : u.one_best) {
      const auto& a = u.graph.arc(arc_id);
      if (a.word == kEpsWord) continue;
      posts.push_back(a.posterior.value_or(0.0));
      targets.push_back(u.targets[u.graph.arc_index.at(arc_id)]);
    }
  }
  PosteriorMap pmap = PosteriorMap::fit(posts, targets, args.bins);
  write_file(args.out_file, pmap.serialize());
}

struct TrainArgs {
  fs::path data_dir;
  fs::path out_dir;
  std::string preset = "word-posteriors";
  ModelConfig model;  // filled from preset, then overridden by flags
  TrainConfig train;
  fs::path word_emb_file;  // optional pre-trained word embeddings
  fs::path pmap_file;      // optional pre-fit calibration map
  double tolerance = 0.5;
  int bins = 50;
  unsigned split_seed = 42;
  int threads = 1;
};

inline void write_resolved_config(const fs::path& out_dir,
                                  const std::string& command,
                                  const std::map<std::string, std::string>& kv) {
  std::string out = "command=" + command + "\n";
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  write_file(out_dir / "resolved_config.txt", out);
}

inline TrainResult cmd_train(const TrainArgs& args) {
  DataOptions opt;
  opt.cn_path = args.data_dir / "cns.txt";
  opt.refs_path = args.data_dir / "refs.txt";
  opt.use_lattice = args.model.use_lattice;
  opt.lattice_path = args.data_dir / "lattices.txt";
  opt.tolerance = args.tolerance;
  Split split = split_dataset(load_dataset(opt), args.split_seed);

  // Vocabularies from the training portion (arcs and references).
  std::set<std::string> wset;
  std::set<std::string> sset;
  for (const auto& u : split.train) {
    for (const auto& a : u.graph.arcs) {
      wset.insert(a.word);
      for (const auto& sw : a.subwords) sset.insert(sw.unit);
    }
    for (const auto& w : u.ref) wset.insert(w);
  }
  EmbeddingTable word_table;
  if (!args.word_emb_file.empty()) {
    word_table = EmbeddingTable::load(read_file(args.word_emb_file));
  } else {
    std::vector<std::string> vocab(wset.begin(), wset.end());
    word_table =
        EmbeddingTable::random_init(vocab, args.model.word_emb_dim, args.model.seed);
  }
  ModelConfig mc = args.model;
  mc.word_emb_dim = word_table.dim();
  EmbeddingTable sub_table;
  if (mc.subword != SubwordFeature::None) {
    std::vector<std::string> svocab(sset.begin(), sset.end());
    sub_table =
        EmbeddingTable::random_init(svocab, mc.sub_emb_dim, mc.seed + 1);
  }
  ConfidenceModel model(mc, std::move(word_table), std::move(sub_table));
  model.norm = fit_norm_stats(split.train);

  if (mc.posterior == PosteriorFeature::Mapped ||
      mc.posterior == PosteriorFeature::RawAndMapped) {
    if (!args.pmap_file.empty()) {
      model.pmap = PosteriorMap::parse(read_file(args.pmap_file));
    } else {
      std::vector<double> posts;
      std::vector<int> targets;
      posterior_baseline(split.train, nullptr, false, &posts, &targets);
      int bins = std::min<int>(args.bins, static_cast<int>(posts.size()));
      model.pmap = PosteriorMap::fit(posts, targets, bins);
    }
  }

  TrainResult res = train(model, split.train, split.cv, args.train);
  write_file(args.out_dir / "checkpoint.txt", save_checkpoint(model));
  write_file(args.out_dir / "train.log", res.log);
  write_resolved_config(
      args.out_dir, "train",
      {{"preset", args.preset},
       {"data_dir", args.data_dir.string()},
       {"split_seed", std::to_string(args.split_seed)},
       {"lr", fmt_real(args.train.lr)},
       {"optimizer", to_string(args.train.optimizer)},
       {"epochs", std::to_string(args.train.epochs)},
       {"patience", std::to_string(args.train.patience)},
       {"clip_norm", fmt_real(args.train.clip_norm)},
       {"train_seed", std::to_string(args.train.seed)},
       {"tolerance", fmt_real(args.tolerance)},
       {"model_config_hash", std::to_string(mc.hash())}});
  return res;
}

struct PredictArgs {
  fs::path checkpoint;
  fs::path data_dir;
  fs::path out_file;
  bool all_arcs = false;
  double tolerance = 0.5;
  int threads = 1;
};

inline void cmd_predict(const PredictArgs& args) {
  ConfidenceModel model = load_checkpoint(read_file(args.checkpoint));
  DataOptions opt;
  opt.cn_path = args.data_dir / "cns.txt";
  opt.refs_path = args.data_dir / "refs.txt";
  opt.use_lattice = model.cfg.use_lattice;
  opt.lattice_path = args.data_dir / "lattices.txt";
  opt.tolerance = args.tolerance;
  Dataset data = load_dataset(opt);
  if (args.all_arcs && !model.cfg.use_graph)
    throw DataError("--all-arcs requires a graph (CN) model checkpoint");
  std::vector<std::string> lines(data.size());
  auto worker = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const Utterance& u = data[i];
      auto pred = model.predict_utterance(u.graph, &u.lattice_feats);
      std::string line = u.id;
      if (args.all_arcs) {
        for (size_t j = 0; j < pred.arc_ids.size(); ++j)
          line += " " + u.graph.arc(pred.arc_ids[j]).word + ":" +
                  fmt_real(pred.confidences[j]);
      } else {
        for (size_t j = 0; j < pred.one_best_arcs.size(); ++j) {
          const auto& a = u.graph.arc(pred.one_best_arcs[j]);
          if (a.word == kEpsWord) continue;
          line += " " + a.word + ":" + fmt_real(pred.one_best_confidences[j]);
        }
      }
      lines[i] = line + "\n";
    }
  };
  int threads = std::max(1, args.threads);
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
  std::string out;
  for (const auto& l : lines) out += l;
  write_file(args.out_file, out);
}

struct EvaluateArgs {
  fs::path checkpoint;       // empty when a baseline is requested
  std::string baseline;      // "", "posterior", "mapped", "oracle"
  fs::path pmap_file;        // for --baseline mapped
  fs::path data_dir;
  fs::path out_dir;
  EvalScope scope = EvalScope::OneBest;
  double tolerance = 0.5;
  int threads = 1;
};

inline EvalReport cmd_evaluate(const EvaluateArgs& args) {
  EvalReport report;
  if (!args.baseline.empty()) {
    DataOptions opt;
    opt.cn_path = args.data_dir / "cns.txt";
    opt.refs_path = args.data_dir / "refs.txt";
    Dataset data = load_dataset(opt);
    std::vector<double> confs;
    std::vector<int> targets;
    if (args.baseline == "oracle") {
      posterior_baseline(data, nullptr, true, &confs, &targets);
    } else if (args.baseline == "posterior") {
      posterior_baseline(data, nullptr, false, &confs, &targets);
    } else if (args.baseline == "mapped") {
      PosteriorMap pmap = PosteriorMap::parse(read_file(args.pmap_file));
      posterior_baseline(data, &pmap, false, &confs, &targets);
    } else {
      throw DataError("unknown baseline '" + args.baseline + "'");
    }
    if (confs.empty()) throw DataError("evaluate: scope yields zero words");
    report = make_report(confs, targets, "one-best");
  } else {
    ConfidenceModel model = load_checkpoint(read_file(args.checkpoint));
    DataOptions opt;
    opt.cn_path = args.data_dir / "cns.txt";
    opt.refs_path = args.data_dir / "refs.txt";
    opt.use_lattice = model.cfg.use_lattice;
    opt.lattice_path = args.data_dir / "lattices.txt";
    opt.tolerance = args.tolerance;
    Dataset data = load_dataset(opt);
    report = evaluate(model, data, args.scope, args.threads);
  }
  write_file(args.out_dir / "report.txt", report.to_text());
  write_file(args.out_dir / "pr_curve.txt", report.curve_text());
  write_resolved_config(args.out_dir, "evaluate",
                        {{"data_dir", args.data_dir.string()},
                         {"scope", to_string(args.scope)},
                         {"baseline", args.baseline},
                         {"checkpoint", args.checkpoint.string()}});
  return report;
}

}  // namespace latconf::cli
