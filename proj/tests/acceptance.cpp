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
//
// Acceptance gate: every release-blocking property is exercised here, one
// PASS/FAIL line each. Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "../tests/helpers.hpp"
#include "latconf/cli.hpp"
#include "latconf/synth.hpp"
#include "latconf/train.hpp"

using namespace latconf;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  %s  (%s)\n", pass ? "PASS" : "FAIL", name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string fmt_seconds(double s) { return fmt_real(s, 3) + "s"; }

// -----------------------------------------------------------------------
// 1. Scope note: published corpus scores are not reproducible here.
// -----------------------------------------------------------------------
void criterion_scope_note() {
  report("scope: corpus-score reproduction out of scope", true,
         "the original evaluation corpus is not distributable; this gate "
         "checks oracles, identities and orderings on synthetic data");
}

// -----------------------------------------------------------------------
// 2. Gradient correctness on a 5-arc lattice, additive attention +
//    sub-word encoder, central differences eps=1e-5, rel err < 1e-4.
// -----------------------------------------------------------------------
void criterion_gradients() {
  double t0 = now_seconds();
  auto sw = [](const std::string& w, double dur) {
    std::vector<SubwordUnit> out;
    for (char c : w)
      out.push_back({std::string(1, c), dur / w.size(), std::nullopt});
    return out;
  };
  ConfusionNetwork cn;
  cn.utterance_id = "g";
  ConfusionSet s0{0.0, 0.4, {{"aa", 0.7, sw("aa", 0.4)},
                             {"bb", 0.3, sw("bb", 0.4)}}};
  ConfusionSet s1{0.4, 0.9, {{"cc", 0.5, sw("cc", 0.5)},
                             {"dd", 0.3, sw("dd", 0.5)},
                             {"ee", 0.2, sw("ee", 0.5)}}};
  cn.sets = {s0, s1};
  Lattice lat = cn_to_lattice(cn);

  ModelConfig cfg;
  cfg.hidden_size = 3;
  cfg.subword_hidden_size = 2;
  cfg.word_emb_dim = 2;
  cfg.sub_emb_dim = 2;
  cfg.use_graph = true;
  cfg.attention = nn::AttentionType::Add;
  cfg.subword = SubwordFeature::Encoder;
  cfg.posterior = PosteriorFeature::Raw;
  ConfidenceModel model(
      cfg, EmbeddingTable::random_init({"aa", "bb", "cc", "dd", "ee"}, 2, 42),
      EmbeddingTable::random_init({"a", "b", "c", "d", "e"}, 2, 43));
  std::vector<double> targets = {1.0, 0.0, 1.0, 0.0, 0.0};
  auto loss = [&](bool g) {
    nn::Tape t;
    ScoredGraph sg = model.score(t, lat);
    nn::Tape::Id l = t.bce_mean(sg.conf_ids, targets);
    if (g) {
      model.params.zero_grads();
      t.backward(l);
    }
    return t.scalar_value(l);
  };
  auto rep = nn::finite_difference_check(model.params, loss, 1e-5);
  double dt = now_seconds() - t0;
  report("gradients: analytic vs central differences",
         rep.pass(1e-4) && dt < 10.0,
         std::to_string(rep.checked) + " params, max rel err " +
             fmt_real(rep.max_rel_err, 3) + ", " + fmt_seconds(dt));
}

// -----------------------------------------------------------------------
// 3. Chain equivalence: graph forward == sequence forward on 100 random
//    linear-chain CNs with shared parameters, within 1e-9.
// -----------------------------------------------------------------------
void criterion_chain_equivalence() {
  double t0 = now_seconds();
  std::mt19937_64 rng(123);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    ConfusionNetwork cn = testutil::random_cn(rng, 1);
    Lattice chain = cn_to_lattice(cn);
    ModelConfig cfg;
    cfg.hidden_size = 8;
    cfg.word_emb_dim = 3;
    cfg.posterior = PosteriorFeature::Raw;
    EmbeddingTable words =
        EmbeddingTable::random_init({"aa", "bb", "cc", "dd", "ee", "ff"}, 3, 42);
    ConfidenceModel seq_model(cfg, words);
    ModelConfig gcfg = cfg;
    gcfg.use_graph = true;
    ConfidenceModel graph_model(gcfg, words);
    nn::Tape t1, t2;
    ScoredGraph a = seq_model.score(t1, chain);
    ScoredGraph b = graph_model.score(t2, chain);
    std::map<int, double> by_id;
    for (size_t k = 0; k < b.arc_ids.size(); ++k)
      by_id[b.arc_ids[k]] = b.confidences[k];
    for (size_t k = 0; k < a.arc_ids.size(); ++k)
      worst = std::max(worst,
                       std::abs(a.confidences[k] - by_id.at(a.arc_ids[k])));
  }
  double dt = now_seconds() - t0;
  report("chain equivalence: graph forward vs sequence forward",
         worst < 1e-9 && dt < 5.0,
         "100 chains, max |diff| " + fmt_real(worst, 3) + ", " +
             fmt_seconds(dt));
}

// -----------------------------------------------------------------------
// 4. Forward-backward posteriors vs exhaustive enumeration; node-cut sums.
// -----------------------------------------------------------------------
void criterion_posteriors() {
  std::mt19937_64 rng(321);
  double worst_post = 0.0, worst_cut = 0.0;
  for (int i = 0; i < 50; ++i) {
    Lattice lat = testutil::random_dag(rng, 64);
    Lattice scored = compute_arc_posteriors(lat);
    auto brute = testutil::brute_posteriors(lat);
    for (const auto& a : scored.arcs)
      worst_post = std::max(worst_post, std::abs(*a.posterior - brute.at(a.id)));
    std::map<int, int> pos;
    for (size_t k = 0; k < scored.topo_nodes.size(); ++k)
      pos[scored.topo_nodes[k]] = static_cast<int>(k);
    for (size_t cut = 1; cut < scored.topo_nodes.size(); ++cut) {
      double sum = 0.0;
      for (const auto& a : scored.arcs)
        if (pos[a.start_node] < static_cast<int>(cut) &&
            pos[a.end_node] >= static_cast<int>(cut))
          sum += *a.posterior;
      worst_cut = std::max(worst_cut, std::abs(sum - 1.0));
    }
  }
  report("posteriors: forward-backward vs path enumeration",
         worst_post < 1e-12 && worst_cut < 1e-9,
         "50 lattices, max posterior err " + fmt_real(worst_post, 3) +
             ", max cut-sum err " + fmt_real(worst_cut, 3));
}

// -----------------------------------------------------------------------
// 5. Metric identities.
// -----------------------------------------------------------------------
void criterion_metrics() {
  std::vector<int> targets = {1, 0, 0, 1, 0, 1, 0, 0, 0, 1};
  double pbar = 0.4;
  std::vector<double> prior(targets.size(), pbar);
  bool prior_zero = nce(prior, targets) == 0.0;

  std::vector<double> oracle;
  for (int t : targets) oracle.push_back(static_cast<double>(t));
  bool oracle_one = nce(oracle, targets) >= 1.0 - 1e-6;

  std::vector<double> constant(targets.size(), 0.3);
  bool ap_prev = pr_auc(constant, targets) == pbar;

  std::vector<int> t4 = {1, 0, 1, 0};
  std::vector<double> c4 = {0.9, 0.8, 0.7, 0.1};
  bool ap_example = pr_auc(c4, t4) == 5.0 / 6.0;

  report("metrics: nce and average-precision identities",
         prior_zero && oracle_one && ap_prev && ap_example,
         std::string("nce(prior)=0 ") + (prior_zero ? "exact" : "VIOLATED") +
             ", nce(oracle)>=1-1e-6 " + (oracle_one ? "ok" : "VIOLATED") +
             ", ap(const)=prevalence " + (ap_prev ? "exact" : "VIOLATED") +
             ", ap(example)=5/6 " + (ap_example ? "exact" : "VIOLATED"));
}

// -----------------------------------------------------------------------
// 6. End-to-end feature ladder on synthetic data, 3 seeds.
// -----------------------------------------------------------------------
struct LadderScores {
  double nce = 0.0, auc = 0.0;
};

LadderScores run_preset(const cli::Split& split, ModelConfig cfg,
                        unsigned seed) {
  cfg.seed = seed;
  cfg.word_emb_dim = 6;
  cfg.hidden_size = 16;
  std::set<std::string> vocab;
  for (const auto& u : split.train) {
    for (const auto& a : u.graph.arcs) vocab.insert(a.word);
    for (const auto& w : u.ref) vocab.insert(w);
  }
  ConfidenceModel model(
      cfg, EmbeddingTable::random_init(
               std::vector<std::string>(vocab.begin(), vocab.end()), 6, seed));
  model.norm = fit_norm_stats(split.train);
  TrainConfig tc;
  tc.epochs = 10;
  tc.patience = 3;
  tc.seed = seed;
  train(model, split.train, split.cv, tc);
  EvalReport r = evaluate(model, split.test, EvalScope::OneBest, 4);
  return {r.nce, r.pr_auc};
}

void criterion_ladder() {
  double t0 = now_seconds();
  SynthSpec spec;
  spec.n_utterances = 5000;
  spec.informativeness = 0.62;
  spec.seed = 42;
  auto utts = synthesize(spec);
  Dataset data;
  data.reserve(utts.size());
  for (const auto& su : utts)
    data.push_back(make_utterance(cn_to_lattice(su.cn), su.ref));
  cli::Split split = cli::split_dataset(std::move(data), 42);

  bool all_ok = true;
  std::string detail;
  for (unsigned seed : {1u, 2u, 3u}) {
    LadderScores words = run_preset(split, cli::preset_config("words"), seed);
    LadderScores dur =
        run_preset(split, cli::preset_config("word-duration"), seed);
    LadderScores post =
        run_preset(split, cli::preset_config("word-posteriors"), seed);
    // Same features as the BiRNN row, but aggregated over the whole
    // confusion network and supervised on every arc.
    ModelConfig graph_cfg = cli::preset_config("word-posteriors");
    graph_cfg.use_graph = true;
    graph_cfg.loss_mode = LossMode::AllArcs;
    LadderScores bilat = run_preset(split, graph_cfg, seed);
    bool ok = words.nce < dur.nce && dur.nce < post.nce &&
              bilat.auc >= post.auc;
    all_ok = all_ok && ok;
    detail += "seed " + std::to_string(seed) + ": nce " +
              fmt_real(words.nce, 3) + "<" + fmt_real(dur.nce, 3) + "<" +
              fmt_real(post.nce, 3) + ", auc " + fmt_real(bilat.auc, 4) +
              ">=" + fmt_real(post.auc, 4) + (ok ? " ok; " : " VIOLATED; ");
  }
  double dt = now_seconds() - t0;
  report("end-to-end: feature ladder ordering on synthetic data",
         all_ok && dt < 1800.0, detail + fmt_seconds(dt));
}

// -----------------------------------------------------------------------
// 7. Alignment: exhaustive oracle + tolerance monotonicity.
// -----------------------------------------------------------------------
namespace oracle {

// Memoized top-down minimum edit cost, written independently of the
// production bottom-up DP.
int edit_cost(const std::vector<std::string>& h, const std::vector<std::string>& r,
              size_t i, size_t j, std::vector<int>& memo, size_t cols) {
  int& slot = memo[i * cols + j];
  if (slot >= 0) return slot;
  int best;
  if (i == h.size())
    best = static_cast<int>(r.size() - j);
  else if (j == r.size())
    best = static_cast<int>(h.size() - i);
  else {
    best = edit_cost(h, r, i + 1, j + 1, memo, cols) + (h[i] == r[j] ? 0 : 1);
    best = std::min(best, edit_cost(h, r, i + 1, j, memo, cols) + 1);
    best = std::min(best, edit_cost(h, r, i, j + 1, memo, cols) + 1);
  }
  slot = best;
  return best;
}

}  // namespace oracle

void criterion_alignment() {
  double t0 = now_seconds();
  static const std::vector<std::string> vocab = {"x", "y", "z"};
  // Enumerate every sequence of length <= 6 over the 3-word vocabulary.
  std::vector<std::vector<std::string>> seqs = {{}};
  {
    std::vector<std::vector<std::string>> frontier = {{}};
    for (int l = 0; l < 6; ++l) {
      std::vector<std::vector<std::string>> next;
      for (const auto& s : frontier)
        for (const auto& w : vocab) {
          auto s2 = s;
          s2.push_back(w);
          next.push_back(std::move(s2));
        }
      seqs.insert(seqs.end(), next.begin(), next.end());
      frontier = std::move(next);
    }
  }
  long mismatches = 0, pairs = 0;
  for (const auto& h : seqs) {
    for (const auto& r : seqs) {
      ++pairs;
      auto res = levenshtein_align(h, r);
      size_t cols = r.size() + 1;
      std::vector<int> memo((h.size() + 1) * cols, -1);
      int want = oracle::edit_cost(h, r, 0, 0, memo, cols);
      if (res.edit_distance != want) {
        ++mismatches;
        continue;
      }
      // The emitted alignment must reproduce its own distance.
      int matches = 0, subs = 0, ins = 0;
      for (size_t i = 0; i < h.size(); ++i) {
        if (!res.hyp[i].ref_index)
          ++ins;
        else if (res.hyp[i].target)
          ++matches;
        else
          ++subs;
      }
      int dels = static_cast<int>(r.size()) - matches - subs;
      if (dels < 0 || res.edit_distance != subs + ins + dels) ++mismatches;
    }
  }

  // Tolerance monotonicity on 100 random CN/lattice pairs.
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0;
  for (int t = 0; t < 100; ++t) {
    ConfusionNetwork cn = testutil::random_cn(rng);
    Lattice lat = cn_to_lattice(cn);
    for (size_t i = 1; i + 1 < lat.nodes.size(); ++i)
      lat.nodes[i].time += 0.05 * (u(rng) - 0.5);
    for (size_t i = 1; i < lat.nodes.size(); ++i)
      lat.nodes[i].time = std::max(lat.nodes[i].time, lat.nodes[i - 1].time);
    validate(lat);
    double t_lo = 0.3 + 0.3 * u(rng);
    double t_hi = t_lo + (1.0 - t_lo) * u(rng);
    auto lo = align_cn_to_lattice(cn, lat, t_lo);
    auto hi = align_cn_to_lattice(cn, lat, t_hi);
    for (size_t k = 0; k < cn.sets.size(); ++k)
      for (size_t i = 0; i < cn.sets[k].entries.size(); ++i)
        for (int id : hi.matched[k][i])
          if (!std::count(lo.matched[k][i].begin(), lo.matched[k][i].end(), id))
            ++violations;
  }
  double dt = now_seconds() - t0;
  report("alignment: exhaustive edit-distance oracle + monotone matching",
         mismatches == 0 && violations == 0,
         std::to_string(pairs) + " pairs, " + std::to_string(mismatches) +
             " mismatches, " + std::to_string(violations) +
             " monotonicity violations, " + fmt_seconds(dt));
}

// -----------------------------------------------------------------------
// 8. Determinism: train + predict twice, byte-identical outputs.
// -----------------------------------------------------------------------
void criterion_determinism() {
  double t0 = now_seconds();
  fs::path base = fs::temp_directory_path() / "latconf_acceptance";
  fs::remove_all(base);
  cli::SynthArgs sa;
  sa.spec.n_utterances = 150;
  sa.spec.seed = 11;
  sa.out_dir = base / "data";
  cli::cmd_synth(sa);

  auto run = [&](const std::string& tag) {
    cli::TrainArgs ta;
    ta.data_dir = base / "data";
    ta.out_dir = base / tag;
    ta.preset = "cn-cn";
    ta.model = cli::preset_config("cn-cn");
    ta.model.hidden_size = 6;
    ta.train.epochs = 2;
    cli::cmd_train(ta);
    cli::PredictArgs pa;
    pa.checkpoint = base / tag / "checkpoint.txt";
    pa.data_dir = base / "data";
    pa.out_file = base / tag / "pred.txt";
    pa.all_arcs = true;
    cli::cmd_predict(pa);
    return cli::read_file(base / tag / "checkpoint.txt") + "\x1f" +
           cli::read_file(base / tag / "train.log") + "\x1f" +
           cli::read_file(base / tag / "pred.txt");
  };
  std::string a = run("run_a");
  std::string b = run("run_b");
  double dt = now_seconds() - t0;
  report("determinism: repeated train+predict are byte-identical", a == b,
         a == b ? "outputs identical, " + fmt_seconds(dt)
                : "outputs differ, " + fmt_seconds(dt));
  fs::remove_all(base);
}

}  // namespace

int main() {
  criterion_scope_note();
  criterion_gradients();
  criterion_chain_equivalence();
  criterion_posteriors();
  criterion_metrics();
  criterion_ladder();
  criterion_alignment();
  criterion_determinism();
  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
