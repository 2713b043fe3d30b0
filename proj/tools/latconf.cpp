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

#include <iostream>

#include "CLI11.hpp"
#include "latconf/cli.hpp"

namespace {

using namespace latconf;
using namespace latconf::cli;

int dispatch(int argc, char** argv) {
  CLI::App app{"Per-word confidence estimation over confusion networks "
               "and lattices"};
  app.require_subcommand(1);

  // synth ---------------------------------------------------------------
  SynthArgs sa;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--utterances", sa.spec.n_utterances, "Corpus size");
  synth->add_option("--vocab", sa.spec.vocab_size, "Vocabulary size");
  synth->add_option("--mean-length", sa.spec.mean_length, "Mean words/utt");
  synth->add_option("--max-branching", sa.spec.max_branching,
                    "Max competitors per slot");
  synth->add_option("--informativeness", sa.spec.informativeness,
                    "P(one-best word is correct)");
  synth->add_option("--seed", sa.spec.seed, "Random seed");

  // calibrate -----------------------------------------------------------
  CalibrateArgs ca;
  std::string cal_data, cal_out;
  auto* cal = app.add_subcommand(
      "calibrate", "Fit an equal-count posterior calibration map");
  cal->add_option("--data", cal_data, "Directory with cns.txt + refs.txt")
      ->required();
  cal->add_option("--bins", ca.bins, "Number of bins");
  cal->add_option("--out", cal_out, "Output map file")->required();

  // train ---------------------------------------------------------------
  TrainArgs ta;
  std::string tr_data, tr_out, tr_emb, tr_pmap;
  auto* tr = app.add_subcommand("train", "Train a confidence estimator");
  tr->add_option("--data", tr_data, "Directory with cns.txt/lattices.txt/refs.txt")
      ->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--preset", ta.preset,
                 "Feature preset (see README for the ladder)");
  tr->add_option("--epochs", ta.train.epochs, "Max epochs");
  tr->add_option("--patience", ta.train.patience, "Early-stop patience");
  tr->add_option("--lr", ta.train.lr, "Learning rate");
  std::string optimizer = "adam";
  tr->add_option("--optimizer", optimizer, "adam|sgd");
  tr->add_option("--clip-norm", ta.train.clip_norm, "Global grad-norm clip");
  tr->add_option("--seed", ta.train.seed, "Training seed");
  tr->add_option("--split-seed", ta.split_seed, "Data split seed");
  int hidden = -1, sub_hidden = -1;
  std::string cell, attention;
  tr->add_option("--hidden", hidden, "Hidden state size");
  tr->add_option("--sub-hidden", sub_hidden, "Sub-word hidden size");
  tr->add_option("--cell", cell, "rnn|gru");
  tr->add_option("--attention", attention, "dot|mult|add");
  tr->add_option("--word-embeddings", tr_emb,
                 "Pre-trained word embedding file (frozen)");
  tr->add_option("--posterior-map", tr_pmap, "Pre-fit calibration map file");
  tr->add_option("--bins", ta.bins, "Calibration bins when fitting inline");
  tr->add_option("--tolerance", ta.tolerance, "CN-lattice overlap tolerance");
  tr->add_option("--threads", ta.threads, "Worker threads");

  // predict ---------------------------------------------------------------
  PredictArgs pa;
  std::string pr_ckpt, pr_data, pr_out;
  auto* pr = app.add_subcommand("predict", "Score utterances with a model");
  pr->add_option("--checkpoint", pr_ckpt, "Model checkpoint")->required();
  pr->add_option("--data", pr_data, "Data directory")->required();
  pr->add_option("--out", pr_out, "Output file")->required();
  pr->add_flag("--all-arcs", pa.all_arcs, "Score every arc, not just one-best");
  pr->add_option("--tolerance", pa.tolerance, "CN-lattice overlap tolerance");
  pr->add_option("--threads", pa.threads, "Worker threads");

  // evaluate ---------------------------------------------------------------
  EvaluateArgs ea;
  std::string ev_ckpt, ev_data, ev_out, ev_scope = "one-best", ev_pmap;
  auto* ev = app.add_subcommand("evaluate", "Report NCE and PR-AUC");
  ev->add_option("--checkpoint", ev_ckpt, "Model checkpoint");
  ev->add_option("--baseline", ea.baseline,
                 "posterior|mapped|oracle (instead of a checkpoint)");
  ev->add_option("--posterior-map", ev_pmap, "Map file for --baseline mapped");
  ev->add_option("--data", ev_data, "Data directory")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--scope", ev_scope, "one-best|all-arcs");
  ev->add_option("--tolerance", ea.tolerance, "CN-lattice overlap tolerance");
  ev->add_option("--threads", ea.threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (synth->parsed()) {
    sa.out_dir = synth_out;
    cmd_synth(sa);
    write_resolved_config(
        sa.out_dir, "synth",
        {{"utterances", std::to_string(sa.spec.n_utterances)},
         {"vocab", std::to_string(sa.spec.vocab_size)},
         {"mean_length", fmt_real(sa.spec.mean_length)},
         {"max_branching", std::to_string(sa.spec.max_branching)},
         {"informativeness", fmt_real(sa.spec.informativeness)},
         {"seed", std::to_string(sa.spec.seed)}});
  } else if (cal->parsed()) {
    ca.data_dir = cal_data;
    ca.out_file = cal_out;
    cmd_calibrate(ca);
  } else if (tr->parsed()) {
    ta.data_dir = tr_data;
    ta.out_dir = tr_out;
    ta.word_emb_file = tr_emb;
    ta.pmap_file = tr_pmap;
    ta.model = preset_config(ta.preset);
    if (hidden > 0) ta.model.hidden_size = hidden;
    if (sub_hidden > 0) ta.model.subword_hidden_size = sub_hidden;
    if (!cell.empty()) ta.model.cell = nn::cell_from_string(cell);
    if (!attention.empty())
      ta.model.attention = nn::attention_from_string(attention);
    ta.model.seed = ta.train.seed;
    ta.train.optimizer = optimizer_from_string(optimizer);
    TrainResult res = cmd_train(ta);
    std::cout << res.log;
    std::cout << "best_epoch=" << res.best_epoch
              << " best_cv_nce=" << fmt_real(res.best_cv_nce) << "\n";
  } else if (pr->parsed()) {
    pa.checkpoint = pr_ckpt;
    pa.data_dir = pr_data;
    pa.out_file = pr_out;
    cmd_predict(pa);
  } else if (ev->parsed()) {
    ea.checkpoint = ev_ckpt;
    ea.data_dir = ev_data;
    ea.out_dir = ev_out;
    ea.pmap_file = ev_pmap;
    if (ev_scope == "one-best")
      ea.scope = EvalScope::OneBest;
    else if (ev_scope == "all-arcs")
      ea.scope = EvalScope::AllArcs;
    else
      throw DataError("unknown scope '" + ev_scope + "'");
    if (ea.baseline.empty() && ev_ckpt.empty())
      throw DataError("evaluate needs --checkpoint or --baseline");
    EvalReport report = cmd_evaluate(ea);
    std::cout << report.to_text();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const latconf::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return latconf::cli::kExitData;
  } catch (const latconf::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return latconf::cli::kExitData;
  } catch (const latconf::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return latconf::cli::kExitNumeric;
  } catch (const latconf::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return latconf::cli::kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return latconf::cli::kExitUsage;
  }
}
