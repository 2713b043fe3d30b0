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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "latconf/cli.hpp"
#include "latconf/synth.hpp"

using namespace latconf;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("latconf_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthesis is deterministic per seed") {
  SynthSpec spec;
  spec.n_utterances = 15;
  auto a = synthesize(spec);
  auto b = synthesize(spec);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(serialize_confusion_network(a[i].cn) ==
          serialize_confusion_network(b[i].cn));
    CHECK(serialize_lattice(a[i].lattice) == serialize_lattice(b[i].lattice));
    CHECK(a[i].ref == b[i].ref);
  }
  spec.seed = 43;
  auto c = synthesize(spec);
  CHECK(serialize_confusion_network(a[0].cn) !=
        serialize_confusion_network(c[0].cn));
}

TEST_CASE("synthetic CNs are well-formed and mirror their lattices") {
  SynthSpec spec;
  spec.n_utterances = 30;
  spec.seed = 9;
  for (const auto& su : synthesize(spec)) {
    // Slot mass sums to 1 and parses back cleanly.
    ConfusionNetwork cn =
        parse_confusion_network(serialize_confusion_network(su.cn));
    for (const auto& s : cn.sets) {
      double mass = 0.0;
      for (const auto& e : s.entries) mass += e.posterior;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(cn.sets.size() == su.ref.size());
    // Forward-backward over the lattice twin reproduces the CN posteriors.
    Lattice scored = compute_arc_posteriors(su.lattice);
    int arc_id = 0;
    for (const auto& s : cn.sets)
      for (const auto& e : s.entries)
        CHECK(*scored.arc(arc_id++).posterior ==
              doctest::Approx(e.posterior).epsilon(1e-9));
    // Sub-word durations partition the word span.
    for (const auto& s : cn.sets)
      for (const auto& e : s.entries) {
        double total = 0.0;
        for (const auto& u : e.subwords) total += u.duration;
        CHECK(total == doctest::Approx(s.time_end - s.time_start).epsilon(1e-9));
      }
  }
}

TEST_CASE("informativeness controls the one-best error rate") {
  auto prevalence = [](double informativeness) {
    SynthSpec spec;
    spec.n_utterances = 400;
    spec.informativeness = informativeness;
    long correct = 0, total = 0;
    for (const auto& su : synthesize(spec)) {
      Utterance u = make_utterance(cn_to_lattice(su.cn), su.ref);
      for (int id : u.one_best) {
        correct += u.targets[u.graph.arc_index.at(id)];
        ++total;
      }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
  };
  double lo = prevalence(0.4), mid = prevalence(0.62), hi = prevalence(0.95);
  CHECK(lo < mid);
  CHECK(mid < hi);
  CHECK(mid == doctest::Approx(0.62).epsilon(0.12));
  CHECK_THROWS_AS(synthesize(SynthSpec{.informativeness = 1.5}), DataError);
}

TEST_CASE("multi-document files split at header lines") {
  std::string text = "CN id=a K=1\nSET k=0 ts=0 te=1\nW=x p=1\n"
                     "CN id=b K=1\nSET k=0 ts=0 te=1\nW=y p=1\n";
  auto docs = cli::split_documents(text, "CN");
  REQUIRE(docs.size() == 2);
  CHECK(parse_confusion_network(docs[0]).utterance_id == "a");
  CHECK(parse_confusion_network(docs[1]).utterance_id == "b");
}

TEST_CASE("reference files reject duplicate utterance ids") {
  fs::path dir = temp_dir("refs");
  cli::write_file(dir / "refs.txt", "u1 a b\nu1 c\n");
  CHECK_THROWS_AS(cli::read_refs(dir / "refs.txt"), ParseError);
  cli::write_file(dir / "ok.txt", "u1 a b\nu2 c\n");
  auto refs = cli::read_refs(dir / "ok.txt");
  CHECK(refs.at("u1") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("cli pipeline: synth, calibrate, train, predict, evaluate") {
  fs::path dir = temp_dir("pipeline");
  cli::SynthArgs sa;
  sa.spec.n_utterances = 120;
  sa.spec.seed = 3;
  sa.out_dir = dir / "data";
  cli::cmd_synth(sa);
  CHECK(fs::exists(dir / "data" / "cns.txt"));
  CHECK(fs::exists(dir / "data" / "lattices.txt"));
  CHECK(fs::exists(dir / "data" / "refs.txt"));

  cli::CalibrateArgs ca;
  ca.data_dir = dir / "data";
  ca.bins = 10;
  ca.out_file = dir / "pmap.txt";
  cli::cmd_calibrate(ca);
  PosteriorMap pmap = PosteriorMap::parse(cli::read_file(dir / "pmap.txt"));
  CHECK(pmap.bins() == 10);

  cli::TrainArgs ta;
  ta.data_dir = dir / "data";
  ta.out_dir = dir / "run";
  ta.preset = "word-mapping";
  ta.model = cli::preset_config("word-mapping");
  ta.model.hidden_size = 6;
  ta.train.epochs = 2;
  auto res = cli::cmd_train(ta);
  CHECK(res.epochs_run == 2);
  CHECK(fs::exists(dir / "run" / "checkpoint.txt"));
  CHECK(fs::exists(dir / "run" / "train.log"));
  std::string rc = cli::read_file(dir / "run" / "resolved_config.txt");
  CHECK(rc.find("command=train") != std::string::npos);
  CHECK(rc.find("preset=word-mapping") != std::string::npos);

  cli::PredictArgs pa;
  pa.checkpoint = dir / "run" / "checkpoint.txt";
  pa.data_dir = dir / "data";
  pa.out_file = dir / "pred.txt";
  cli::cmd_predict(pa);
  std::string pred = cli::read_file(dir / "pred.txt");
  CHECK(pred.rfind("utt0 ", 0) == 0);
  CHECK(pred.find(":") != std::string::npos);

  // Predictions are byte-identical across repeated runs.
  pa.out_file = dir / "pred2.txt";
  cli::cmd_predict(pa);
  CHECK(cli::read_file(dir / "pred2.txt") == pred);

  // Multi-threaded prediction matches too.
  pa.out_file = dir / "pred4.txt";
  pa.threads = 4;
  cli::cmd_predict(pa);
  CHECK(cli::read_file(dir / "pred4.txt") == pred);

  cli::EvaluateArgs ea;
  ea.checkpoint = dir / "run" / "checkpoint.txt";
  ea.data_dir = dir / "data";
  ea.out_dir = dir / "eval";
  EvalReport r = cli::cmd_evaluate(ea);
  CHECK(fs::exists(dir / "eval" / "report.txt"));
  CHECK(fs::exists(dir / "eval" / "pr_curve.txt"));
  CHECK(r.n_words > 0);

  // Baselines: oracle dominates the raw posterior.
  cli::EvaluateArgs eb;
  eb.baseline = "posterior";
  eb.data_dir = dir / "data";
  eb.out_dir = dir / "eval_base";
  EvalReport base = cli::cmd_evaluate(eb);
  eb.baseline = "oracle";
  eb.out_dir = dir / "eval_oracle";
  EvalReport oracle = cli::cmd_evaluate(eb);
  CHECK(oracle.nce >= 1.0 - 1e-6);
  CHECK(oracle.nce > base.nce);
  eb.baseline = "mapped";
  eb.pmap_file = dir / "pmap.txt";
  eb.out_dir = dir / "eval_mapped";
  EvalReport mapped = cli::cmd_evaluate(eb);
  CHECK(mapped.nce > base.nce);  // calibration can only help here
  eb.baseline = "bogus";
  CHECK_THROWS_AS(cli::cmd_evaluate(eb), DataError);
}

TEST_CASE("lattice-feature training path aligns the CN against the lattice") {
  fs::path dir = temp_dir("latfeat");
  cli::SynthArgs sa;
  sa.spec.n_utterances = 60;
  sa.spec.seed = 4;
  sa.out_dir = dir / "data";
  cli::cmd_synth(sa);

  cli::TrainArgs ta;
  ta.data_dir = dir / "data";
  ta.out_dir = dir / "run";
  ta.preset = "lattice";
  ta.model = cli::preset_config("lattice");
  ta.model.hidden_size = 4;
  ta.model.subword_hidden_size = 2;
  ta.train.epochs = 1;
  auto res = cli::cmd_train(ta);
  CHECK(res.epochs_run == 1);

  cli::PredictArgs pa;
  pa.checkpoint = dir / "run" / "checkpoint.txt";
  pa.data_dir = dir / "data";
  pa.out_file = dir / "pred.txt";
  pa.all_arcs = true;
  cli::cmd_predict(pa);
  CHECK(!cli::read_file(dir / "pred.txt").empty());
}

TEST_CASE("all-arcs prediction requires a graph model") {
  fs::path dir = temp_dir("allarcs");
  cli::SynthArgs sa;
  sa.spec.n_utterances = 30;
  sa.out_dir = dir / "data";
  cli::cmd_synth(sa);
  cli::TrainArgs ta;
  ta.data_dir = dir / "data";
  ta.out_dir = dir / "run";
  ta.preset = "words";
  ta.model = cli::preset_config("words");
  ta.model.hidden_size = 4;
  ta.train.epochs = 1;
  cli::cmd_train(ta);
  cli::PredictArgs pa;
  pa.checkpoint = dir / "run" / "checkpoint.txt";
  pa.data_dir = dir / "data";
  pa.out_file = dir / "pred.txt";
  pa.all_arcs = true;
  CHECK_THROWS_AS(cli::cmd_predict(pa), DataError);
}

TEST_CASE("dataset split is an 8:1:1 seeded partition") {
  fs::path dir = temp_dir("split");
  cli::SynthArgs sa;
  sa.spec.n_utterances = 100;
  sa.out_dir = dir / "data";
  cli::cmd_synth(sa);
  cli::DataOptions opt;
  opt.cn_path = dir / "data" / "cns.txt";
  opt.refs_path = dir / "data" / "refs.txt";
  Dataset data = cli::load_dataset(opt);
  cli::Split s1 = cli::split_dataset(data, 42);
  CHECK(s1.train.size() == 80);
  CHECK(s1.cv.size() == 10);
  CHECK(s1.test.size() == 10);
  cli::Split s2 = cli::split_dataset(data, 42);
  for (size_t i = 0; i < s1.test.size(); ++i)
    CHECK(s1.test[i].id == s2.test[i].id);
  std::set<std::string> ids;
  for (const auto& u : s1.train) ids.insert(u.id);
  for (const auto& u : s1.cv) ids.insert(u.id);
  for (const auto& u : s1.test) ids.insert(u.id);
  CHECK(ids.size() == 100);
}
