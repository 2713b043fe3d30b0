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

#include <random>
#include <string>
#include <vector>

#include "latconf/lattice.hpp"

namespace latconf {

/// Controls for the synthetic CN/lattice/reference generator. The generator
/// builds time-aligned confusion slots so the CN is an exact linearization of
/// the lattice, and plants signal in word identity (per-word error rates),
/// duration (errors run short) and confusion density (errors attract more
/// competitors), so every feature of the ablation ladder carries information.
struct SynthSpec {
  int n_utterances = 100;
  int vocab_size = 50;
  int alphabet_size = 10;   // grapheme alphabet, 'a' onwards
  double mean_length = 8.0;  // words per utterance
  int max_branching = 5;
  double informativeness = 0.62;  // P(one-best word is correct)
  unsigned seed = 42;

  void validate() const {
    if (n_utterances < 1 || vocab_size < 2 || alphabet_size < 2 ||
        max_branching < 2)
      throw DataError("synth: sizes out of range");
    if (mean_length < 1.0) throw DataError("synth: mean_length must be >= 1");
    if (informativeness < 0.0 || informativeness > 1.0)
      throw DataError("synth: informativeness must be in [0,1]");
  }
};

struct SynthUtterance {
  ConfusionNetwork cn;
  Lattice lattice;
  std::vector<std::string> ref;
};

namespace detail {

inline std::vector<std::string> synth_vocab(const SynthSpec& spec,
                                            std::mt19937_64& rng) {
  std::vector<std::string> vocab;
  std::set<std::string> seen;
  std::uniform_int_distribution<int> len_dist(3, 7);
  std::uniform_int_distribution<int> ch_dist(0, spec.alphabet_size - 1);
  while (static_cast<int>(vocab.size()) < spec.vocab_size) {
    int len = len_dist(rng);
    std::string w;
    for (int i = 0; i < len; ++i) w += static_cast<char>('a' + ch_dist(rng));
    while (seen.count(w)) w += static_cast<char>('a' + ch_dist(rng));
    seen.insert(w);
    vocab.push_back(w);
  }
  return vocab;
}

inline std::vector<SubwordUnit> graphemes_of(const std::string& word,
                                             double duration) {
  std::vector<SubwordUnit> out;
  double per = duration / static_cast<double>(word.size());
  for (char c : word) out.push_back({std::string(1, c), per, std::nullopt});
  return out;
}

}  // namespace detail

inline std::vector<SynthUtterance> synthesize(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto vocab = detail::synth_vocab(spec, rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SynthUtterance> out;
  out.reserve(spec.n_utterances);
  for (int uidx = 0; uidx < spec.n_utterances; ++uidx) {
    SynthUtterance su;
    std::string utt_id = "utt" + std::to_string(uidx);
    su.cn.utterance_id = utt_id;

    std::poisson_distribution<int> len_dist(spec.mean_length - 1.0);
    int n_slots = 1 + len_dist(rng);
    double t = 0.0;
    bool prev_wrong = false;
    for (int k = 0; k < n_slots; ++k) {
      int ref_idx = static_cast<int>(unit(rng) * vocab.size());
      ref_idx = std::min(ref_idx, spec.vocab_size - 1);
      const std::string& ref_word = vocab[ref_idx];
      su.ref.push_back(ref_word);

      // Per-word hardness modulates the base error rate; the first half of
      // the vocabulary is easy, the second half hard.
      double hardness = ref_idx < spec.vocab_size / 2 ? 0.5 : 1.5;
      double p_wrong = std::min(1.0, (1.0 - spec.informativeness) * hardness);
      // Errors come in bursts: half the time a slot copies its predecessor's
      // correctness, which preserves the marginal error rate but makes the
      // neighbourhood of a word informative about the word itself.
      bool wrong;
      if (k > 0 && unit(rng) < 0.5)
        wrong = prev_wrong;
      else
        wrong = unit(rng) < p_wrong;
      prev_wrong = wrong;

      // Winner word, branching and winner posterior.
      int branching;
      std::string winner;
      double p_winner;
      if (wrong) {
        branching = std::min(spec.max_branching, 3 + static_cast<int>(unit(rng) * 3));
        int w;
        do {
          w = static_cast<int>(unit(rng) * vocab.size());
          w = std::min(w, spec.vocab_size - 1);
        } while (w == ref_idx);
        winner = vocab[w];
        p_winner = 0.5 + 0.4 * unit(rng);
      } else {
        double u = unit(rng);
        branching = u < 0.5 ? 1 : (u < 0.85 ? 2 : 3);
        branching = std::min(branching, spec.max_branching);
        winner = ref_word;
        p_winner = branching == 1 ? 1.0 : 0.6 + 0.38 * unit(rng);
      }

      // Duration: proportional to grapheme count; errors run short.
      double base = 0.08 * static_cast<double>(winner.size());
      double mult = wrong ? 0.5 + 0.5 * unit(rng) : 0.65 + 0.6 * unit(rng);
      double dur = base * mult;

      ConfusionSet set;
      set.time_start = t;
      set.time_end = t + dur;
      t = set.time_end;

      std::vector<std::pair<std::string, double>> entries;
      entries.push_back({winner, p_winner});
      std::set<std::string> used = {winner};
      // When the winner is wrong, the reference word usually appears among
      // the competitors.
      if (wrong && branching >= 2 && unit(rng) < 0.7) {
        entries.push_back({ref_word, 0.0});
        used.insert(ref_word);
      }
      while (static_cast<int>(entries.size()) < branching) {
        // Competitor identities carry signal of their own: wrong slots
        // attract competitors from the hard half of the vocabulary, correct
        // slots from the easy half. Only models that look at competing arcs
        // can exploit this.
        int half = spec.vocab_size / 2;
        int w;
        if (unit(rng) < 0.9) {
          if (wrong)
            w = half + static_cast<int>(unit(rng) * (spec.vocab_size - half));
          else
            w = static_cast<int>(unit(rng) * half);
        } else {
          w = static_cast<int>(unit(rng) * vocab.size());
        }
        w = std::min(std::max(w, 0), spec.vocab_size - 1);
        if (used.count(vocab[w])) continue;
        used.insert(vocab[w]);
        entries.push_back({vocab[w], 0.0});
      }
      // Losers share the remaining mass with random proportions.
      if (entries.size() > 1) {
        std::vector<double> w(entries.size() - 1);
        double wsum = 0.0;
        for (double& x : w) {
          x = 0.05 + unit(rng);
          wsum += x;
        }
        for (size_t i = 1; i < entries.size(); ++i)
          entries[i].second = (1.0 - p_winner) * w[i - 1] / wsum;
      }
      for (const auto& [word, p] : entries) {
        ConfusionEntry e;
        e.word = word;
        e.posterior = p;
        e.subwords = detail::graphemes_of(word, dur);
        set.entries.push_back(std::move(e));
      }
      su.cn.sets.push_back(std::move(set));
    }

    // Lattice twin: same slots, posteriors factored into am/lm log scores so
    // forward-backward reproduces them.
    su.lattice.utterance_id = utt_id;
    su.lattice.nodes.push_back({0, su.cn.sets.front().time_start});
    for (size_t k = 0; k < su.cn.sets.size(); ++k)
      su.lattice.nodes.push_back(
          {static_cast<int>(k) + 1, su.cn.sets[k].time_end});
    int arc_id = 0;
    for (size_t k = 0; k < su.cn.sets.size(); ++k) {
      for (const auto& e : su.cn.sets[k].entries) {
        LatticeArc a;
        a.id = arc_id++;
        a.start_node = static_cast<int>(k);
        a.end_node = static_cast<int>(k) + 1;
        a.word = e.word;
        double lp = std::log(clamp_prob(e.posterior));
        a.am_score = 0.7 * lp;
        a.lm_score = 0.3 * lp;
        a.subwords = e.subwords;
        su.lattice.arcs.push_back(std::move(a));
      }
    }
    validate(su.lattice);
    out.push_back(std::move(su));
  }
  return out;
}

}  // namespace latconf
