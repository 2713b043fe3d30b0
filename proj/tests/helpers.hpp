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

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "latconf/lattice.hpp"

namespace testutil {

using namespace latconf;

/// Random layered DAG with a single initial and a single final node.
/// Regenerates until the number of initial-to-final paths is <= max_paths.
inline Lattice random_dag(std::mt19937_64& rng, int max_paths = 64) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  static const std::vector<std::string> vocab = {"aa", "bb", "cc", "dd", "ee"};
  for (;;) {
    Lattice lat;
    lat.utterance_id = "rand";
    int layers = 3 + static_cast<int>(u(rng) * 3.0);  // 3..5
    std::vector<std::vector<int>> layer_nodes(layers);
    int nid = 0;
    for (int l = 0; l < layers; ++l) {
      int width =
          (l == 0 || l == layers - 1) ? 1 : 1 + static_cast<int>(u(rng) * 3.0);
      for (int i = 0; i < width; ++i) {
        lat.nodes.push_back({nid, 0.1 * l + 0.01 * i});
        layer_nodes[l].push_back(nid++);
      }
    }
    int aid = 0;
    std::set<std::pair<int, int>> seen;
    auto add_arc = [&](int s, int e) {
      LatticeArc a;
      a.id = aid++;
      a.start_node = s;
      a.end_node = e;
      a.word = vocab[static_cast<int>(u(rng) * vocab.size()) % vocab.size()];
      a.am_score = -2.0 * u(rng);
      a.lm_score = -2.0 * u(rng);
      lat.arcs.push_back(std::move(a));
    };
    // Every non-final node gets an outgoing arc into the next layer.
    for (int l = 0; l + 1 < layers; ++l)
      for (int n : layer_nodes[l]) {
        int dst = layer_nodes[l + 1][static_cast<int>(
            u(rng) * layer_nodes[l + 1].size()) % layer_nodes[l + 1].size()];
        add_arc(n, dst);
        seen.insert({n, dst});
      }
    // Every non-initial node gets an incoming arc from the previous layer.
    for (int l = 1; l < layers; ++l)
      for (int n : layer_nodes[l]) {
        bool has_in = false;
        for (const auto& a : lat.arcs)
          if (a.end_node == n) has_in = true;
        if (!has_in) {
          int src = layer_nodes[l - 1][static_cast<int>(
              u(rng) * layer_nodes[l - 1].size()) % layer_nodes[l - 1].size()];
          add_arc(src, n);
          seen.insert({src, n});
        }
      }
    // Extra random arcs, including layer-skipping ones.
    int extras = static_cast<int>(u(rng) * 4.0);
    for (int x = 0; x < extras; ++x) {
      int l1 = static_cast<int>(u(rng) * (layers - 1));
      int l2 = l1 + 1 + static_cast<int>(u(rng) * (layers - 1 - l1));
      int s = layer_nodes[l1][static_cast<int>(u(rng) * layer_nodes[l1].size()) %
                              layer_nodes[l1].size()];
      int e = layer_nodes[l2][static_cast<int>(u(rng) * layer_nodes[l2].size()) %
                              layer_nodes[l2].size()];
      add_arc(s, e);
    }
    validate(lat);
    // Path count via DP.
    std::map<int, long> count;
    count[lat.initial_node] = 1;
    long total = 0;
    for (int n : lat.topo_nodes) {
      if (!count.count(n)) continue;
      if (lat.final_nodes.count(n)) total += count[n];
      auto it = lat.arcs_out.find(n);
      if (it == lat.arcs_out.end()) continue;
      for (int arc_id : it->second) count[lat.arc(arc_id).end_node] += count[n];
    }
    if (total >= 1 && total <= max_paths) return lat;
  }
}

/// All initial-to-final paths as arc-id sequences (depth-first order).
inline std::vector<std::vector<int>> enumerate_paths(const Lattice& lat) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int)> dfs = [&](int node) {
    if (lat.final_nodes.count(node)) {
      out.push_back(cur);
      return;
    }
    auto it = lat.arcs_out.find(node);
    if (it == lat.arcs_out.end()) return;
    for (int arc_id : it->second) {
      cur.push_back(arc_id);
      dfs(lat.arc(arc_id).end_node);
      cur.pop_back();
    }
  };
  dfs(lat.initial_node);
  return out;
}

/// Brute-force arc posteriors from full path enumeration (am + lm weights).
inline std::map<int, double> brute_posteriors(const Lattice& lat,
                                              double am_scale = 1.0,
                                              double lm_scale = 1.0) {
  auto paths = enumerate_paths(lat);
  std::map<int, double> mass;
  for (const auto& a : lat.arcs) mass[a.id] = 0.0;
  double total = 0.0;
  for (const auto& p : paths) {
    double logw = 0.0;
    for (int arc_id : p) {
      const auto& a = lat.arc(arc_id);
      logw += am_scale * a.am_score + lm_scale * a.lm_score;
    }
    double w = std::exp(logw);
    total += w;
    for (int arc_id : p) mass[arc_id] += w;
  }
  for (auto& [id, m] : mass) m /= total;
  return mass;
}

/// Random confusion network; posteriors sum to <= 1 per slot.
inline ConfusionNetwork random_cn(std::mt19937_64& rng, int max_entries = 4,
                                  bool allow_eps = false) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  static const std::vector<std::string> vocab = {"aa", "bb", "cc",
                                                 "dd", "ee", "ff"};
  ConfusionNetwork cn;
  cn.utterance_id = "rcn";
  int slots = 1 + static_cast<int>(u(rng) * 6.0);
  double t = 0.0;
  for (int k = 0; k < slots; ++k) {
    ConfusionSet s;
    s.time_start = t;
    t += 0.1 + 0.3 * u(rng);
    s.time_end = t;
    int n = 1 + static_cast<int>(u(rng) * max_entries) % max_entries;
    std::set<std::string> used;
    std::vector<double> w(n);
    double wsum = 0.0;
    for (double& x : w) {
      x = 0.05 + u(rng);
      wsum += x;
    }
    for (int i = 0; i < n; ++i) {
      ConfusionEntry e;
      for (;;) {
        e.word = (allow_eps && u(rng) < 0.2)
                     ? kEpsWord
                     : vocab[static_cast<int>(u(rng) * vocab.size()) %
                             vocab.size()];
        if (!used.count(e.word)) break;
      }
      used.insert(e.word);
      e.posterior = w[i] / wsum;
      s.entries.push_back(std::move(e));
    }
    cn.sets.push_back(std::move(s));
  }
  return cn;
}

}  // namespace testutil
