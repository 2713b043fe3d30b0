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

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "latconf/lattice.hpp"

namespace latconf {

struct TargetTag {
  int index = 0;   // hypothesis position or arc id
  int target = 0;  // 1 = correct, 0 = incorrect
};

/// Outcome of aligning one hypothesis word against the reference.
struct AlignedWord {
  int target = 0;                        // 1 iff exact match
  std::optional<int> ref_index;          // aligned reference position
  std::optional<std::string> ref_word;   // empty for insertions
};

struct LevenshteinResult {
  int edit_distance = 0;
  std::vector<AlignedWord> hyp;  // length == |hypothesis|
};

inline std::string fold_case(const std::string& w) {
  std::string out = w;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

/// Unit-cost edit-distance alignment (match 0, sub/ins/del 1). Traceback
/// preference on cost ties: match > substitution > deletion > insertion.
inline LevenshteinResult levenshtein_align(const std::vector<std::string>& hyp,
                                           const std::vector<std::string>& ref) {
  size_t H = hyp.size(), R = ref.size();
  std::vector<std::string> h(H), r(R);
  for (size_t i = 0; i < H; ++i) h[i] = fold_case(hyp[i]);
  for (size_t j = 0; j < R; ++j) r[j] = fold_case(ref[j]);

  std::vector<std::vector<int>> dp(H + 1, std::vector<int>(R + 1, 0));
  for (size_t i = 0; i <= H; ++i) dp[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= R; ++j) dp[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= H; ++i) {
    for (size_t j = 1; j <= R; ++j) {
      int diag = dp[i - 1][j - 1] + (h[i - 1] == r[j - 1] ? 0 : 1);
      int del = dp[i][j - 1] + 1;   // reference word skipped
      int ins = dp[i - 1][j] + 1;   // hypothesis word unmatched
      dp[i][j] = std::min({diag, del, ins});
    }
  }

  LevenshteinResult res;
  res.edit_distance = dp[H][R];
  res.hyp.resize(H);
  size_t i = H, j = R;
  while (i > 0 || j > 0) {
    bool is_match = i > 0 && j > 0 && h[i - 1] == r[j - 1] &&
                    dp[i][j] == dp[i - 1][j - 1];
    bool is_sub = i > 0 && j > 0 && h[i - 1] != r[j - 1] &&
                  dp[i][j] == dp[i - 1][j - 1] + 1;
    bool is_del = j > 0 && dp[i][j] == dp[i][j - 1] + 1;
    if (is_match || is_sub) {
      res.hyp[i - 1].target = is_match ? 1 : 0;
      res.hyp[i - 1].ref_index = static_cast<int>(j - 1);
      res.hyp[i - 1].ref_word = ref[j - 1];
      --i;
      --j;
    } else if (is_del) {
      --j;
    } else {
      // Insertion: hypothesis word with no reference counterpart.
      res.hyp[i - 1].target = 0;
      --i;
    }
  }
  return res;
}

/// Per-word binary targets for a hypothesis sequence (Levenshtein tagging).
inline std::vector<TargetTag> levenshtein_targets(
    const std::vector<std::string>& hyp, const std::vector<std::string>& ref) {
  auto res = levenshtein_align(hyp, ref);
  std::vector<TargetTag> out(hyp.size());
  for (size_t i = 0; i < hyp.size(); ++i)
    out[i] = {static_cast<int>(i), res.hyp[i].target};
  return out;
}

/// Binary target per graph arc. The one-best path is tagged via the
/// Levenshtein alignment; each off-path arc is tagged 1 iff its word equals
/// the reference word aligned to the time-closest overlapping on-path
/// position. Epsilon arcs and arcs with no overlapping on-path position
/// default to 0.
inline std::vector<TargetTag> tag_graph_arcs(const Lattice& lat,
                                             const std::vector<std::string>& ref) {
  std::vector<int> path = one_best_path(lat);

  // Hypothesis sequence excludes epsilon fillers.
  std::vector<std::string> hyp;
  std::vector<int> hyp_arc;  // arc id per hypothesis position
  for (int arc_id : path) {
    const auto& a = lat.arc(arc_id);
    if (a.word == kEpsWord) continue;
    hyp.push_back(a.word);
    hyp_arc.push_back(arc_id);
  }
  auto aligned = levenshtein_align(hyp, ref);

  std::map<int, int> tag;  // arc id -> target
  for (const auto& a : lat.arcs) tag[a.id] = 0;
  std::map<int, std::optional<std::string>> on_path_ref;  // arc id -> ref word
  for (size_t i = 0; i < hyp.size(); ++i) {
    tag[hyp_arc[i]] = aligned.hyp[i].target;
    on_path_ref[hyp_arc[i]] = aligned.hyp[i].ref_word;
  }

  std::set<int> on_path(path.begin(), path.end());
  for (const auto& a : lat.arcs) {
    if (on_path.count(a.id)) continue;
    if (a.word == kEpsWord) continue;
    double s = lat.arc_start_time(a.id), e = lat.arc_end_time(a.id);
    double mid = 0.5 * (s + e);
    // Time-closest on-path position whose span overlaps this arc.
    int best_arc = -1;
    double best_dist = std::numeric_limits<double>::infinity();
    for (int p : hyp_arc) {
      double ps = lat.arc_start_time(p), pe = lat.arc_end_time(p);
      if (!time_overlap(s, e, ps, pe)) continue;
      double d = std::abs(0.5 * (ps + pe) - mid);
      if (d < best_dist) {
        best_dist = d;
        best_arc = p;
      }
    }
    if (best_arc < 0) continue;
    const auto& rw = on_path_ref[best_arc];
    if (rw && fold_case(*rw) == fold_case(a.word)) tag[a.id] = 1;
  }

  std::vector<TargetTag> out;
  out.reserve(lat.arcs.size());
  for (const auto& a : lat.arcs) out.push_back({a.id, tag[a.id]});
  return out;
}

/// CN arc -> matched lattice arcs, per utterance.
struct CnLatticeMap {
  // matched[k][i] = lattice arc ids matched to entry i of confusion set k.
  std::vector<std::vector<std::vector<int>>> matched;
  bool any_unmatched = false;
};

/// Matches CN arcs to lattice arcs: identical word and Jaccard time-interval
/// overlap >= tolerance.
inline CnLatticeMap align_cn_to_lattice(const ConfusionNetwork& cn,
                                        const Lattice& lat, double tolerance) {
  if (cn.utterance_id != lat.utterance_id)
    throw DataError("utterance id mismatch: '" + cn.utterance_id + "' vs '" +
                    lat.utterance_id + "'");
  if (tolerance <= 0.0 || tolerance > 1.0)
    throw DataError("tolerance must be in (0,1]");
  CnLatticeMap map;
  map.matched.resize(cn.sets.size());
  for (size_t k = 0; k < cn.sets.size(); ++k) {
    const auto& set = cn.sets[k];
    map.matched[k].resize(set.entries.size());
    for (size_t i = 0; i < set.entries.size(); ++i) {
      const auto& e = set.entries[i];
      for (const auto& a : lat.arcs) {
        if (a.word != e.word) continue;
        double as = lat.arc_start_time(a.id), ae = lat.arc_end_time(a.id);
        double inter = std::min(ae, set.time_end) - std::max(as, set.time_start);
        double uni = std::max(ae, set.time_end) - std::min(as, set.time_start);
        double ratio;
        if (uni <= 0.0)
          ratio = 1.0;  // two zero-length intervals at the same instant
        else
          ratio = std::max(0.0, inter) / uni;
        if (ratio >= tolerance) map.matched[k][i].push_back(a.id);
      }
      if (map.matched[k][i].empty() && e.word != kEpsWord)
        map.any_unmatched = true;
    }
  }
  return map;
}

/// Fraction of utterances with at least one unmatched CN arc.
inline double unmatched_fraction(const std::vector<CnLatticeMap>& maps) {
  if (maps.empty()) return 0.0;
  int n = 0;
  for (const auto& m : maps)
    if (m.any_unmatched) ++n;
  return static_cast<double>(n) / static_cast<double>(maps.size());
}

}  // namespace latconf
