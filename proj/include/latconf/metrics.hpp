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
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "latconf/common.hpp"

namespace latconf {

/// Mean binary cross-entropy (forward-only; the differentiable version lives
/// on the tape). Confidences clamped to [1e-10, 1-1e-10] inside the loss.
inline double bce_loss(const std::vector<double>& confidences,
                       const std::vector<int>& targets) {
  if (confidences.empty()) throw DataError("bce_loss: empty selection");
  if (confidences.size() != targets.size())
    throw DataError("bce_loss: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < confidences.size(); ++i) {
    double c = std::min(1.0 - kProbFloor, std::max(kProbFloor, confidences[i]));
    acc -= targets[i] * std::log(c) + (1 - targets[i]) * std::log(1.0 - c);
  }
  return acc / static_cast<double>(confidences.size());
}

/// Normalised cross-entropy: (H(prevalence) - H(confidences)) / H(prevalence)
/// with natural logs and the shared clamping rule. 1 = oracle, 0 = prior.
inline double nce(const std::vector<double>& confidences,
                  const std::vector<int>& targets) {
  size_t n = confidences.size();
  if (n == 0 || n != targets.size()) throw DataError("nce: bad input lengths");
  long n1 = std::accumulate(targets.begin(), targets.end(), 0L);
  long n0 = static_cast<long>(n) - n1;
  if (n1 == 0 || n0 == 0)
    throw NumericError("nce undefined: degenerate prevalence");
  double pbar = static_cast<double>(n1) / static_cast<double>(n);
  // Both entropies accumulate in the same order so that a constant
  // classifier at the prevalence scores exactly zero.
  double h_prior = 0.0, h_conf = 0.0;
  for (size_t i = 0; i < n; ++i) {
    h_prior -=
        targets[i] * std::log(pbar) + (1 - targets[i]) * std::log(1.0 - pbar);
    double c = std::min(1.0 - kProbFloor, std::max(kProbFloor, confidences[i]));
    h_conf -= targets[i] * std::log(c) + (1 - targets[i]) * std::log(1.0 - c);
  }
  return (h_prior - h_conf) / h_prior;
}

/// Average precision with tie groups treated as single blocks, so a constant
/// classifier scores exactly the positive prevalence. Curve points are
/// (recall, precision) at the end of each tie group.
inline double pr_auc(const std::vector<double>& confidences,
                     const std::vector<int>& targets,
                     std::vector<std::pair<double, double>>* curve = nullptr) {
  size_t n = confidences.size();
  if (n == 0 || n != targets.size())
    throw DataError("pr_auc: bad input lengths");
  long total_pos = std::accumulate(targets.begin(), targets.end(), 0L);
  if (total_pos == 0) throw NumericError("pr_auc undefined: no positives");
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    return confidences[a] > confidences[b];
  });
  if (curve) curve->clear();
  // Accumulate in extended precision so that small rational results (the
  // prevalence identity, simple worked examples) round to the exact double.
  long double ap = 0.0L;
  long seen = 0, pos_seen = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    long group_pos = 0;
    while (j < n && confidences[idx[j]] == confidences[idx[i]]) {
      group_pos += targets[idx[j]];
      ++j;
    }
    long prev_pos = pos_seen;
    seen += static_cast<long>(j - i);
    pos_seen += group_pos;
    long double precision =
        static_cast<long double>(pos_seen) / static_cast<long double>(seen);
    long double r_prev =
        static_cast<long double>(prev_pos) / static_cast<long double>(total_pos);
    long double r_now =
        static_cast<long double>(pos_seen) / static_cast<long double>(total_pos);
    ap += (r_now - r_prev) * precision;
    if (curve)
      curve->push_back({static_cast<double>(r_now),
                        static_cast<double>(precision)});
    i = j;
  }
  return static_cast<double>(ap);
}

struct EvalReport {
  double nce = 0.0;
  double pr_auc = 0.0;
  double prevalence = 0.0;
  long n_words = 0;
  std::vector<std::pair<double, double>> pr_curve;  // (recall, precision)
  std::string scope;       // one-best | all-arcs
  std::string tagging_rule;
  std::uint64_t config_hash = 0;

  std::string to_text() const {
    std::ostringstream out;
    out << "n_words=" << n_words << "\n"
        << "prevalence=" << fmt_real(prevalence) << "\n"
        << "nce=" << fmt_real(nce) << "\n"
        << "pr_auc=" << fmt_real(pr_auc) << "\n"
        << "scope=" << scope << "\n"
        << "tagging_rule=" << tagging_rule << "\n"
        << "config_hash=" << config_hash << "\n";
    return out.str();
  }

  std::string curve_text() const {
    std::string out = "# recall precision\n";
    for (const auto& [r, p] : pr_curve)
      out += fmt_real(r) + " " + fmt_real(p) + "\n";
    return out;
  }
};

inline EvalReport make_report(const std::vector<double>& confidences,
                              const std::vector<int>& targets,
                              const std::string& scope) {
  EvalReport r;
  r.n_words = static_cast<long>(targets.size());
  long n1 = std::accumulate(targets.begin(), targets.end(), 0L);
  r.prevalence = targets.empty()
                     ? 0.0
                     : static_cast<double>(n1) / static_cast<double>(targets.size());
  r.nce = nce(confidences, targets);
  r.pr_auc = pr_auc(confidences, targets, &r.pr_curve);
  r.scope = scope;
  r.tagging_rule = "levenshtein+time-overlap";
  return r;
}

}  // namespace latconf
