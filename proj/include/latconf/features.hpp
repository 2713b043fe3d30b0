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

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latconf/lattice.hpp"

namespace latconf {

/// Token-to-vector map with an unknown-token fallback.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Loads lines of `<token> <v1> ... <vdim>`; the unknown vector is the
  /// mean of all loaded vectors.
  static EmbeddingTable load(const std::string& text) {
    EmbeddingTable t;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    std::vector<double> sum;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      std::vector<double> v(toks.size() - 1);
      for (size_t i = 1; i < toks.size(); ++i)
        v[i - 1] = parse_real(toks[i], lineno);
      if (t.dim_ == 0) {
        t.dim_ = static_cast<int>(v.size());
        sum.assign(t.dim_, 0.0);
      } else if (static_cast<int>(v.size()) != t.dim_) {
        throw ParseError(ParseError::Kind::InvalidValue, lineno,
                         "embedding row has " + std::to_string(v.size()) +
                             " dims, expected " + std::to_string(t.dim_));
      }
      // Duplicate tokens keep the first row and do not skew the mean.
      if (t.index_.emplace(toks[0], static_cast<int>(t.tokens_.size())).second) {
        for (int d = 0; d < t.dim_; ++d) sum[d] += v[d];
        t.tokens_.push_back(toks[0]);
        t.vectors_.push_back(std::move(v));
      }
    }
    if (t.tokens_.empty())
      throw ParseError(ParseError::Kind::InvalidValue, 0,
                       "embedding file is empty");
    t.unk_.resize(t.dim_);
    for (int d = 0; d < t.dim_; ++d)
      t.unk_[d] = sum[d] / static_cast<double>(t.tokens_.size());
    t.trainable_ = false;  // loaded embeddings are frozen by default
    return t;
  }

  /// Random init over a vocabulary, uniform +-0.1; trainable.
  static EmbeddingTable random_init(const std::vector<std::string>& vocab,
                                    int dim, unsigned seed) {
    EmbeddingTable t;
    t.dim_ = dim;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (const auto& tok : vocab) {
      if (!t.index_.emplace(tok, static_cast<int>(t.tokens_.size())).second)
        continue;
      t.tokens_.push_back(tok);
      std::vector<double> v(dim);
      for (double& x : v) x = u(rng);
      t.vectors_.push_back(std::move(v));
    }
    t.unk_.resize(dim);
    for (double& x : t.unk_) x = u(rng);
    t.trainable_ = true;
    return t;
  }

  /// Reconstruction from explicit rows (checkpoint loading).
  static EmbeddingTable from_rows(const std::vector<std::string>& tokens,
                                  const std::vector<std::vector<double>>& rows,
                                  std::vector<double> unk, bool trainable) {
    EmbeddingTable t;
    t.dim_ = static_cast<int>(unk.size());
    for (size_t i = 0; i < tokens.size(); ++i) {
      t.index_.emplace(tokens[i], static_cast<int>(t.tokens_.size()));
      t.tokens_.push_back(tokens[i]);
      t.vectors_.push_back(rows[i]);
    }
    t.unk_ = std::move(unk);
    t.trainable_ = trainable;
    return t;
  }

  int dim() const { return dim_; }
  bool trainable() const { return trainable_; }
  void set_trainable(bool v) { trainable_ = v; }
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Row index for a token; size() designates the unknown row.
  int row(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? static_cast<int>(tokens_.size()) : it->second;
  }

  const std::vector<double>& lookup(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? unk_ : vectors_[it->second];
  }

  const std::vector<double>& row_vector(int r) const {
    return r == static_cast<int>(tokens_.size()) ? unk_ : vectors_[r];
  }

  const std::vector<double>& unk_vector() const { return unk_; }

 private:
  int dim_ = 0;
  bool trainable_ = false;
  std::vector<std::string> tokens_;
  std::vector<std::vector<double>> vectors_;
  std::map<std::string, int> index_;
  std::vector<double> unk_;
};

// ---------------------------------------------------------------------------
// Decision-tree style posterior calibration: equal-count binning with
// Laplace-smoothed per-bin accuracy.
// ---------------------------------------------------------------------------

class PosteriorMap {
 public:
  PosteriorMap() = default;

  static PosteriorMap fit(const std::vector<double>& posteriors,
                          const std::vector<int>& targets, int bins) {
    if (posteriors.size() != targets.size())
      throw DataError("posterior/target length mismatch");
    if (bins < 1) throw DataError("bins must be >= 1");
    size_t n = posteriors.size();
    if (n < static_cast<size_t>(bins))
      throw DataError("need at least as many points as bins");
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return posteriors[a] < posteriors[b];
    });
    PosteriorMap m;
    size_t start = 0;
    for (int b = 0; b < bins; ++b) {
      size_t end = n * static_cast<size_t>(b + 1) / bins;
      size_t count = end - start;
      int correct = 0;
      for (size_t k = start; k < end; ++k) correct += targets[idx[k]];
      double value = (correct + 1.0) / (count + 2.0);
      double upper;
      if (b + 1 == bins)
        upper = 1.0;
      else
        upper = 0.5 * (posteriors[idx[end - 1]] + posteriors[idx[end]]);
      m.upper_.push_back(upper);
      m.value_.push_back(value);
      start = end;
    }
    return m;
  }

  /// Piecewise-constant lookup; boundary values go to the higher bin.
  double apply(double p) const {
    if (upper_.empty()) throw DataError("posterior map is empty");
    for (size_t b = 0; b + 1 < upper_.size(); ++b)
      if (p < upper_[b]) return value_[b];
    return value_.back();
  }

  bool empty() const { return upper_.empty(); }
  size_t bins() const { return upper_.size(); }
  const std::vector<double>& boundaries() const { return upper_; }
  const std::vector<double>& values() const { return value_; }

  std::string serialize() const {
    std::string out;
    for (size_t b = 0; b < upper_.size(); ++b)
      out += "BIN " + fmt_exact(upper_[b]) + " " + fmt_exact(value_[b]) + "\n";
    return out;
  }

  static PosteriorMap parse(const std::string& text) {
    PosteriorMap m;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto toks = split_ws(line);
      if (toks.empty()) continue;
      if (toks[0] != "BIN" || toks.size() != 3)
        throw ParseError(ParseError::Kind::MalformedLine, lineno,
                         "expected 'BIN <boundary> <value>'");
      m.upper_.push_back(parse_real(toks[1], lineno));
      m.value_.push_back(parse_real(toks[2], lineno));
    }
    if (m.upper_.empty())
      throw ParseError(ParseError::Kind::MalformedLine, 0, "empty map");
    return m;
  }

 private:
  std::vector<double> upper_;  // strictly increasing, last = 1.0
  std::vector<double> value_;
};

// ---------------------------------------------------------------------------
// Per-arc feature assembly.
// ---------------------------------------------------------------------------

/// Per-feature z-normalization, fit on the training set.
struct NormStats {
  double dur_mean = 0.0, dur_std = 1.0;
  double sub_dur_mean = 0.0, sub_dur_std = 1.0;
  double am_mean = 0.0, am_std = 1.0;
  double lm_mean = 0.0, lm_std = 1.0;

  static double znorm(double v, double mean, double std) {
    return (v - mean) / (std > 1e-10 ? std : 1.0);
  }
  double duration(double d) const { return znorm(d, dur_mean, dur_std); }
  double sub_duration(double d) const {
    return znorm(d, sub_dur_mean, sub_dur_std);
  }
  double am(double v) const { return znorm(v, am_mean, am_std); }
  double lm(double v) const { return znorm(v, lm_mean, lm_std); }
};

/// [embedding | duration | log posterior]; posterior optionally calibrated.
inline std::vector<double> word_features(const Lattice& lat, int arc_id,
                                         const EmbeddingTable& table,
                                         bool use_mapped = false,
                                         const PosteriorMap* pmap = nullptr) {
  const auto& a = lat.arc(arc_id);
  if (!a.posterior) throw DataError("word_features: posterior missing");
  std::vector<double> out = table.lookup(a.word);
  out.push_back(lat.arc_duration(arc_id));
  double p = *a.posterior;
  if (use_mapped) {
    if (!pmap) throw DataError("word_features: mapping requested without map");
    p = pmap->apply(p);
  }
  out.push_back(std::log(clamp_prob(p)));
  return out;
}

/// [unit embedding | duration | log posterior].
inline std::vector<double> subword_unit_features(const SubwordUnit& u,
                                                 const EmbeddingTable& table,
                                                 double parent_posterior = 1.0) {
  std::vector<double> out = table.lookup(u.unit);
  out.push_back(u.duration);
  out.push_back(std::log(clamp_prob(u.posterior.value_or(parent_posterior))));
  return out;
}

/// Attention key k_j = [log c_j, log mu_j, log sigma_j], all clamped before
/// the log.
inline std::array<double, 3> attention_key(const Lattice& lat, int arc_id) {
  const auto& a = lat.arc(arc_id);
  if (!a.posterior) throw DataError("attention_key: posterior missing");
  auto [mean, sd] = overlap_stats(lat, arc_id);
  return {std::log(clamp_prob(*a.posterior)), std::log(clamp_prob(mean)),
          std::log(std::max(kProbFloor, sd))};
}

/// Mean acoustic/language scores of the matched lattice arcs; nullopt when
/// the match set is empty.
inline std::optional<std::pair<double, double>> aggregate_lattice_features(
    const Lattice& lat, const std::vector<int>& matched_arcs) {
  if (matched_arcs.empty()) return std::nullopt;
  double am = 0.0, lm = 0.0;
  for (int id : matched_arcs) {
    am += lat.arc(id).am_score;
    lm += lat.arc(id).lm_score;
  }
  double n = static_cast<double>(matched_arcs.size());
  return std::make_pair(am / n, lm / n);
}

}  // namespace latconf
