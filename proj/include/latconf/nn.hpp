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
#include <string>
#include <vector>

#include "latconf/tape.hpp"

namespace latconf::nn {

enum class CellType { Rnn, Gru };
enum class AttentionType { Dot, Mult, Add };

inline std::string to_string(CellType t) {
  return t == CellType::Rnn ? "rnn" : "gru";
}
inline std::string to_string(AttentionType t) {
  switch (t) {
    case AttentionType::Dot: return "dot";
    case AttentionType::Mult: return "mult";
    default: return "add";
  }
}
inline CellType cell_from_string(const std::string& s) {
  if (s == "rnn") return CellType::Rnn;
  if (s == "gru") return CellType::Gru;
  throw DataError("unknown cell type '" + s + "'");
}
inline AttentionType attention_from_string(const std::string& s) {
  if (s == "dot") return AttentionType::Dot;
  if (s == "mult") return AttentionType::Mult;
  if (s == "add") return AttentionType::Add;
  throw DataError("unknown attention type '" + s + "'");
}

// ---------------------------------------------------------------------------
// Recurrent cells. Parameters are registered once in a ParamSet under a
// prefix, then loaded onto a tape for every forward pass.
// ---------------------------------------------------------------------------

inline void make_cell_params(ParamSet& ps, const std::string& prefix,
                             CellType type, int hidden, int input,
                             std::mt19937_64& rng) {
  if (type == CellType::Rnn) {
    ps.add_init(prefix + ".Wx", hidden, input, rng);
    ps.add_init(prefix + ".Wh", hidden, hidden, rng);
  } else {
    for (const char* g : {"z", "r", "n"}) {
      ps.add_init(prefix + ".W" + g + "x", hidden, input, rng);
      ps.add_init(prefix + ".W" + g + "h", hidden, hidden, rng);
      ps.add(prefix + ".b" + std::string(g), hidden);  // biases start at 0
    }
  }
}

/// Tape handles for one cell's parameters, valid for one forward pass.
struct CellOnTape {
  CellType type;
  int hidden = 0, input = 0;
  Tape::Id Wx = -1, Wh = -1;
  Tape::Id Wzx = -1, Wzh = -1, bz = -1;
  Tape::Id Wrx = -1, Wrh = -1, br = -1;
  Tape::Id Wnx = -1, Wnh = -1, bn = -1;
};

inline CellOnTape load_cell(Tape& t, ParamSet& ps, const std::string& prefix,
                            CellType type) {
  CellOnTape c;
  c.type = type;
  if (type == CellType::Rnn) {
    Tensor& wx = ps.get(prefix + ".Wx");
    c.hidden = wx.rows;
    c.input = wx.cols;
    c.Wx = t.param(wx);
    c.Wh = t.param(ps.get(prefix + ".Wh"));
  } else {
    Tensor& wzx = ps.get(prefix + ".Wzx");
    c.hidden = wzx.rows;
    c.input = wzx.cols;
    c.Wzx = t.param(wzx);
    c.Wzh = t.param(ps.get(prefix + ".Wzh"));
    c.bz = t.param(ps.get(prefix + ".bz"));
    c.Wrx = t.param(ps.get(prefix + ".Wrx"));
    c.Wrh = t.param(ps.get(prefix + ".Wrh"));
    c.br = t.param(ps.get(prefix + ".br"));
    c.Wnx = t.param(ps.get(prefix + ".Wnx"));
    c.Wnh = t.param(ps.get(prefix + ".Wnh"));
    c.bn = t.param(ps.get(prefix + ".bn"));
  }
  return c;
}

/// h' = tanh(Wh h + Wx x), the equation-literal reference cell.
inline Tape::Id rnn_cell(Tape& t, const CellOnTape& c, Tape::Id h_prev,
                         Tape::Id x) {
  return t.tanh_(t.add(t.matvec(c.Wh, h_prev, c.hidden, c.hidden),
                       t.matvec(c.Wx, x, c.hidden, c.input)));
}

/// Standard update/reset-gate GRU: h' = z*h + (1-z)*n.
inline Tape::Id gru_cell(Tape& t, const CellOnTape& c, Tape::Id h_prev,
                         Tape::Id x) {
  auto gate = [&](Tape::Id Wx, Tape::Id Wh, Tape::Id b) {
    return t.add(t.add(t.matvec(Wx, x, c.hidden, c.input),
                       t.matvec(Wh, h_prev, c.hidden, c.hidden)),
                 b);
  };
  Tape::Id z = t.sigmoid_(gate(c.Wzx, c.Wzh, c.bz));
  Tape::Id r = t.sigmoid_(gate(c.Wrx, c.Wrh, c.br));
  Tape::Id n = t.tanh_(t.add(t.add(t.matvec(c.Wnx, x, c.hidden, c.input),
                                   t.mul(r, t.matvec(c.Wnh, h_prev, c.hidden,
                                                     c.hidden))),
                             c.bn));
  return t.add(t.mul(z, h_prev), t.mul(t.one_minus(z), n));
}

inline Tape::Id cell_step(Tape& t, const CellOnTape& c, Tape::Id h_prev,
                          Tape::Id x) {
  return c.type == CellType::Rnn ? rnn_cell(t, c, h_prev, x)
                                 : gru_cell(t, c, h_prev, x);
}

// ---------------------------------------------------------------------------
// Attention scoring. Note the dot-product form scores a state against
// itself (scaled squared norm), taken literally from its definition here.
// ---------------------------------------------------------------------------

inline void make_attention_params(ParamSet& ps, const std::string& prefix,
                                  AttentionType type, int state_dim,
                                  int key_dim, std::mt19937_64& rng) {
  if (type == AttentionType::Mult) {
    ps.add_init(prefix + ".Wm", state_dim, state_dim, rng);
  } else if (type == AttentionType::Add) {
    int in = key_dim + state_dim;
    ps.add_init(prefix + ".Wq", state_dim, in, rng);
    ps.add_init(prefix + ".wa", state_dim, 1, rng);
  }
}

struct AttentionOnTape {
  AttentionType type;
  int state_dim = 0, key_dim = 0;
  Tape::Id Wm = -1, Wq = -1, wa = -1;
};

inline AttentionOnTape load_attention(Tape& t, ParamSet& ps,
                                      const std::string& prefix,
                                      AttentionType type, int state_dim,
                                      int key_dim) {
  AttentionOnTape a;
  a.type = type;
  a.state_dim = state_dim;
  a.key_dim = key_dim;
  if (type == AttentionType::Mult) {
    a.Wm = t.param(ps.get(prefix + ".Wm"));
  } else if (type == AttentionType::Add) {
    a.Wq = t.param(ps.get(prefix + ".Wq"));
    a.wa = t.param(ps.get(prefix + ".wa"));
  }
  return a;
}

/// One scalar contribution e_j per state. The additive form requires a key
/// per state; dot/mult ignore keys.
inline Tape::Id attention_score(Tape& t, const AttentionOnTape& a,
                                Tape::Id state, Tape::Id key) {
  switch (a.type) {
    case AttentionType::Dot:
      return t.scale(t.dot(state, state),
                     1.0 / std::sqrt(static_cast<double>(a.state_dim)));
    case AttentionType::Mult:
      return t.dot(state, t.matvec(a.Wm, state, a.state_dim, a.state_dim));
    case AttentionType::Add: {
      if (key < 0) throw ShapeError("additive attention requires a key");
      Tape::Id kq = t.concat(key, state);
      Tape::Id hidden = t.tanh_(
          t.matvec(a.Wq, kq, a.state_dim, a.key_dim + a.state_dim));
      return t.sigmoid_(t.dot(a.wa, hidden));
    }
  }
  throw ShapeError("unreachable");
}

inline std::vector<Tape::Id> attention_scores(Tape& t, const AttentionOnTape& a,
                                              const std::vector<Tape::Id>& states,
                                              const std::vector<Tape::Id>& keys) {
  if (a.type == AttentionType::Add && keys.size() != states.size())
    throw ShapeError("additive attention: one key per state required");
  std::vector<Tape::Id> out;
  out.reserve(states.size());
  for (size_t j = 0; j < states.size(); ++j)
    out.push_back(attention_score(
        t, a, states[j], a.type == AttentionType::Add ? keys[j] : -1));
  return out;
}

/// Convex combination with softmax weights (max-subtraction stabilized).
inline Tape::Id attention_combine(Tape& t, const std::vector<Tape::Id>& states,
                                  const std::vector<Tape::Id>& scores,
                                  std::vector<double>* alphas_out = nullptr) {
  return t.softmax_combine(states, scores, alphas_out);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.
// ---------------------------------------------------------------------------

struct FdEntry {
  std::string tensor;
  int index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct FdReport {
  int checked = 0;
  double max_rel_err = 0.0;
  FdEntry worst;
  bool pass(double tolerance) const {
    return checked == 0 || max_rel_err < tolerance;
  }
};

/// Central differences against analytic gradients for every parameter entry.
/// loss(true) must run forward+backward and accumulate grads (the caller's
/// grads are zeroed here first); loss(false) is forward-only.
inline FdReport finite_difference_check(
    ParamSet& ps, const std::function<double(bool)>& loss, double eps = 1e-5) {
  ps.zero_grads();
  loss(true);
  std::vector<std::pair<std::string, std::vector<double>>> analytic;
  for (Tensor* t : ps.all()) analytic.push_back({t->name, t->grad});

  FdReport report;
  size_t ti = 0;
  for (Tensor* t : ps.all()) {
    for (int i = 0; i < t->size(); ++i) {
      double orig = t->value[i];
      t->value[i] = orig + eps;
      double lp = loss(false);
      t->value[i] = orig - eps;
      double lm = loss(false);
      t->value[i] = orig;
      double numeric = (lp - lm) / (2.0 * eps);
      double a = analytic[ti].second[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = {t->name, i, a, numeric, rel};
      }
    }
    ++ti;
  }
  return report;
}

}  // namespace latconf::nn
