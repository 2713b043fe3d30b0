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

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "latconf/common.hpp"

namespace latconf::nn {

/// Named trainable tensor. cols == 1 designates a vector.
struct Tensor {
  std::string name;
  int rows = 0;
  int cols = 1;
  bool trainable = true;
  std::vector<double> value;  // row-major
  std::vector<double> grad;

  int size() const { return rows * cols; }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

/// Owning, name-addressable collection of parameters.
class ParamSet {
 public:
  Tensor& add(const std::string& name, int rows, int cols = 1) {
    if (by_name_.count(name)) throw ShapeError("duplicate tensor '" + name + "'");
    auto t = std::make_unique<Tensor>();
    t->name = name;
    t->rows = rows;
    t->cols = cols;
    t->value.assign(static_cast<size_t>(rows) * cols, 0.0);
    t->grad.assign(static_cast<size_t>(rows) * cols, 0.0);
    Tensor* ptr = t.get();
    by_name_[name] = ptr;
    items_.push_back(std::move(t));
    return *ptr;
  }

  /// Uniform +-(1/sqrt(fan_in)) init, fan_in = cols (1 for vectors).
  Tensor& add_init(const std::string& name, int rows, int cols,
                   std::mt19937_64& rng) {
    Tensor& t = add(name, rows, cols);
    double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, cols)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.value) v = u(rng);
    return t;
  }

  bool has(const std::string& name) const { return by_name_.count(name) > 0; }
  Tensor& get(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ShapeError("unknown tensor '" + name + "'");
    return *it->second;
  }
  const Tensor& get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ShapeError("unknown tensor '" + name + "'");
    return *it->second;
  }

  std::vector<Tensor*> all() {
    std::vector<Tensor*> out;
    for (auto& t : items_) out.push_back(t.get());
    return out;
  }
  std::vector<const Tensor*> all() const {
    std::vector<const Tensor*> out;
    for (auto& t : items_) out.push_back(t.get());
    return out;
  }

  void zero_grads() {
    for (auto& t : items_) t->zero_grad();
  }

 private:
  std::vector<std::unique_ptr<Tensor>> items_;  // creation order preserved
  std::map<std::string, Tensor*> by_name_;
};

/// Reverse-mode tape over vector-valued nodes. Node ids are issued in
/// construction order, which is a valid topological order for backprop.
class Tape {
 public:
  using Id = int;

  struct Node {
    int size = 0;
    std::vector<double> value;
    std::vector<double> grad;
    std::function<void(Tape&)> backprop;  // null for leaves
    Tensor* param = nullptr;              // set for parameter leaves
    int param_row = -1;                   // >= 0 for row-slice leaves
  };

  std::vector<Node> nodes;

  const std::vector<double>& value(Id id) const { return nodes[id].value; }
  double scalar_value(Id id) const { return nodes[id].value[0]; }
  int size(Id id) const { return nodes[id].size; }

  Id constant(std::vector<double> v) {
    Node n;
    n.size = static_cast<int>(v.size());
    n.value = std::move(v);
    n.grad.assign(n.size, 0.0);
    nodes.push_back(std::move(n));
    return static_cast<Id>(nodes.size() - 1);
  }

  Id constant_scalar(double v) { return constant({v}); }

  /// Leaf bound to a whole tensor (flattened row-major for matrices).
  Id param(Tensor& t) {
    Id id = constant(t.value);
    nodes[id].param = &t;
    return id;
  }

  /// Leaf bound to one row of a matrix tensor (embedding lookup).
  Id param_row(Tensor& t, int row) {
    std::vector<double> v(t.value.begin() + static_cast<size_t>(row) * t.cols,
                          t.value.begin() + static_cast<size_t>(row + 1) * t.cols);
    Id id = constant(std::move(v));
    nodes[id].param = &t;
    nodes[id].param_row = row;
    return id;
  }

  /// y = W x where W is a (rows x cols) parameter leaf and x has size cols.
  Id matvec(Id w_id, Id x_id, int rows, int cols) {
    if (nodes[w_id].size != rows * cols || nodes[x_id].size != cols)
      throw ShapeError("matvec shape mismatch");
    std::vector<double> y(rows, 0.0);
    const auto& W = nodes[w_id].value;
    const auto& x = nodes[x_id].value;
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int c = 0; c < cols; ++c) acc += W[r * cols + c] * x[c];
      y[r] = acc;
    }
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, w_id, x_id, rows, cols](Tape& t) {
      const auto& g = t.nodes[id].grad;
      const auto& W = t.nodes[w_id].value;
      const auto& x = t.nodes[x_id].value;
      auto& gW = t.nodes[w_id].grad;
      auto& gx = t.nodes[x_id].grad;
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          gW[r * cols + c] += g[r] * x[c];
          gx[c] += g[r] * W[r * cols + c];
        }
      }
    };
    return id;
  }

  Id add(Id a, Id b) {
    if (nodes[a].size != nodes[b].size) throw ShapeError("add shape mismatch");
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i)
      y[i] = nodes[a].value[i] + nodes[b].value[i];
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a, b](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i) {
        t.nodes[a].grad[i] += t.nodes[id].grad[i];
        t.nodes[b].grad[i] += t.nodes[id].grad[i];
      }
    };
    return id;
  }

  /// Elementwise (Hadamard) product.
  Id mul(Id a, Id b) {
    if (nodes[a].size != nodes[b].size) throw ShapeError("mul shape mismatch");
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i)
      y[i] = nodes[a].value[i] * nodes[b].value[i];
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a, b](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i) {
        t.nodes[a].grad[i] += t.nodes[id].grad[i] * t.nodes[b].value[i];
        t.nodes[b].grad[i] += t.nodes[id].grad[i] * t.nodes[a].value[i];
      }
    };
    return id;
  }

  Id scale(Id a, double s) {
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i) y[i] = s * nodes[a].value[i];
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a, s](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i)
        t.nodes[a].grad[i] += s * t.nodes[id].grad[i];
    };
    return id;
  }

  /// y = 1 - a, elementwise.
  Id one_minus(Id a) {
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i) y[i] = 1.0 - nodes[a].value[i];
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i)
        t.nodes[a].grad[i] -= t.nodes[id].grad[i];
    };
    return id;
  }

  Id concat(Id a, Id b) {
    std::vector<double> y;
    y.reserve(nodes[a].size + nodes[b].size);
    y.insert(y.end(), nodes[a].value.begin(), nodes[a].value.end());
    y.insert(y.end(), nodes[b].value.begin(), nodes[b].value.end());
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a, b](Tape& t) {
      int na = t.nodes[a].size;
      for (int i = 0; i < na; ++i) t.nodes[a].grad[i] += t.nodes[id].grad[i];
      for (int i = 0; i < t.nodes[b].size; ++i)
        t.nodes[b].grad[i] += t.nodes[id].grad[na + i];
    };
    return id;
  }

  Id tanh_(Id a) {
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i) y[i] = std::tanh(nodes[a].value[i]);
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i) {
        double v = t.nodes[id].value[i];
        t.nodes[a].grad[i] += t.nodes[id].grad[i] * (1.0 - v * v);
      }
    };
    return id;
  }

  Id sigmoid_(Id a) {
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i)
      y[i] = 1.0 / (1.0 + std::exp(-nodes[a].value[i]));
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i) {
        double v = t.nodes[id].value[i];
        t.nodes[a].grad[i] += t.nodes[id].grad[i] * v * (1.0 - v);
      }
    };
    return id;
  }

  /// Elementwise natural log (inputs must be positive).
  Id log_(Id a) {
    std::vector<double> y(nodes[a].size);
    for (int i = 0; i < nodes[a].size; ++i) y[i] = std::log(nodes[a].value[i]);
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, a](Tape& t) {
      for (int i = 0; i < t.nodes[id].size; ++i)
        t.nodes[a].grad[i] += t.nodes[id].grad[i] / t.nodes[a].value[i];
    };
    return id;
  }

  /// Dot product, yields a 1-dim node.
  Id dot(Id a, Id b) {
    if (nodes[a].size != nodes[b].size) throw ShapeError("dot shape mismatch");
    double acc = 0.0;
    for (int i = 0; i < nodes[a].size; ++i)
      acc += nodes[a].value[i] * nodes[b].value[i];
    Id id = constant({acc});
    nodes[id].backprop = [id, a, b](Tape& t) {
      double g = t.nodes[id].grad[0];
      for (int i = 0; i < t.nodes[a].size; ++i) {
        t.nodes[a].grad[i] += g * t.nodes[b].value[i];
        t.nodes[b].grad[i] += g * t.nodes[a].value[i];
      }
    };
    return id;
  }

  /// Softmax over 1-dim score nodes followed by a convex combination of the
  /// state nodes. Attention weights are exposed through alphas_out.
  Id softmax_combine(const std::vector<Id>& states,
                     const std::vector<Id>& scores,
                     std::vector<double>* alphas_out = nullptr) {
    if (states.empty()) throw ShapeError("softmax_combine: empty state set");
    if (states.size() != scores.size())
      throw ShapeError("softmax_combine: state/score count mismatch");
    int dim = nodes[states[0]].size;
    std::vector<double> raw(scores.size());
    for (size_t j = 0; j < scores.size(); ++j) {
      if (nodes[scores[j]].size != 1)
        throw ShapeError("softmax_combine: scores must be scalars");
      if (nodes[states[j]].size != dim)
        throw ShapeError("softmax_combine: inconsistent state dims");
      raw[j] = nodes[scores[j]].value[0];
    }
    std::vector<double> alpha = softmax(raw);
    if (alphas_out) *alphas_out = alpha;
    std::vector<double> y(dim, 0.0);
    for (size_t j = 0; j < states.size(); ++j)
      for (int i = 0; i < dim; ++i) y[i] += alpha[j] * nodes[states[j]].value[i];
    Id id = constant(std::move(y));
    nodes[id].backprop = [id, states, scores, alpha, dim](Tape& t) {
      const auto& g = t.nodes[id].grad;
      const auto& v = t.nodes[id].value;
      double g_dot_v = 0.0;
      for (int i = 0; i < dim; ++i) g_dot_v += g[i] * v[i];
      for (size_t j = 0; j < states.size(); ++j) {
        double g_dot_h = 0.0;
        for (int i = 0; i < dim; ++i) {
          t.nodes[states[j]].grad[i] += alpha[j] * g[i];
          g_dot_h += g[i] * t.nodes[states[j]].value[i];
        }
        t.nodes[scores[j]].grad[0] += alpha[j] * (g_dot_h - g_dot_v);
      }
    };
    return id;
  }

  /// Mean binary cross-entropy over scalar confidence nodes; confidences are
  /// clamped to [1e-10, 1-1e-10] inside the loss only.
  Id bce_mean(const std::vector<Id>& confs, const std::vector<double>& targets) {
    if (confs.empty()) throw ShapeError("bce_mean: empty selection");
    if (confs.size() != targets.size())
      throw ShapeError("bce_mean: confidence/target count mismatch");
    double n = static_cast<double>(confs.size());
    double acc = 0.0;
    for (size_t i = 0; i < confs.size(); ++i) {
      double c = nodes[confs[i]].value[0];
      double cc = std::min(1.0 - kProbFloor, std::max(kProbFloor, c));
      acc -= targets[i] * std::log(cc) + (1.0 - targets[i]) * std::log(1.0 - cc);
    }
    Id id = constant({acc / n});
    nodes[id].backprop = [id, confs, targets, n](Tape& t) {
      double g = t.nodes[id].grad[0];
      for (size_t i = 0; i < confs.size(); ++i) {
        double c = t.nodes[confs[i]].value[0];
        if (c <= kProbFloor || c >= 1.0 - kProbFloor) continue;  // clamped flat
        t.nodes[confs[i]].grad[0] += g * (c - targets[i]) / (c * (1.0 - c)) / n;
      }
    };
    return id;
  }

  /// Reverse sweep from a scalar root; accumulates parameter-leaf gradients
  /// into their tensors' grad fields.
  void backward(Id root) {
    if (nodes[root].size != 1) throw ShapeError("backward: root must be scalar");
    for (auto& n : nodes) std::fill(n.grad.begin(), n.grad.end(), 0.0);
    nodes[root].grad[0] = 1.0;
    for (Id id = root; id >= 0; --id)
      if (nodes[id].backprop) nodes[id].backprop(*this);
    for (auto& n : nodes) {
      if (!n.param) continue;
      if (n.param_row >= 0) {
        size_t off = static_cast<size_t>(n.param_row) * n.param->cols;
        for (int i = 0; i < n.size; ++i) n.param->grad[off + i] += n.grad[i];
      } else {
        for (int i = 0; i < n.size; ++i) n.param->grad[i] += n.grad[i];
      }
    }
  }
};

}  // namespace latconf::nn
