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
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "latconf/common.hpp"

namespace latconf {

/// Epsilon/null token used by confusion-network filler entries.
inline const std::string kEpsWord = "<eps>";

struct SubwordUnit {
  std::string unit;
  double duration = 0.0;
  std::optional<double> posterior;  // defaults to the parent arc's posterior
};

struct LatticeNode {
  int id = 0;
  double time = 0.0;  // seconds
};

struct LatticeArc {
  int id = 0;
  int start_node = 0;
  int end_node = 0;
  std::string word;
  double am_score = 0.0;  // log domain
  double lm_score = 0.0;  // log domain
  std::optional<double> posterior;
  std::vector<SubwordUnit> subwords;
};

/// DAG of timed nodes and scored, word-labeled arcs. Immutable once
/// validated; all derived indexes are filled by validate().
struct Lattice {
  std::string utterance_id;
  std::vector<LatticeNode> nodes;
  std::vector<LatticeArc> arcs;
  int initial_node = -1;
  std::set<int> final_nodes;

  // Derived by validate().
  std::unordered_map<int, int> node_index;  // node id -> position in nodes
  std::unordered_map<int, int> arc_index;   // arc id -> position in arcs
  std::vector<int> topo_nodes;              // node ids, topological order
  std::map<int, std::vector<int>> arcs_out;  // node id -> arc ids, ascending
  std::map<int, std::vector<int>> arcs_in;

  const LatticeNode& node(int id) const { return nodes[node_index.at(id)]; }
  const LatticeArc& arc(int id) const { return arcs[arc_index.at(id)]; }
  LatticeArc& arc(int id) { return arcs[arc_index.at(id)]; }

  double arc_start_time(int arc_id) const {
    return node(arc(arc_id).start_node).time;
  }
  double arc_end_time(int arc_id) const {
    return node(arc(arc_id).end_node).time;
  }
  double arc_duration(int arc_id) const {
    return arc_end_time(arc_id) - arc_start_time(arc_id);
  }
  double subword_posterior(const LatticeArc& a, const SubwordUnit& u) const {
    if (u.posterior) return *u.posterior;
    return a.posterior.value_or(1.0);
  }
};

struct ConfusionEntry {
  std::string word;
  double posterior = 0.0;
  std::vector<SubwordUnit> subwords;
};

struct ConfusionSet {
  double time_start = 0.0;
  double time_end = 0.0;
  std::vector<ConfusionEntry> entries;
};

/// Linear DAG of confusion sets, time-ordered.
struct ConfusionNetwork {
  std::string utterance_id;
  std::vector<ConfusionSet> sets;
};

namespace detail {

// Deterministic Kahn topological sort; ready nodes ordered by (time, id).
inline std::vector<int> kahn_order(const Lattice& lat, int error_line = 0) {
  std::map<int, int> indeg;
  for (const auto& n : lat.nodes) indeg[n.id] = 0;
  for (const auto& a : lat.arcs) indeg[a.end_node]++;
  using Key = std::pair<double, int>;  // (time, id)
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> ready;
  for (const auto& n : lat.nodes)
    if (indeg[n.id] == 0) ready.push({n.time, n.id});
  std::vector<int> order;
  order.reserve(lat.nodes.size());
  while (!ready.empty()) {
    int id = ready.top().second;
    ready.pop();
    order.push_back(id);
    auto it = lat.arcs_out.find(id);
    if (it == lat.arcs_out.end()) continue;
    for (int arc_id : it->second) {
      int dst = lat.arc(arc_id).end_node;
      if (--indeg[dst] == 0) ready.push({lat.node(dst).time, dst});
    }
  }
  if (order.size() != lat.nodes.size())
    throw ParseError(ParseError::Kind::CycleDetected, error_line,
                     "cycle detected in lattice '" + lat.utterance_id + "'");
  return order;
}

}  // namespace detail

/// Checks all structural invariants and fills the derived indexes.
/// Throws ParseError (cycle, duplicate ids) or DataError.
inline void validate(Lattice& lat) {
  lat.node_index.clear();
  lat.arc_index.clear();
  for (size_t i = 0; i < lat.nodes.size(); ++i) {
    const auto& n = lat.nodes[i];
    if (!std::isfinite(n.time) || n.time < 0.0)
      throw DataError("node " + std::to_string(n.id) + " has invalid time");
    if (!lat.node_index.emplace(n.id, static_cast<int>(i)).second)
      throw ParseError(ParseError::Kind::DuplicateId, 0,
                       "duplicate node id " + std::to_string(n.id));
  }
  lat.arcs_out.clear();
  lat.arcs_in.clear();
  for (size_t i = 0; i < lat.arcs.size(); ++i) {
    const auto& a = lat.arcs[i];
    if (!lat.arc_index.emplace(a.id, static_cast<int>(i)).second)
      throw ParseError(ParseError::Kind::DuplicateId, 0,
                       "duplicate arc id " + std::to_string(a.id));
    if (!lat.node_index.count(a.start_node) || !lat.node_index.count(a.end_node))
      throw ParseError(ParseError::Kind::DanglingReference, 0,
                       "arc " + std::to_string(a.id) +
                           " references nonexistent node");
    if (lat.node(a.start_node).time > lat.node(a.end_node).time)
      throw DataError("arc " + std::to_string(a.id) + " goes backwards in time");
    if (a.posterior && (*a.posterior < 0.0 || *a.posterior > 1.0))
      throw DataError("arc " + std::to_string(a.id) + " posterior out of [0,1]");
    for (const auto& u : a.subwords) {
      if (u.duration < 0.0)
        throw DataError("arc " + std::to_string(a.id) +
                        " has negative subword duration");
      if (u.posterior && (*u.posterior < 0.0 || *u.posterior > 1.0))
        throw DataError("arc " + std::to_string(a.id) +
                        " subword posterior out of [0,1]");
    }
    lat.arcs_out[a.start_node].push_back(a.id);
    lat.arcs_in[a.end_node].push_back(a.id);
  }
  for (auto& [id, v] : lat.arcs_out) std::sort(v.begin(), v.end());
  for (auto& [id, v] : lat.arcs_in) std::sort(v.begin(), v.end());

  // Exactly one initial node (in-degree 0).
  std::vector<int> initials;
  for (const auto& n : lat.nodes)
    if (!lat.arcs_in.count(n.id)) initials.push_back(n.id);
  if (initials.size() != 1)
    throw DataError("lattice '" + lat.utterance_id + "' has " +
                    std::to_string(initials.size()) +
                    " initial nodes, expected 1");
  lat.initial_node = initials[0];
  lat.final_nodes.clear();
  for (const auto& n : lat.nodes)
    if (!lat.arcs_out.count(n.id)) lat.final_nodes.insert(n.id);
  if (lat.final_nodes.empty())
    throw DataError("lattice '" + lat.utterance_id + "' has no final node");

  lat.topo_nodes = detail::kahn_order(lat);

  // Reachability from initial and co-reachability to a final.
  std::map<int, bool> fwd, bwd;
  fwd[lat.initial_node] = true;
  for (int id : lat.topo_nodes) {
    if (!fwd[id]) continue;
    auto it = lat.arcs_out.find(id);
    if (it == lat.arcs_out.end()) continue;
    for (int arc_id : it->second) fwd[lat.arc(arc_id).end_node] = true;
  }
  for (int fid : lat.final_nodes) bwd[fid] = true;
  for (auto it = lat.topo_nodes.rbegin(); it != lat.topo_nodes.rend(); ++it) {
    if (!bwd[*it]) continue;
    auto jt = lat.arcs_in.find(*it);
    if (jt == lat.arcs_in.end()) continue;
    for (int arc_id : jt->second) bwd[lat.arc(arc_id).start_node] = true;
  }
  for (const auto& n : lat.nodes) {
    if (!fwd[n.id])
      throw DataError("node " + std::to_string(n.id) +
                      " unreachable from initial node");
    if (!bwd[n.id])
      throw DataError("node " + std::to_string(n.id) +
                      " cannot reach a final node");
  }
}

/// Topological node order; deterministic (ties broken by time, then id).
inline std::vector<int> topological_order(const Lattice& lat) {
  return detail::kahn_order(lat);
}

/// Arc ids ordered by topological position of their start node, then arc id.
inline std::vector<int> topological_arc_order(const Lattice& lat) {
  std::vector<int> out;
  out.reserve(lat.arcs.size());
  for (int nid : lat.topo_nodes) {
    auto it = lat.arcs_out.find(nid);
    if (it == lat.arcs_out.end()) continue;
    for (int arc_id : it->second) out.push_back(arc_id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Parsing and serialization.
//
// Lattice file:
//   LATTICE id=<utt> N=<nodes> L=<arcs>
//   I=<id> t=<time>
//   J=<id> S=<start> E=<end> W=<word> a=<am> l=<lm> [p=<post>] [sw=u:d[:p],..]
// CN file:
//   CN id=<utt> K=<sets>
//   SET k=<idx> ts=<start> te=<end>
//   W=<word> p=<post> [sw=...]
// ---------------------------------------------------------------------------

namespace detail {

inline bool take_field(const std::string& tok, const char* key,
                       std::string* out) {
  size_t klen = std::strlen(key);
  if (tok.size() > klen + 1 && tok.compare(0, klen, key) == 0 &&
      tok[klen] == '=') {
    *out = tok.substr(klen + 1);
    return true;
  }
  return false;
}

inline std::string require_field(const std::vector<std::string>& toks,
                                 const char* key, int line) {
  std::string v;
  for (const auto& t : toks)
    if (take_field(t, key, &v)) return v;
  throw ParseError(ParseError::Kind::MalformedLine, line,
                   std::string("missing field '") + key + "='");
}

inline std::optional<std::string> optional_field(
    const std::vector<std::string>& toks, const char* key) {
  std::string v;
  for (const auto& t : toks)
    if (take_field(t, key, &v)) return v;
  return std::nullopt;
}

inline std::vector<SubwordUnit> parse_subwords(const std::string& field,
                                               int line) {
  std::vector<SubwordUnit> out;
  for (const auto& part : split_char(field, ',')) {
    if (part.empty()) continue;
    auto bits = split_char(part, ':');
    if (bits.size() < 2 || bits.size() > 3)
      throw ParseError(ParseError::Kind::MalformedLine, line,
                       "bad subword entry '" + part + "'");
    SubwordUnit u;
    u.unit = bits[0];
    u.duration = parse_real(bits[1], line);
    if (bits.size() == 3) u.posterior = parse_real(bits[2], line);
    out.push_back(std::move(u));
  }
  return out;
}

inline std::string serialize_subwords(const std::vector<SubwordUnit>& sw) {
  std::string out;
  for (size_t i = 0; i < sw.size(); ++i) {
    if (i) out += ',';
    out += sw[i].unit + ':' + fmt_real(sw[i].duration);
    if (sw[i].posterior) out += ':' + fmt_real(*sw[i].posterior);
  }
  return out;
}

}  // namespace detail

inline Lattice parse_lattice(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  Lattice lat;
  long n_nodes = -1, n_arcs = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (!header_seen) {
      if (toks[0] != "LATTICE")
        throw ParseError(ParseError::Kind::MalformedHeader, lineno,
                         "expected 'LATTICE' header");
      lat.utterance_id = detail::require_field(toks, "id", lineno);
      n_nodes = parse_int(detail::require_field(toks, "N", lineno), lineno);
      n_arcs = parse_int(detail::require_field(toks, "L", lineno), lineno);
      if (n_nodes < 1 || n_arcs < 0)
        throw ParseError(ParseError::Kind::MalformedHeader, lineno,
                         "invalid node/arc counts");
      header_seen = true;
      continue;
    }
    if (toks[0].rfind("I=", 0) == 0) {
      LatticeNode n;
      n.id = static_cast<int>(
          parse_int(detail::require_field(toks, "I", lineno), lineno));
      n.time = parse_real(detail::require_field(toks, "t", lineno), lineno);
      lat.nodes.push_back(n);
    } else if (toks[0].rfind("J=", 0) == 0) {
      LatticeArc a;
      a.id = static_cast<int>(
          parse_int(detail::require_field(toks, "J", lineno), lineno));
      a.start_node = static_cast<int>(
          parse_int(detail::require_field(toks, "S", lineno), lineno));
      a.end_node = static_cast<int>(
          parse_int(detail::require_field(toks, "E", lineno), lineno));
      a.word = detail::require_field(toks, "W", lineno);
      a.am_score = parse_real(detail::require_field(toks, "a", lineno), lineno);
      a.lm_score = parse_real(detail::require_field(toks, "l", lineno), lineno);
      if (auto p = detail::optional_field(toks, "p"))
        a.posterior = parse_real(*p, lineno);
      if (auto sw = detail::optional_field(toks, "sw"))
        a.subwords = detail::parse_subwords(*sw, lineno);
      lat.arcs.push_back(std::move(a));
    } else {
      throw ParseError(ParseError::Kind::MalformedLine, lineno,
                       "unrecognized line '" + toks[0] + "'");
    }
  }
  if (!header_seen)
    throw ParseError(ParseError::Kind::MalformedHeader, 0, "empty input");
  if (static_cast<long>(lat.nodes.size()) != n_nodes ||
      static_cast<long>(lat.arcs.size()) != n_arcs)
    throw ParseError(
        ParseError::Kind::CountMismatch, lineno,
        "header declares N=" + std::to_string(n_nodes) + " L=" +
            std::to_string(n_arcs) + " but found " +
            std::to_string(lat.nodes.size()) + " nodes, " +
            std::to_string(lat.arcs.size()) + " arcs");
  validate(lat);
  return lat;
}

inline std::string serialize_lattice(const Lattice& lat) {
  std::string out = "LATTICE id=" + lat.utterance_id +
                    " N=" + std::to_string(lat.nodes.size()) +
                    " L=" + std::to_string(lat.arcs.size()) + "\n";
  for (const auto& n : lat.nodes)
    out += "I=" + std::to_string(n.id) + " t=" + fmt_real(n.time) + "\n";
  for (const auto& a : lat.arcs) {
    out += "J=" + std::to_string(a.id) + " S=" + std::to_string(a.start_node) +
           " E=" + std::to_string(a.end_node) + " W=" + a.word +
           " a=" + fmt_real(a.am_score) + " l=" + fmt_real(a.lm_score);
    if (a.posterior) out += " p=" + fmt_real(*a.posterior);
    if (!a.subwords.empty())
      out += " sw=" + detail::serialize_subwords(a.subwords);
    out += "\n";
  }
  return out;
}

inline ConfusionNetwork parse_confusion_network(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  ConfusionNetwork cn;
  long n_sets = -1;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (!header_seen) {
      if (toks[0] != "CN")
        throw ParseError(ParseError::Kind::MalformedHeader, lineno,
                         "expected 'CN' header");
      cn.utterance_id = detail::require_field(toks, "id", lineno);
      n_sets = parse_int(detail::require_field(toks, "K", lineno), lineno);
      header_seen = true;
      continue;
    }
    if (toks[0] == "SET") {
      ConfusionSet s;
      long k = parse_int(detail::require_field(toks, "k", lineno), lineno);
      if (k != static_cast<long>(cn.sets.size()))
        throw ParseError(ParseError::Kind::MalformedLine, lineno,
                         "set index " + std::to_string(k) + " out of order");
      s.time_start =
          parse_real(detail::require_field(toks, "ts", lineno), lineno);
      s.time_end = parse_real(detail::require_field(toks, "te", lineno), lineno);
      if (s.time_end < s.time_start)
        throw ParseError(ParseError::Kind::InvalidValue, lineno,
                         "set ends before it starts");
      if (!cn.sets.empty() && s.time_start < cn.sets.back().time_start)
        throw ParseError(ParseError::Kind::InvalidValue, lineno,
                         "sets not time-ordered");
      cn.sets.push_back(s);
    } else if (toks[0].rfind("W=", 0) == 0) {
      if (cn.sets.empty())
        throw ParseError(ParseError::Kind::MalformedLine, lineno,
                         "entry before any SET line");
      ConfusionEntry e;
      e.word = detail::require_field(toks, "W", lineno);
      e.posterior = parse_real(detail::require_field(toks, "p", lineno), lineno);
      if (e.posterior < 0.0 || e.posterior > 1.0)
        throw ParseError(ParseError::Kind::InvalidValue, lineno,
                         "posterior out of [0,1]");
      if (auto sw = detail::optional_field(toks, "sw"))
        e.subwords = detail::parse_subwords(*sw, lineno);
      cn.sets.back().entries.push_back(std::move(e));
    } else {
      throw ParseError(ParseError::Kind::MalformedLine, lineno,
                       "unrecognized line '" + toks[0] + "'");
    }
  }
  if (!header_seen)
    throw ParseError(ParseError::Kind::MalformedHeader, 0, "empty input");
  if (static_cast<long>(cn.sets.size()) != n_sets)
    throw ParseError(ParseError::Kind::CountMismatch, lineno,
                     "header declares K=" + std::to_string(n_sets) +
                         " but found " + std::to_string(cn.sets.size()));
  for (size_t k = 0; k < cn.sets.size(); ++k) {
    double mass = 0.0;
    for (const auto& e : cn.sets[k].entries) mass += e.posterior;
    if (mass > 1.0 + 1e-6)
      throw ParseError(ParseError::Kind::MassViolation, 0,
                       "set " + std::to_string(k) + " posterior mass " +
                           fmt_real(mass) + " exceeds 1");
    if (cn.sets[k].entries.empty())
      throw ParseError(ParseError::Kind::MalformedLine, 0,
                       "set " + std::to_string(k) + " is empty");
  }
  return cn;
}

inline std::string serialize_confusion_network(const ConfusionNetwork& cn) {
  std::string out = "CN id=" + cn.utterance_id +
                    " K=" + std::to_string(cn.sets.size()) + "\n";
  for (size_t k = 0; k < cn.sets.size(); ++k) {
    const auto& s = cn.sets[k];
    out += "SET k=" + std::to_string(k) + " ts=" + fmt_real(s.time_start) +
           " te=" + fmt_real(s.time_end) + "\n";
    for (const auto& e : s.entries) {
      out += "W=" + e.word + " p=" + fmt_real(e.posterior);
      if (!e.subwords.empty())
        out += " sw=" + detail::serialize_subwords(e.subwords);
      out += "\n";
    }
  }
  return out;
}

/// Views a CN as a chain-structured lattice so graph operations apply
/// uniformly. Entry posteriors are kept; scores are set so that
/// forward-backward reproduces them (am = log p within each slot).
inline Lattice cn_to_lattice(const ConfusionNetwork& cn) {
  Lattice lat;
  lat.utterance_id = cn.utterance_id;
  int n_sets = static_cast<int>(cn.sets.size());
  lat.nodes.reserve(n_sets + 1);
  for (int k = 0; k <= n_sets; ++k) {
    double t;
    if (k == 0)
      t = cn.sets.empty() ? 0.0 : cn.sets[0].time_start;
    else
      t = cn.sets[k - 1].time_end;
    lat.nodes.push_back({k, t});
  }
  // Node times must be non-decreasing for validation.
  for (int k = 1; k <= n_sets; ++k)
    lat.nodes[k].time = std::max(lat.nodes[k].time, lat.nodes[k - 1].time);
  int arc_id = 0;
  for (int k = 0; k < n_sets; ++k) {
    double slot_mass = 0.0;
    for (const auto& e : cn.sets[k].entries) slot_mass += e.posterior;
    for (const auto& e : cn.sets[k].entries) {
      LatticeArc a;
      a.id = arc_id++;
      a.start_node = k;
      a.end_node = k + 1;
      a.word = e.word;
      a.posterior = e.posterior;
      double renorm = slot_mass > 0 ? e.posterior / slot_mass : 1.0;
      a.am_score = std::log(clamp_prob(renorm));
      a.lm_score = 0.0;
      a.subwords = e.subwords;
      lat.arcs.push_back(std::move(a));
    }
  }
  validate(lat);
  return lat;
}

// ---------------------------------------------------------------------------
// Forward-backward posteriors, one-best extraction, overlap statistics.
// ---------------------------------------------------------------------------

/// Fills arc posteriors via log-domain forward-backward.
/// Arc likelihood = am_scale * am + lm_scale * lm.
inline Lattice compute_arc_posteriors(const Lattice& input, double am_scale = 1.0,
                                      double lm_scale = 1.0) {
  if (am_scale <= 0.0 || lm_scale <= 0.0)
    throw NumericError("am/lm scales must be positive");
  Lattice lat = input;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::map<int, double> fwd, bwd;
  for (const auto& n : lat.nodes) fwd[n.id] = bwd[n.id] = kNegInf;
  fwd[lat.initial_node] = 0.0;
  auto score = [&](const LatticeArc& a) {
    return am_scale * a.am_score + lm_scale * a.lm_score;
  };
  for (int nid : lat.topo_nodes) {
    if (fwd[nid] == kNegInf) continue;
    auto it = lat.arcs_out.find(nid);
    if (it == lat.arcs_out.end()) continue;
    for (int arc_id : it->second) {
      const auto& a = lat.arc(arc_id);
      fwd[a.end_node] = log_sum_exp(fwd[a.end_node], fwd[nid] + score(a));
    }
  }
  for (int fid : lat.final_nodes) bwd[fid] = 0.0;
  for (auto it = lat.topo_nodes.rbegin(); it != lat.topo_nodes.rend(); ++it) {
    int nid = *it;
    auto jt = lat.arcs_out.find(nid);
    if (jt == lat.arcs_out.end()) continue;
    double acc = lat.final_nodes.count(nid) ? 0.0 : kNegInf;
    for (int arc_id : jt->second) {
      const auto& a = lat.arc(arc_id);
      acc = log_sum_exp(acc, score(a) + bwd[a.end_node]);
    }
    bwd[nid] = acc;
  }
  double total = bwd[lat.initial_node];
  if (total == kNegInf || !std::isfinite(total))
    throw NumericError("lattice '" + lat.utterance_id +
                       "' has no initial-to-final path");
  for (auto& a : lat.arcs) {
    double lp = fwd[a.start_node] + score(a) + bwd[a.end_node] - total;
    a.posterior = std::min(1.0, std::exp(lp));
  }
  return lat;
}

/// Max-product path over arc posteriors; ties broken by lower arc id.
inline std::vector<int> one_best_path(const Lattice& lat) {
  for (const auto& a : lat.arcs)
    if (!a.posterior)
      throw DataError("one_best_path: posteriors missing on lattice '" +
                      lat.utterance_id + "'");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::map<int, double> best;             // node id -> best log-product
  std::map<int, int> back_arc;            // node id -> arc achieving it
  for (const auto& n : lat.nodes) best[n.id] = kNegInf;
  best[lat.initial_node] = 0.0;
  for (int nid : lat.topo_nodes) {
    if (best[nid] == kNegInf) continue;
    auto it = lat.arcs_out.find(nid);
    if (it == lat.arcs_out.end()) continue;
    for (int arc_id : it->second) {
      const auto& a = lat.arc(arc_id);
      double cand = best[nid] + std::log(clamp_prob(*a.posterior));
      // Strict improvement keeps the lowest arc id on ties (arcs_out sorted,
      // nodes visited in topological order).
      if (cand > best[a.end_node]) {
        best[a.end_node] = cand;
        back_arc[a.end_node] = arc_id;
      }
    }
  }
  int best_final = -1;
  double best_score = kNegInf;
  for (int fid : lat.final_nodes) {
    if (best[fid] > best_score) {
      best_score = best[fid];
      best_final = fid;
    }
  }
  if (best_final < 0) throw DataError("no path to a final node");
  std::vector<int> path;
  int cur = best_final;
  while (cur != lat.initial_node) {
    int arc_id = back_arc.at(cur);
    path.push_back(arc_id);
    cur = lat.arc(arc_id).start_node;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// Strictly positive temporal intersection; touching endpoints do not count.
inline bool time_overlap(double s1, double e1, double s2, double e2) {
  return std::min(e1, e2) > std::max(s1, s2);
}

/// Population mean and standard deviation of posteriors of all arcs whose
/// time span overlaps the given arc (the arc itself always included).
inline std::pair<double, double> overlap_stats(const Lattice& lat, int arc_id) {
  double s = lat.arc_start_time(arc_id), e = lat.arc_end_time(arc_id);
  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (const auto& a : lat.arcs) {
    if (a.id != arc_id) {
      double as = lat.arc_start_time(a.id), ae = lat.arc_end_time(a.id);
      if (!time_overlap(s, e, as, ae)) continue;
    }
    if (!a.posterior) throw DataError("overlap_stats: posteriors missing");
    sum += *a.posterior;
    sum2 += *a.posterior * *a.posterior;
    ++count;
  }
  double mean = sum / count;
  double var = std::max(0.0, sum2 / count - mean * mean);
  return {mean, std::sqrt(var)};
}

}  // namespace latconf
