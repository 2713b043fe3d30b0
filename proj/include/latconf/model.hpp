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

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "latconf/alignment.hpp"
#include "latconf/features.hpp"
#include "latconf/nn.hpp"

namespace latconf {

enum class PosteriorFeature { None, Raw, Mapped, RawAndMapped };
enum class SubwordFeature { None, DirectEmb, DirectEmbDur, Encoder };
enum class LossMode { OneBest, AllArcs };

inline std::string to_string(PosteriorFeature p) {
  switch (p) {
    case PosteriorFeature::None: return "none";
    case PosteriorFeature::Raw: return "raw";
    case PosteriorFeature::Mapped: return "mapped";
    default: return "raw+mapped";
  }
}
inline std::string to_string(SubwordFeature s) {
  switch (s) {
    case SubwordFeature::None: return "none";
    case SubwordFeature::DirectEmb: return "direct-emb";
    case SubwordFeature::DirectEmbDur: return "direct-emb-dur";
    default: return "encoder";
  }
}
inline std::string to_string(LossMode m) {
  return m == LossMode::OneBest ? "one-best" : "all-arcs";
}
inline PosteriorFeature posterior_feature_from_string(const std::string& s) {
  if (s == "none") return PosteriorFeature::None;
  if (s == "raw") return PosteriorFeature::Raw;
  if (s == "mapped") return PosteriorFeature::Mapped;
  if (s == "raw+mapped") return PosteriorFeature::RawAndMapped;
  throw DataError("unknown posterior feature '" + s + "'");
}
inline SubwordFeature subword_feature_from_string(const std::string& s) {
  if (s == "none") return SubwordFeature::None;
  if (s == "direct-emb") return SubwordFeature::DirectEmb;
  if (s == "direct-emb-dur") return SubwordFeature::DirectEmbDur;
  if (s == "encoder") return SubwordFeature::Encoder;
  throw DataError("unknown subword feature '" + s + "'");
}
inline LossMode loss_mode_from_string(const std::string& s) {
  if (s == "one-best") return LossMode::OneBest;
  if (s == "all-arcs") return LossMode::AllArcs;
  throw DataError("unknown loss mode '" + s + "'");
}

struct ModelConfig {
  int hidden_size = 32;
  int subword_hidden_size = 10;
  nn::CellType cell = nn::CellType::Gru;
  nn::AttentionType attention = nn::AttentionType::Add;
  bool use_graph = false;  // BiLatRNN over the full DAG vs BiRNN on one-best
  bool use_duration = true;
  PosteriorFeature posterior = PosteriorFeature::Raw;
  SubwordFeature subword = SubwordFeature::None;
  bool use_lattice = false;
  LossMode loss_mode = LossMode::OneBest;
  int word_emb_dim = 10;
  int sub_emb_dim = 4;
  unsigned seed = 42;

  void validate() const {
    if (hidden_size < 1 || subword_hidden_size < 1 || word_emb_dim < 1 ||
        sub_emb_dim < 1)
      throw DataError("model sizes must be >= 1");
  }

  std::string to_kv() const {
    std::ostringstream out;
    out << "hidden_size=" << hidden_size << "\n"
        << "subword_hidden_size=" << subword_hidden_size << "\n"
        << "cell=" << nn::to_string(cell) << "\n"
        << "attention=" << nn::to_string(attention) << "\n"
        << "use_graph=" << (use_graph ? 1 : 0) << "\n"
        << "use_duration=" << (use_duration ? 1 : 0) << "\n"
        << "posterior=" << to_string(posterior) << "\n"
        << "subword=" << to_string(subword) << "\n"
        << "use_lattice=" << (use_lattice ? 1 : 0) << "\n"
        << "loss_mode=" << to_string(loss_mode) << "\n"
        << "word_emb_dim=" << word_emb_dim << "\n"
        << "sub_emb_dim=" << sub_emb_dim << "\n"
        << "seed=" << seed << "\n";
    return out.str();
  }

  static ModelConfig from_kv(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    auto get = [&](const char* k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw DataError(std::string("config missing ") + k);
      return it->second;
    };
    c.hidden_size = static_cast<int>(parse_int(get("hidden_size")));
    c.subword_hidden_size =
        static_cast<int>(parse_int(get("subword_hidden_size")));
    c.cell = nn::cell_from_string(get("cell"));
    c.attention = nn::attention_from_string(get("attention"));
    c.use_graph = parse_int(get("use_graph")) != 0;
    c.use_duration = parse_int(get("use_duration")) != 0;
    c.posterior = posterior_feature_from_string(get("posterior"));
    c.subword = subword_feature_from_string(get("subword"));
    c.use_lattice = parse_int(get("use_lattice")) != 0;
    c.loss_mode = loss_mode_from_string(get("loss_mode"));
    c.word_emb_dim = static_cast<int>(parse_int(get("word_emb_dim")));
    c.sub_emb_dim = static_cast<int>(parse_int(get("sub_emb_dim")));
    c.seed = static_cast<unsigned>(parse_int(get("seed")));
    c.validate();
    return c;
  }

  std::uint64_t hash() const { return fnv1a(to_kv()); }
};

/// Optional per-arc (am, lm) feature pair transferred from a lattice.
using LatticeFeats = std::map<int, std::optional<std::pair<double, double>>>;

/// Attention aggregation record, exposed for inspection in tests.
struct AttnRecord {
  int node = 0;
  bool forward_dir = true;
  std::vector<int> incoming_arcs;
  std::vector<double> alphas;
};

struct ScoredGraph {
  std::vector<int> arc_ids;  // scored arcs, deterministic order
  std::vector<nn::Tape::Id> conf_ids;
  std::vector<double> confidences;
  std::vector<AttnRecord> attention;
};

/// Confidence estimator: parameters, embeddings, calibration map and
/// normalization statistics, with forward passes on sequences and DAGs.
class ConfidenceModel {
 public:
  ModelConfig cfg;
  nn::ParamSet params;
  EmbeddingTable word_table;
  EmbeddingTable sub_table;
  PosteriorMap pmap;
  NormStats norm;

  ConfidenceModel(ModelConfig config, EmbeddingTable words,
                  EmbeddingTable subs = EmbeddingTable())
      : cfg(config), word_table(std::move(words)), sub_table(std::move(subs)) {
    cfg.validate();
    if (word_table.dim() != cfg.word_emb_dim)
      throw ShapeError("word embedding dim " +
                       std::to_string(word_table.dim()) + " != configured " +
                       std::to_string(cfg.word_emb_dim));
    if (cfg.subword != SubwordFeature::None &&
        sub_table.dim() != cfg.sub_emb_dim)
      throw ShapeError("subword embedding dim mismatch");
    build_params();
  }

  int word_block_dim() const {
    int d = cfg.word_emb_dim;
    if (cfg.use_duration) ++d;
    switch (cfg.posterior) {
      case PosteriorFeature::None: break;
      case PosteriorFeature::Raw:
      case PosteriorFeature::Mapped: d += 1; break;
      case PosteriorFeature::RawAndMapped: d += 2; break;
    }
    return d;
  }

  int subword_unit_dim() const {
    switch (cfg.subword) {
      case SubwordFeature::None: return 0;
      case SubwordFeature::DirectEmb: return cfg.sub_emb_dim;
      case SubwordFeature::DirectEmbDur: return cfg.sub_emb_dim + 1;
      case SubwordFeature::Encoder: return cfg.sub_emb_dim + 2;
    }
    return 0;
  }

  /// Dimension of the pooled sub-word vector (before the null flag).
  int subword_pooled_dim() const {
    if (cfg.subword == SubwordFeature::None) return 0;
    if (cfg.subword == SubwordFeature::Encoder)
      return 2 * cfg.subword_hidden_size;
    return subword_unit_dim();
  }

  int subword_block_dim() const {
    return cfg.subword == SubwordFeature::None ? 0 : subword_pooled_dim() + 1;
  }

  int feature_dim() const {
    return word_block_dim() + subword_block_dim() + (cfg.use_lattice ? 2 : 0);
  }

  // -------------------------------------------------------------------------
  // Forward passes.
  // -------------------------------------------------------------------------

  /// Scores every arc of a DAG (BiLatRNN) or the one-best chain (BiRNN),
  /// depending on cfg.use_graph. The lattice must carry posteriors.
  ScoredGraph score(nn::Tape& t, const Lattice& lat,
                    const LatticeFeats* lattice_feats = nullptr) {
    if (cfg.use_graph) return score_graph(t, lat, lattice_feats);
    std::vector<int> path = one_best_path(lat);
    return score_sequence(t, lat, path, lattice_feats);
  }

  /// BiRNN forward over an explicit arc sequence.
  ScoredGraph score_sequence(nn::Tape& t, const Lattice& lat,
                             const std::vector<int>& arc_ids,
                             const LatticeFeats* lattice_feats = nullptr) {
    Loaded lp = load(t);
    size_t T = arc_ids.size();
    if (T == 0) throw DataError("score_sequence: empty sequence");
    std::vector<nn::Tape::Id> feats(T);
    for (size_t i = 0; i < T; ++i)
      feats[i] = arc_features(t, lp, lat, arc_ids[i], lattice_feats);
    std::vector<nn::Tape::Id> hf(T), hb(T);
    nn::Tape::Id prev = lp.h0f;
    for (size_t i = 0; i < T; ++i) {
      hf[i] = nn::cell_step(t, lp.fwd, prev, feats[i]);
      prev = hf[i];
    }
    prev = lp.h0b;
    for (size_t i = T; i-- > 0;) {
      hb[i] = nn::cell_step(t, lp.bwd, prev, feats[i]);
      prev = hb[i];
    }
    ScoredGraph out;
    for (size_t i = 0; i < T; ++i) {
      nn::Tape::Id c = confidence_head(t, lp, hf[i], hb[i]);
      out.arc_ids.push_back(arc_ids[i]);
      out.conf_ids.push_back(c);
      out.confidences.push_back(t.scalar_value(c));
    }
    return out;
  }

  /// BiLatRNN forward over the full DAG. States live on arcs; incoming
  /// states are aggregated once per node and reused by all arcs leaving it.
  ScoredGraph score_graph(nn::Tape& t, const Lattice& lat,
                          const LatticeFeats* lattice_feats = nullptr) {
    Loaded lp = load(t);
    std::map<int, nn::Tape::Id> feats, keys;
    for (const auto& a : lat.arcs) {
      feats[a.id] = arc_features(t, lp, lat, a.id, lattice_feats);
      if (cfg.attention == nn::AttentionType::Add) {
        auto k = attention_key(lat, a.id);
        keys[a.id] = t.constant({k[0], k[1], k[2]});
      }
    }
    ScoredGraph out;
    std::map<int, nn::Tape::Id> hf, hb;

    auto aggregate = [&](const std::vector<int>& arcs,
                         const std::map<int, nn::Tape::Id>& states,
                         nn::Tape::Id h0, const nn::AttentionOnTape& attn,
                         int node, bool fwd_dir) {
      if (arcs.empty()) return h0;
      std::vector<nn::Tape::Id> s, k;
      for (int id : arcs) {
        s.push_back(states.at(id));
        if (cfg.attention == nn::AttentionType::Add) k.push_back(keys.at(id));
      }
      auto scores = nn::attention_scores(t, attn, s, k);
      AttnRecord rec;
      rec.node = node;
      rec.forward_dir = fwd_dir;
      rec.incoming_arcs = arcs;
      nn::Tape::Id comb = nn::attention_combine(t, s, scores, &rec.alphas);
      out.attention.push_back(std::move(rec));
      return comb;
    };

    for (int nid : lat.topo_nodes) {
      auto in_it = lat.arcs_in.find(nid);
      static const std::vector<int> kNone;
      const auto& incoming = in_it == lat.arcs_in.end() ? kNone : in_it->second;
      auto out_it = lat.arcs_out.find(nid);
      if (out_it == lat.arcs_out.end()) continue;
      nn::Tape::Id comb = aggregate(incoming, hf, lp.h0f, lp.attn_f, nid, true);
      for (int arc_id : out_it->second)
        hf[arc_id] = nn::cell_step(t, lp.fwd, comb, feats[arc_id]);
    }
    for (auto it = lat.topo_nodes.rbegin(); it != lat.topo_nodes.rend(); ++it) {
      int nid = *it;
      auto out_it = lat.arcs_out.find(nid);
      static const std::vector<int> kNone;
      const auto& outgoing =
          out_it == lat.arcs_out.end() ? kNone : out_it->second;
      auto in_it = lat.arcs_in.find(nid);
      if (in_it == lat.arcs_in.end()) continue;
      nn::Tape::Id comb = aggregate(outgoing, hb, lp.h0b, lp.attn_b, nid, false);
      for (int arc_id : in_it->second)
        hb[arc_id] = nn::cell_step(t, lp.bwd, comb, feats[arc_id]);
    }
    for (const auto& a : lat.arcs) {
      nn::Tape::Id c = confidence_head(t, lp, hf.at(a.id), hb.at(a.id));
      out.arc_ids.push_back(a.id);
      out.conf_ids.push_back(c);
      out.confidences.push_back(t.scalar_value(c));
    }
    return out;
  }

  /// Attention-pooled fixed-length vector for a sub-word sequence; exposed
  /// for unit tests. alphas_out receives the pooling weights (empty list ->
  /// no attention applied).
  std::vector<double> subword_encode_values(const LatticeArc& arc,
                                            std::vector<double>* alphas_out =
                                                nullptr) {
    nn::Tape t;
    Loaded lp = load(t);
    nn::Tape::Id id = subword_block(t, lp, arc, alphas_out);
    return t.value(id);
  }

  /// Per-arc confidences plus the one-best restriction, for inference.
  struct Prediction {
    std::vector<int> arc_ids;
    std::vector<double> confidences;
    std::vector<int> one_best_arcs;
    std::vector<double> one_best_confidences;
  };

  Prediction predict_utterance(const Lattice& lat,
                               const LatticeFeats* lattice_feats = nullptr) {
    nn::Tape t;
    ScoredGraph sg = score(t, lat, lattice_feats);
    Prediction p;
    p.arc_ids = sg.arc_ids;
    p.confidences = sg.confidences;
    p.one_best_arcs = one_best_path(lat);
    std::map<int, double> by_id;
    for (size_t i = 0; i < sg.arc_ids.size(); ++i)
      by_id[sg.arc_ids[i]] = sg.confidences[i];
    for (int id : p.one_best_arcs)
      p.one_best_confidences.push_back(by_id.at(id));
    return p;
  }

 private:
  struct Loaded {
    nn::CellOnTape fwd, bwd;
    nn::Tape::Id h0f = -1, h0b = -1;
    nn::AttentionOnTape attn_f, attn_b;
    nn::Tape::Id head_w = -1, head_b = -1;
    // Sub-word encoder.
    nn::CellOnTape sub_fwd, sub_bwd;
    nn::Tape::Id sub_h0f = -1, sub_h0b = -1;
    nn::AttentionOnTape sub_attn;
    nn::Tape::Id sub_null = -1;
  };

  void build_params() {
    std::mt19937_64 rng(cfg.seed);
    // Word embedding matrix; last row is the unknown token.
    int vw = static_cast<int>(word_table.size());
    nn::Tensor& we = params.add("emb.word", vw + 1, cfg.word_emb_dim);
    we.trainable = word_table.trainable();
    for (int r = 0; r <= vw; ++r)
      for (int d = 0; d < cfg.word_emb_dim; ++d)
        we.value[static_cast<size_t>(r) * cfg.word_emb_dim + d] =
            word_table.row_vector(r)[d];
    if (cfg.subword != SubwordFeature::None) {
      int vs = static_cast<int>(sub_table.size());
      nn::Tensor& se = params.add("emb.sub", vs + 1, cfg.sub_emb_dim);
      se.trainable = sub_table.trainable();
      for (int r = 0; r <= vs; ++r)
        for (int d = 0; d < cfg.sub_emb_dim; ++d)
          se.value[static_cast<size_t>(r) * cfg.sub_emb_dim + d] =
              sub_table.row_vector(r)[d];
    }
    int d = feature_dim();
    int h = cfg.hidden_size;
    nn::make_cell_params(params, "fwd", cfg.cell, h, d, rng);
    nn::make_cell_params(params, "bwd", cfg.cell, h, d, rng);
    params.add("h0.fwd", h);  // learned initial states, start at 0
    params.add("h0.bwd", h);
    nn::make_attention_params(params, "attn.fwd", cfg.attention, h, 3, rng);
    nn::make_attention_params(params, "attn.bwd", cfg.attention, h, 3, rng);
    if (cfg.subword != SubwordFeature::None) {
      int sd = subword_unit_dim();
      int key_dim = cfg.sub_emb_dim + 1;  // [embedding; duration]
      if (cfg.subword == SubwordFeature::Encoder) {
        int sh = cfg.subword_hidden_size;
        nn::make_cell_params(params, "sub.fwd", cfg.cell, sh, sd, rng);
        nn::make_cell_params(params, "sub.bwd", cfg.cell, sh, sd, rng);
        params.add("sub.h0.fwd", sh);
        params.add("sub.h0.bwd", sh);
      }
      // Sub-word pooling is always additive ([embedding; duration] key).
      nn::make_attention_params(params, "sub.attn", nn::AttentionType::Add,
                                subword_pooled_dim(), key_dim, rng);
      params.add("sub.null", 1);
    }
    nn::Tensor& hw = params.add("head.w", 2 * h);
    {
      double bound = 1.0 / std::sqrt(2.0 * h);
      std::uniform_real_distribution<double> u(-bound, bound);
      for (double& v : hw.value) v = u(rng);
    }
    params.add("head.b", 1);
  }

  Loaded load(nn::Tape& t) {
    Loaded lp;
    lp.fwd = nn::load_cell(t, params, "fwd", cfg.cell);
    lp.bwd = nn::load_cell(t, params, "bwd", cfg.cell);
    lp.h0f = t.param(params.get("h0.fwd"));
    lp.h0b = t.param(params.get("h0.bwd"));
    lp.attn_f = nn::load_attention(t, params, "attn.fwd", cfg.attention,
                                   cfg.hidden_size, 3);
    lp.attn_b = nn::load_attention(t, params, "attn.bwd", cfg.attention,
                                   cfg.hidden_size, 3);
    if (cfg.subword != SubwordFeature::None) {
      if (cfg.subword == SubwordFeature::Encoder) {
        lp.sub_fwd = nn::load_cell(t, params, "sub.fwd", cfg.cell);
        lp.sub_bwd = nn::load_cell(t, params, "sub.bwd", cfg.cell);
        lp.sub_h0f = t.param(params.get("sub.h0.fwd"));
        lp.sub_h0b = t.param(params.get("sub.h0.bwd"));
      }
      lp.sub_attn =
          nn::load_attention(t, params, "sub.attn", nn::AttentionType::Add,
                             subword_pooled_dim(), cfg.sub_emb_dim + 1);
      lp.sub_null = t.param(params.get("sub.null"));
    }
    lp.head_w = t.param(params.get("head.w"));
    lp.head_b = t.param(params.get("head.b"));
    return lp;
  }

  nn::Tape::Id confidence_head(nn::Tape& t, const Loaded& lp, nn::Tape::Id hf,
                               nn::Tape::Id hb) {
    return t.sigmoid_(t.add(t.dot(lp.head_w, t.concat(hf, hb)), lp.head_b));
  }

  nn::Tape::Id arc_features(nn::Tape& t, Loaded& lp, const Lattice& lat,
                            int arc_id, const LatticeFeats* lattice_feats) {
    const auto& a = lat.arc(arc_id);
    if (!a.posterior) throw DataError("arc features require posteriors");
    nn::Tape::Id emb =
        t.param_row(params.get("emb.word"), word_table.row(a.word));
    std::vector<double> tail;
    if (cfg.use_duration) tail.push_back(norm.duration(lat.arc_duration(arc_id)));
    double p = *a.posterior;
    if (cfg.posterior == PosteriorFeature::Raw ||
        cfg.posterior == PosteriorFeature::RawAndMapped)
      tail.push_back(std::log(clamp_prob(p)));
    if (cfg.posterior == PosteriorFeature::Mapped ||
        cfg.posterior == PosteriorFeature::RawAndMapped) {
      if (pmap.empty()) throw DataError("calibration map required but absent");
      tail.push_back(std::log(clamp_prob(pmap.apply(p))));
    }
    nn::Tape::Id x = tail.empty() ? emb : t.concat(emb, t.constant(tail));
    if (cfg.subword != SubwordFeature::None)
      x = t.concat(x, subword_block(t, lp, a));
    if (cfg.use_lattice) {
      std::vector<double> lf = {0.0, 0.0};
      if (lattice_feats) {
        auto it = lattice_feats->find(arc_id);
        if (it != lattice_feats->end() && it->second) {
          lf[0] = norm.am(it->second->first);
          lf[1] = norm.lm(it->second->second);
        }
      }
      x = t.concat(x, t.constant(lf));
    }
    return x;
  }

  nn::Tape::Id subword_block(nn::Tape& t, Loaded& lp, const LatticeArc& a,
                             std::vector<double>* alphas_out = nullptr) {
    int pooled_dim = subword_pooled_dim();
    if (a.subwords.empty()) {
      if (alphas_out) alphas_out->clear();
      nn::Tape::Id zeros = t.constant(std::vector<double>(pooled_dim, 0.0));
      return t.concat(zeros, lp.sub_null);
    }
    double parent_post = a.posterior.value_or(1.0);
    size_t n = a.subwords.size();
    std::vector<nn::Tape::Id> unit_feats(n), keys(n);
    nn::Tensor& se = params.get("emb.sub");
    for (size_t j = 0; j < n; ++j) {
      const auto& u = a.subwords[j];
      nn::Tape::Id emb = t.param_row(se, sub_table.row(u.unit));
      double dur = norm.sub_duration(u.duration);
      std::vector<double> tail;
      if (cfg.subword != SubwordFeature::DirectEmb) tail.push_back(dur);
      if (cfg.subword == SubwordFeature::Encoder)
        tail.push_back(
            std::log(clamp_prob(u.posterior.value_or(parent_post))));
      unit_feats[j] = tail.empty() ? emb : t.concat(emb, t.constant(tail));
      keys[j] = t.concat(emb, t.constant_scalar(dur));
    }
    std::vector<nn::Tape::Id> states;
    if (cfg.subword == SubwordFeature::Encoder) {
      std::vector<nn::Tape::Id> hf(n), hb(n);
      nn::Tape::Id prev = lp.sub_h0f;
      for (size_t j = 0; j < n; ++j) {
        hf[j] = nn::cell_step(t, lp.sub_fwd, prev, unit_feats[j]);
        prev = hf[j];
      }
      prev = lp.sub_h0b;
      for (size_t j = n; j-- > 0;) {
        hb[j] = nn::cell_step(t, lp.sub_bwd, prev, unit_feats[j]);
        prev = hb[j];
      }
      for (size_t j = 0; j < n; ++j) states.push_back(t.concat(hf[j], hb[j]));
    } else {
      states = unit_feats;
    }
    auto scores = nn::attention_scores(t, lp.sub_attn, states, keys);
    nn::Tape::Id pooled = nn::attention_combine(t, states, scores, alphas_out);
    return t.concat(pooled, t.constant_scalar(0.0));
  }
};

}  // namespace latconf
