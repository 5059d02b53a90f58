// Copyright 2026 The latconf Authors.
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

// Bi-directional recurrence over sequences, confusion networks and lattices.
//
// Nodes are visited in topological order. A node's state is a weighted sum
// of the states of its incoming arcs (the initial node uses the learned h0),
// and every arc leaving the node runs the recurrent cell on that merged
// state and the arc's own features. The backward direction is the same
// recursion on the reversed graph with its own parameters. Each arc's
// confidence is read from the concatenation of its two arc states:
//
//   u = tanh(W_f [h_fwd; h_bwd] + b_f),   c = logistic(w_c . u + b_c)
//
// Merge weights come from one of four rules: one-hot on the highest
// posterior (max), uniform (mean), posterior-proportional (posterior), or a
// softmax over attention logits computed from the key
// [arc state; arc posterior; mean and std of the merge set's posteriors].

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/graph.hpp"
#include "latconf/nncore.hpp"

namespace latconf {

struct PropagationConfig {
  MergeMethod merge = MergeMethod::kAttention;
  AttentionActivation activation = AttentionActivation::kLogistic;
};

// One direction of a graph, ready for propagation.
struct DirectedGraph {
  std::size_t node_count = 0;
  std::size_t arc_count = 0;
  NodeId initial = 0;
  std::vector<NodeId> order;
  std::vector<NodeId> arc_source;
  std::vector<std::vector<ArcId>> incoming;  // merge set of each node
  std::vector<std::vector<ArcId>> outgoing;
};

inline DirectedGraph directed_view(const Lattice& lattice) {
  DirectedGraph g;
  g.node_count = lattice.nodes.size();
  g.arc_count = lattice.arcs.size();
  g.initial = lattice.initial;
  g.order = topological_order(lattice);
  g.arc_source.resize(g.arc_count);
  g.incoming.resize(g.node_count);
  g.outgoing.resize(g.node_count);
  for (const Arc& a : lattice.arcs) {
    g.arc_source[a.id] = a.start;
    g.outgoing[a.start].push_back(a.id);
    g.incoming[a.end].push_back(a.id);
  }
  return g;
}

// Per-direction activations. Arc-indexed arrays use the lattice's arc ids.
struct DirectionState {
  std::size_t hidden = 0;
  CellType cell = CellType::kSimple;
  Vector node_h, node_c;  // node_count x H
  Vector arc_h, arc_c;    // arc_count x H
  Vector gates;           // arc_count x 4H (gated)
  Vector tanh_c;          // arc_count x H (gated)
  Vector alpha;           // weight of each arc in its end node's merge
  Vector attention_z;     // activated attention logit of each arc

  std::span<const double> node_state(NodeId n) const {
    return {node_h.data() + n * hidden, hidden};
  }
  std::span<const double> arc_state(ArcId a) const {
    return {arc_h.data() + a * hidden, hidden};
  }
};

struct PropagationState {
  DirectionState forward;
  DirectionState backward;
};

// ---------------------------------------------------------------------------
// Merging

struct MergeStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline MergeStats merge_stats(std::span<const ArcId> set, std::span<const double> posteriors) {
  MergeStats s;
  const double n = static_cast<double>(set.size());
  for (ArcId a : set) s.mean += posteriors[a];
  s.mean /= n;
  double var = 0.0;
  for (ArcId a : set) var += (posteriors[a] - s.mean) * (posteriors[a] - s.mean);
  s.stddev = set.size() > 1 ? std::sqrt(var / n) : 0.0;
  return s;
}

namespace detail {

inline double attention_pre(std::span<const double> w_a, double b_a, const double* h,
                            std::size_t hidden, double posterior, const MergeStats& s) {
  return kernel::dot(w_a.data(), h, hidden) + w_a[hidden] * posterior +
         w_a[hidden + 1] * s.mean + w_a[hidden + 2] * s.stddev + b_a;
}

// Fills alpha[a] (and z[a] for attention) for every arc of the merge set.
inline void merge_weights(const PropagationConfig& cfg, std::span<const ArcId> set,
                          const double* arc_h, std::size_t hidden,
                          std::span<const double> posteriors, std::span<const double> w_a,
                          double b_a, double* alpha, double* z) {
  const std::size_t n = set.size();
  switch (cfg.merge) {
    case MergeMethod::kMax: {
      std::size_t best = 0;
      for (std::size_t i = 1; i < n; ++i) {
        const double p = posteriors[set[i]], q = posteriors[set[best]];
        if (p > q || (p == q && set[i] < set[best])) best = i;
      }
      for (std::size_t i = 0; i < n; ++i) alpha[set[i]] = i == best ? 1.0 : 0.0;
      return;
    }
    case MergeMethod::kMean:
      for (ArcId a : set) alpha[a] = 1.0 / static_cast<double>(n);
      return;
    case MergeMethod::kPosterior: {
      double sum = 0.0;
      for (ArcId a : set) sum += posteriors[a];
      for (ArcId a : set)
        alpha[a] = sum > 0.0 ? posteriors[a] / sum : 1.0 / static_cast<double>(n);
      return;
    }
    case MergeMethod::kAttention: {
      const MergeStats stats = merge_stats(set, posteriors);
      Vector logits(n);
      for (std::size_t i = 0; i < n; ++i) {
        const ArcId a = set[i];
        z[a] = activate(cfg.activation, attention_pre(w_a, b_a, arc_h + a * hidden, hidden,
                                                      posteriors[a], stats));
        logits[i] = z[a];
      }
      const Vector w = softmax(logits);
      for (std::size_t i = 0; i < n; ++i) alpha[set[i]] = w[i];
      return;
    }
  }
}

}  // namespace detail

struct MergeResult {
  Vector h;
  Vector c;      // empty unless cell states were given
  Vector alpha;  // in merge-set order
};

// Merges arc states (rows of `states`, in the order of `posteriors`). Cell
// states, when present, use the same weights. Arc order only matters for
// max-merge ties, which go to the first arc.
inline MergeResult merge_states(const PropagationConfig& cfg,
                                const std::vector<Vector>& states,
                                std::span<const double> posteriors,
                                std::span<const double> w_a, double b_a,
                                const std::vector<Vector>& cell_states = {}) {
  if (states.empty()) throw Error(ErrorCode::kEmptyMergeSet, "no incoming arc states");
  const std::size_t n = states.size(), hidden = states[0].size();
  if (posteriors.size() != n) throw Error(ErrorCode::kLengthMismatch, "posteriors per arc");
  if (cfg.merge == MergeMethod::kAttention && w_a.size() != hidden + 3)
    throw Error(ErrorCode::kShapeMismatch, "attention vector must have d_h + 3 entries");
  Vector flat(n * hidden);
  for (std::size_t i = 0; i < n; ++i) {
    if (states[i].size() != hidden) throw Error(ErrorCode::kShapeMismatch, "arc state sizes");
    std::copy(states[i].begin(), states[i].end(), flat.begin() + i * hidden);
  }
  std::vector<ArcId> set(n);
  for (std::size_t i = 0; i < n; ++i) set[i] = i;
  Vector alpha(n), z(n);
  detail::merge_weights(cfg, set, flat.data(), hidden, posteriors, w_a, b_a, alpha.data(),
                        z.data());
  MergeResult out{Vector(hidden, 0.0), {}, alpha};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < hidden; ++j) out.h[j] += alpha[i] * states[i][j];
  if (!cell_states.empty()) {
    out.c.assign(hidden, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < hidden; ++j) out.c[j] += alpha[i] * cell_states[i][j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Directional propagation

inline void check_inputs(const DirectedGraph& g, std::span<const double> features,
                         std::span<const double> posteriors, const ModelParams& params) {
  if (features.size() != g.arc_count * params.dims().input)
    throw Error(ErrorCode::kFeatureLayoutMismatch,
                "expected " + std::to_string(params.dims().input) + " features per arc");
  if (posteriors.size() != g.arc_count)
    throw Error(ErrorCode::kLengthMismatch, "one posterior per arc required");
}

inline DirectionState run_direction(const DirectedGraph& g, std::span<const double> features,
                                    std::span<const double> posteriors,
                                    const ModelParams& params, Direction dir,
                                    const PropagationConfig& cfg) {
  check_inputs(g, features, posteriors, params);
  const ModelDims& dims = params.dims();
  const std::size_t H = dims.hidden, X = dims.input;
  const bool gated = dims.cell == CellType::kGated;
  DirectionState s;
  s.hidden = H;
  s.cell = dims.cell;
  s.node_h.assign(g.node_count * H, 0.0);
  s.node_c.assign(g.node_count * H, 0.0);
  s.arc_h.assign(g.arc_count * H, 0.0);
  s.arc_c.assign(g.arc_count * H, 0.0);
  if (gated) {
    s.gates.assign(g.arc_count * 4 * H, 0.0);
    s.tanh_c.assign(g.arc_count * H, 0.0);
  }
  s.alpha.assign(g.arc_count, 0.0);
  s.attention_z.assign(g.arc_count, 0.0);

  const CellWeights w = params.cell(dir);
  const auto w_a = params.attention_w(dir);
  const double b_a = params.attention_b(dir);
  const auto h0 = params.h0(dir);

  for (NodeId n : g.order) {
    double* nh = s.node_h.data() + n * H;
    double* nc = s.node_c.data() + n * H;
    if (n == g.initial) {
      std::copy(h0.begin(), h0.end(), nh);
    } else {
      const auto& set = g.incoming[n];
      if (set.empty())
        throw Error(ErrorCode::kEmptyMergeSet, "node " + std::to_string(n) +
                                                   " has no incoming arcs");
      detail::merge_weights(cfg, set, s.arc_h.data(), H, posteriors, w_a, b_a,
                            s.alpha.data(), s.attention_z.data());
      for (ArcId a : set) {
        const double al = s.alpha[a];
        const double* ah = s.arc_h.data() + a * H;
        const double* ac = s.arc_c.data() + a * H;
        for (std::size_t j = 0; j < H; ++j) nh[j] += al * ah[j];
        if (gated)
          for (std::size_t j = 0; j < H; ++j) nc[j] += al * ac[j];
      }
    }
    for (ArcId a : g.outgoing[n]) {
      CellCache cache{{s.arc_h.data() + a * H, H},
                      {s.arc_c.data() + a * H, H},
                      gated ? std::span<double>(s.gates.data() + a * 4 * H, 4 * H)
                            : std::span<double>{},
                      gated ? std::span<double>(s.tanh_c.data() + a * H, H)
                            : std::span<double>{}};
      cell_forward(w, nh, nc, features.data() + a * X, cache);
    }
  }
  return s;
}

// Accumulates into `grad` and consumes `d_arc_h` (arc_count x H gradient of
// the loss with respect to this direction's arc states).
inline void run_direction_backward(const DirectedGraph& g, std::span<const double> features,
                                   std::span<const double> posteriors,
                                   const ModelParams& params, Direction dir,
                                   const PropagationConfig& cfg, const DirectionState& s,
                                   Vector& d_arc_h, Gradient& grad) {
  const ModelDims& dims = params.dims();
  const std::size_t H = dims.hidden, X = dims.input;
  const bool gated = dims.cell == CellType::kGated;
  Vector d_arc_c(gated ? g.arc_count * H : 0, 0.0);
  Vector d_node_h(H), d_node_c(H), scratch(dims.gates() * H), d_alpha, dz;

  const CellWeights w = params.cell(dir);
  const CellGradients gw = grad.cell_gradients(dir);
  const auto w_a = params.attention_w(dir);
  auto dw_a = grad.attention_w(dir);
  double& db_a = grad.attention_b(dir);
  auto dh0 = grad.h0(dir);

  for (auto it = g.order.rbegin(); it != g.order.rend(); ++it) {
    const NodeId n = *it;
    const double* nh = s.node_h.data() + n * H;
    const double* nc = s.node_c.data() + n * H;
    std::fill(d_node_h.begin(), d_node_h.end(), 0.0);
    std::fill(d_node_c.begin(), d_node_c.end(), 0.0);
    for (ArcId a : g.outgoing[n]) {
      CellCache cache{{const_cast<double*>(s.arc_h.data()) + a * H, H},
                      {const_cast<double*>(s.arc_c.data()) + a * H, H},
                      gated ? std::span<double>(const_cast<double*>(s.gates.data()) + a * 4 * H, 4 * H)
                            : std::span<double>{},
                      gated ? std::span<double>(const_cast<double*>(s.tanh_c.data()) + a * H, H)
                            : std::span<double>{}};
      cell_backward(w, nh, nc, features.data() + a * X, cache, d_arc_h.data() + a * H,
                    gated ? d_arc_c.data() + a * H : nullptr, gw, d_node_h.data(),
                    gated ? d_node_c.data() : nullptr, scratch.data());
    }
    if (n == g.initial) {
      for (std::size_t j = 0; j < H; ++j) dh0[j] += d_node_h[j];
      continue;
    }
    const auto& set = g.incoming[n];
    for (ArcId a : set) {
      const double al = s.alpha[a];
      double* dah = d_arc_h.data() + a * H;
      for (std::size_t j = 0; j < H; ++j) dah[j] += al * d_node_h[j];
      if (gated) {
        double* dac = d_arc_c.data() + a * H;
        for (std::size_t j = 0; j < H; ++j) dac[j] += al * d_node_c[j];
      }
    }
    if (cfg.merge != MergeMethod::kAttention || set.size() < 2) continue;

    // Through the softmax weights into the attention parameters and keys.
    const MergeStats stats = merge_stats(set, posteriors);
    d_alpha.assign(set.size(), 0.0);
    Vector alpha(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
      const ArcId a = set[i];
      alpha[i] = s.alpha[a];
      d_alpha[i] = kernel::dot(d_node_h.data(), s.arc_h.data() + a * H, H);
      if (gated) d_alpha[i] += kernel::dot(d_node_c.data(), s.arc_c.data() + a * H, H);
    }
    dz = softmax_backward(alpha, d_alpha);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const ArcId a = set[i];
      const double ds = dz[i] * activate_derivative(cfg.activation, s.attention_z[a]);
      const double* ah = s.arc_h.data() + a * H;
      double* dah = d_arc_h.data() + a * H;
      for (std::size_t j = 0; j < H; ++j) {
        dw_a[j] += ds * ah[j];
        dah[j] += ds * w_a[j];
      }
      dw_a[H] += ds * posteriors[a];
      dw_a[H + 1] += ds * stats.mean;
      dw_a[H + 2] += ds * stats.stddev;
      db_a += ds;
    }
  }
}

// Public single-direction entry points on a lattice.
inline DirectionState forward_graph(const Lattice& lattice, std::span<const double> features,
                                    std::span<const double> posteriors,
                                    const ModelParams& params, const PropagationConfig& cfg) {
  return run_direction(directed_view(lattice), features, posteriors, params,
                       Direction::kForward, cfg);
}

inline DirectionState backward_graph(const Lattice& lattice, std::span<const double> features,
                                     std::span<const double> posteriors,
                                     const ModelParams& params, const PropagationConfig& cfg) {
  return run_direction(directed_view(reverse(lattice)), features, posteriors, params,
                       Direction::kBackward, cfg);
}

// ---------------------------------------------------------------------------
// Confidence head and loss

struct HeadState {
  Vector hidden;      // arc_count x d_f (empty when d_f = 0)
  Vector logit;       // arc_count
  Vector confidence;  // arc_count
};

inline HeadState arc_confidences(const DirectionState& fwd, const DirectionState& bwd,
                                 const ModelParams& params) {
  const ModelDims& dims = params.dims();
  const std::size_t H = dims.hidden, F = dims.ff;
  const std::size_t arcs = H ? fwd.arc_h.size() / H : 0;
  HeadState out;
  out.logit.resize(arcs);
  out.confidence.resize(arcs);
  if (F > 0) out.hidden.assign(arcs * F, 0.0);
  Vector ctx(2 * H);
  for (std::size_t a = 0; a < arcs; ++a) {
    std::copy_n(fwd.arc_h.data() + a * H, H, ctx.data());
    std::copy_n(bwd.arc_h.data() + a * H, H, ctx.data() + H);
    double logit = params.out_b();
    if (F > 0) {
      double* u = out.hidden.data() + a * F;
      std::copy(params.ff_b().begin(), params.ff_b().end(), u);
      kernel::gemv_acc(params.ff_w(), ctx.data(), u);
      for (std::size_t k = 0; k < F; ++k) u[k] = std::tanh(u[k]);
      logit += kernel::dot(params.out_w().data(), u, F);
    } else {
      logit += kernel::dot(params.out_w().data(), ctx.data(), 2 * H);
    }
    out.logit[a] = logit;
    out.confidence[a] = logistic(logit);
  }
  return out;
}

// H = -(1/T) sum [t ln c + (1 - t) ln(1 - c)]
inline double bce_loss(std::span<const double> confidences, std::span<const double> targets) {
  if (confidences.size() != targets.size() || confidences.empty())
    throw Error(ErrorCode::kLengthMismatch, "bce_loss needs equal, non-empty inputs");
  double sum = 0.0;
  for (std::size_t i = 0; i < confidences.size(); ++i)
    sum += targets[i] * std::log(confidences[i]) +
           (1.0 - targets[i]) * std::log(1.0 - confidences[i]);
  return -sum / static_cast<double>(confidences.size());
}

// Same loss from logits, stable for saturated outputs.
inline double bce_from_logits(std::span<const double> logits, std::span<const double> targets) {
  if (logits.size() != targets.size() || logits.empty())
    throw Error(ErrorCode::kLengthMismatch, "bce needs equal, non-empty inputs");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i)
    sum += targets[i] * softplus(-logits[i]) + (1.0 - targets[i]) * softplus(logits[i]);
  return sum / static_cast<double>(logits.size());
}

// ---------------------------------------------------------------------------
// Prepared utterances

// A graph with both directional views, per-arc features and posteriors.
// `report_ids` maps local arc ids to the ids written to score/target files
// (they differ for 1-best sequences, which keep their CN arc ids).
struct GraphInput {
  std::string utterance_id;
  DirectedGraph forward;
  DirectedGraph backward;
  Vector features;    // arc_count x d_x
  Vector posteriors;  // raw arc posteriors
  std::vector<ArcId> report_ids;

  std::size_t arc_count() const { return posteriors.size(); }
};

inline GraphInput prepare_graph(const Lattice& lattice, Vector features,
                                std::vector<ArcId> report_ids = {}) {
  GraphInput in;
  in.utterance_id = lattice.utterance_id;
  in.forward = directed_view(lattice);
  in.backward = directed_view(reverse(lattice));
  in.features = std::move(features);
  in.posteriors.reserve(lattice.arcs.size());
  for (const Arc& a : lattice.arcs) in.posteriors.push_back(a.posterior);
  if (report_ids.empty()) {
    report_ids.resize(lattice.arcs.size());
    for (ArcId a = 0; a < report_ids.size(); ++a) report_ids[a] = a;
  }
  in.report_ids = std::move(report_ids);
  return in;
}

inline GraphInput prepare_lattice(const Lattice& lattice, const CalibrationMapping& mapping,
                                  const EmbeddingTable& table, const FeatureLayout& layout) {
  Vector features;
  features.reserve(lattice.arcs.size() * layout.size());
  for (const Arc& a : lattice.arcs) {
    const Vector x = extract_features(lattice, a.id, mapping, table, layout);
    features.insert(features.end(), x.begin(), x.end());
  }
  return prepare_graph(lattice, std::move(features));
}

inline GraphInput prepare_cn(const ConfusionNetwork& cn, const CalibrationMapping& mapping,
                             const EmbeddingTable& table, const FeatureLayout& layout) {
  Vector features;
  features.reserve(cn.arc_count() * layout.size());
  for (std::size_t t = 0; t < cn.bins.size(); ++t)
    for (std::size_t e = 0; e < cn.bins[t].entries.size(); ++e) {
      const Vector x = extract_features(cn, t, e, mapping, table, layout);
      features.insert(features.end(), x.begin(), x.end());
    }
  return prepare_graph(cn_to_lattice(cn), std::move(features));
}

// Single-arc-per-bin confusion network holding the non-null 1-best path.
inline ConfusionNetwork one_best_network(const ConfusionNetwork& cn,
                                         std::vector<ArcId>* cn_arc_ids = nullptr) {
  ConfusionNetwork seq;
  seq.utterance_id = cn.utterance_id;
  for (const auto& e : one_best(cn)) {
    if (e.is_null) continue;
    const Bin& src = cn.bins[e.bin];
    seq.bins.push_back({src.start_time, src.end_time, {{e.word, e.posterior}}});
    if (cn_arc_ids) cn_arc_ids->push_back(e.arc_id);
  }
  return seq;
}

// Returns an input with zero arcs when the 1-best path is entirely null.
inline GraphInput prepare_one_best(const ConfusionNetwork& cn, const CalibrationMapping& mapping,
                                   const EmbeddingTable& table, const FeatureLayout& layout) {
  std::vector<ArcId> ids;
  const ConfusionNetwork seq = one_best_network(cn, &ids);
  if (seq.bins.empty()) {
    GraphInput empty;
    empty.utterance_id = cn.utterance_id;
    return empty;
  }
  GraphInput in = prepare_cn(seq, mapping, table, layout);
  in.report_ids = std::move(ids);
  return in;
}

// ---------------------------------------------------------------------------
// Full model evaluation

struct ForwardResult {
  PropagationState state;
  HeadState head;
};

inline ForwardResult evaluate_graph(const GraphInput& in, const ModelParams& params,
                                    const PropagationConfig& cfg) {
  ForwardResult r;
  r.state.forward = run_direction(in.forward, in.features, in.posteriors, params,
                                  Direction::kForward, cfg);
  r.state.backward = run_direction(in.backward, in.features, in.posteriors, params,
                                   Direction::kBackward, cfg);
  r.head = arc_confidences(r.state.forward, r.state.backward, params);
  return r;
}

inline Vector confidences(const GraphInput& in, const ModelParams& params,
                          const PropagationConfig& cfg) {
  if (in.arc_count() == 0) return {};
  return evaluate_graph(in, params, cfg).head.confidence;
}

inline double graph_loss(const GraphInput& in, std::span<const double> targets,
                         const ModelParams& params, const PropagationConfig& cfg) {
  const auto r = evaluate_graph(in, params, cfg);
  return bce_from_logits(r.head.logit, targets);
}

// Loss of one utterance; its exact gradient is added into `grad`.
inline double accumulate_gradient(const GraphInput& in, std::span<const double> targets,
                                  const ModelParams& params, const PropagationConfig& cfg,
                                  Gradient& grad) {
  if (targets.size() != in.arc_count())
    throw Error(ErrorCode::kLengthMismatch, "one target per arc required");
  if (!grad.congruent(params))
    throw Error(ErrorCode::kShapeMismatch, "gradient is not congruent with parameters");
  const ForwardResult r = evaluate_graph(in, params, cfg);
  const ModelDims& dims = params.dims();
  const std::size_t H = dims.hidden, F = dims.ff, A = in.arc_count();
  const double inv_t = 1.0 / static_cast<double>(A);

  Vector d_fwd(A * H, 0.0), d_bwd(A * H, 0.0), ctx(2 * H), dctx(2 * H), du(F);
  auto d_out_w = grad.out_w();
  for (std::size_t a = 0; a < A; ++a) {
    const double dlogit = (r.head.confidence[a] - targets[a]) * inv_t;
    grad.out_b() += dlogit;
    std::fill(dctx.begin(), dctx.end(), 0.0);
    if (F > 0) {
      const double* u = r.head.hidden.data() + a * F;
      for (std::size_t k = 0; k < F; ++k) {
        d_out_w[k] += dlogit * u[k];
        du[k] = dlogit * params.out_w()[k] * (1.0 - u[k] * u[k]);
      }
      std::copy_n(r.state.forward.arc_h.data() + a * H, H, ctx.data());
      std::copy_n(r.state.backward.arc_h.data() + a * H, H, ctx.data() + H);
      for (std::size_t k = 0; k < F; ++k) grad.ff_b()[k] += du[k];
      kernel::outer_acc(grad.ff_w(), du.data(), ctx.data());
      kernel::gemv_t_acc(params.ff_w(), du.data(), dctx.data());
    } else {
      for (std::size_t j = 0; j < H; ++j) {
        d_out_w[j] += dlogit * r.state.forward.arc_h[a * H + j];
        d_out_w[H + j] += dlogit * r.state.backward.arc_h[a * H + j];
      }
      for (std::size_t j = 0; j < 2 * H; ++j) dctx[j] = dlogit * params.out_w()[j];
    }
    std::copy_n(dctx.data(), H, d_fwd.data() + a * H);
    std::copy_n(dctx.data() + H, H, d_bwd.data() + a * H);
  }
  run_direction_backward(in.forward, in.features, in.posteriors, params, Direction::kForward,
                         cfg, r.state.forward, d_fwd, grad);
  run_direction_backward(in.backward, in.features, in.posteriors, params,
                         Direction::kBackward, cfg, r.state.backward, d_bwd, grad);
  return bce_from_logits(r.head.logit, targets);
}

inline std::pair<double, Gradient> loss_and_gradient(const GraphInput& in,
                                                     std::span<const double> targets,
                                                     const ModelParams& params,
                                                     const PropagationConfig& cfg) {
  Gradient grad(params.dims());
  const double loss = accumulate_gradient(in, targets, params, cfg, grad);
  return {loss, std::move(grad)};
}

inline std::pair<double, Gradient> loss_and_gradient(const Lattice& lattice,
                                                     std::span<const double> features,
                                                     std::span<const double> targets,
                                                     const ModelParams& params,
                                                     const PropagationConfig& cfg) {
  const GraphInput in = prepare_graph(lattice, Vector(features.begin(), features.end()));
  return loss_and_gradient(in, targets, params, cfg);
}

// Central differences at eps = 1e-5 on a loss of order 1 carry roughly
// 1e-11 of rounding noise. Full-model gradients routinely contain entries
// far below that scale (cancelling contributions from different arcs), so
// the relative-error denominator is floored at 1e-6 here.
inline constexpr double kModelGradCheckFloor = 1e-6;

// Finite-difference check of accumulate_gradient on one input, over all
// parameters or a seeded sample of `coords` of them.
inline GradCheckResult check_gradient(const GraphInput& in, std::span<const double> targets,
                                      const ModelParams& params, const PropagationConfig& cfg,
                                      double eps = 1e-5, std::size_t coords = 400,
                                      std::uint64_t seed = 0,
                                      double floor = kModelGradCheckFloor) {
  const auto [loss, grad] = loss_and_gradient(in, targets, params, cfg);
  (void)loss;
  ModelParams probe = params;
  auto loss_at = [&](std::span<const double> point) {
    probe.set_flat(point);
    return graph_loss(in, targets, probe, cfg);
  };
  return grad_check(loss_at, params.flat(), grad.flat(), eps, coords, seed, floor);
}

// ---------------------------------------------------------------------------
// Plain sequence BiRNN
//
// The classic left-to-right / right-to-left recursion over a feature
// sequence, written without any graph machinery. A confusion network with
// one arc per bin must produce exactly these confidences.

inline Vector birnn_sequence(std::span<const double> features, std::size_t length,
                             const ModelParams& params) {
  const ModelDims& dims = params.dims();
  const std::size_t H = dims.hidden, X = dims.input, F = dims.ff;
  if (features.size() != length * X)
    throw Error(ErrorCode::kFeatureLayoutMismatch, "sequence features");
  const bool gated = dims.cell == CellType::kGated;
  std::vector<Vector> fwd(length, Vector(H)), bwd(length, Vector(H));
  for (int pass = 0; pass < 2; ++pass) {
    const Direction dir = pass == 0 ? Direction::kForward : Direction::kBackward;
    const CellWeights w = params.cell(dir);
    Vector h(params.h0(dir).begin(), params.h0(dir).end()), c(H, 0.0);
    Vector next_c(H), gates(gated ? 4 * H : 0), tanh_c(gated ? H : 0);
    for (std::size_t step = 0; step < length; ++step) {
      const std::size_t t = pass == 0 ? step : length - 1 - step;
      Vector& out = pass == 0 ? fwd[t] : bwd[t];
      cell_forward(w, h.data(), c.data(), features.data() + t * X,
                   {out, next_c, gates, tanh_c});
      h = out;
      c = next_c;
    }
  }
  Vector conf(length);
  for (std::size_t t = 0; t < length; ++t) {
    Vector ctx = fwd[t];
    ctx.insert(ctx.end(), bwd[t].begin(), bwd[t].end());
    double logit = params.out_b();
    if (F > 0) {
      for (std::size_t k = 0; k < F; ++k) {
        double u = params.ff_b()[k];
        for (std::size_t j = 0; j < 2 * H; ++j) u += params.ff_w()(k, j) * ctx[j];
        logit += params.out_w()[k] * std::tanh(u);
      }
    } else {
      for (std::size_t j = 0; j < 2 * H; ++j) logit += params.out_w()[j] * ctx[j];
    }
    conf[t] = logistic(logit);
  }
  return conf;
}

// ---------------------------------------------------------------------------
// Prediction

struct Model {
  ModelParams params;
  ModelMetadata meta;
  EmbeddingTable embeddings;

  PropagationConfig propagation() const { return {meta.merge, meta.activation}; }
};

inline void check_layout(const Model& model) {
  if (model.params.dims().input != model.meta.features.size() ||
      model.embeddings.dim != model.meta.features.embed_dim)
    throw Error(ErrorCode::kFeatureLayoutMismatch,
                "model expects " + std::to_string(model.params.dims().input) +
                    " inputs; layout gives " + std::to_string(model.meta.features.size()) +
                    " with embedding dimension " + std::to_string(model.embeddings.dim));
}

inline std::vector<ScoreRecord> predict(const GraphInput& in, const Model& model) {
  std::vector<ScoreRecord> out;
  const Vector c = confidences(in, model.params, model.propagation());
  for (std::size_t a = 0; a < c.size(); ++a)
    out.push_back({in.utterance_id, in.report_ids[a], c[a]});
  return out;
}

inline std::vector<ScoreRecord> predict(const Lattice& lattice, const Model& model) {
  check_layout(model);
  return predict(prepare_lattice(lattice, model.meta.mapping, model.embeddings,
                                 model.meta.features),
                 model);
}

inline std::vector<ScoreRecord> predict(const ConfusionNetwork& cn, const Model& model) {
  check_layout(model);
  return predict(prepare_cn(cn, model.meta.mapping, model.embeddings, model.meta.features),
                 model);
}

// A bare word sequence with per-word posteriors and durations, run as a
// single-arc-per-bin confusion network.
inline std::vector<ScoreRecord> predict_sequence(const std::string& utterance_id,
                                                 std::span<const std::string> words,
                                                 std::span<const double> posteriors,
                                                 std::span<const double> durations,
                                                 const Model& model) {
  if (words.size() != posteriors.size() || words.size() != durations.size())
    throw Error(ErrorCode::kLengthMismatch, "sequence fields differ in length");
  ConfusionNetwork cn;
  cn.utterance_id = utterance_id;
  double t = 0.0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    cn.bins.push_back({t, t + durations[i], {{words[i], posteriors[i]}}});
    t += durations[i];
  }
  if (cn.bins.empty()) return {};
  return predict(cn, model);
}

}  // namespace latconf
