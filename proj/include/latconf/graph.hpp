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

// In-memory lattices and confusion networks.
//
// A Lattice is a DAG of timed nodes joined by word-bearing arcs. A
// ConfusionNetwork is stored natively as a list of bins and converted to a
// linear-chain Lattice (one node per bin boundary, one parallel arc per bin
// entry) whenever it has to be propagated, so a single propagation engine
// serves sequences, confusion networks and lattices.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "latconf/error.hpp"

namespace latconf {

using NodeId = std::size_t;
using ArcId = std::size_t;

// Reserved token for the empty hypothesis.
inline constexpr std::string_view kNullWord = "!NULL";

inline bool is_null_word(std::string_view word) {
  return word.empty() || word == kNullWord;
}

struct Node {
  NodeId id = 0;
  double time = 0.0;  // seconds

  bool operator==(const Node&) const = default;
};

struct Arc {
  ArcId id = 0;
  NodeId start = 0;
  NodeId end = 0;
  std::string word;
  double start_time = 0.0;
  double end_time = 0.0;
  double posterior = 0.0;
  double am_score = 0.0;
  double lm_score = 0.0;

  double duration() const { return end_time - start_time; }
  bool operator==(const Arc&) const = default;
};

struct Lattice {
  std::string utterance_id;
  std::vector<Node> nodes;
  std::vector<Arc> arcs;
  NodeId initial = 0;
  NodeId final = 0;
  // Header keys that the SLF reader does not interpret, kept verbatim.
  std::map<std::string, std::string> metadata;

  std::size_t node_count() const { return nodes.size(); }
  std::size_t arc_count() const { return arcs.size(); }
  bool operator==(const Lattice&) const = default;
};

struct CnEntry {
  std::string word;
  double posterior = 0.0;

  bool operator==(const CnEntry&) const = default;
};

struct Bin {
  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<CnEntry> entries;

  bool operator==(const Bin&) const = default;
};

struct ConfusionNetwork {
  std::string utterance_id;
  std::vector<Bin> bins;

  std::size_t arc_count() const {
    std::size_t n = 0;
    for (const auto& bin : bins) n += bin.entries.size();
    return n;
  }
  bool operator==(const ConfusionNetwork&) const = default;
};

inline constexpr double kDefaultBinTolerance = 0.05;

// ---------------------------------------------------------------------------
// Validation

enum class Rule {
  kNonContiguousId,
  kUndefinedNode,
  kNegativeTime,
  kTimeOrderViolation,
  kArcTimeMismatch,
  kPosteriorOutOfRange,
  kCycleDetected,
  kInitialHasIncoming,
  kFinalHasOutgoing,
  kMultipleSources,
  kMultipleSinks,
  kNotOnPath,
  // confusion networks
  kEmptyBin,
  kBinOrder,
  kBinPosteriorSum,
};

inline std::string_view rule_name(Rule rule) {
  switch (rule) {
    case Rule::kNonContiguousId: return "NonContiguousId";
    case Rule::kUndefinedNode: return "UndefinedNode";
    case Rule::kNegativeTime: return "NegativeTime";
    case Rule::kTimeOrderViolation: return "TimeOrderViolation";
    case Rule::kArcTimeMismatch: return "ArcTimeMismatch";
    case Rule::kPosteriorOutOfRange: return "PosteriorOutOfRange";
    case Rule::kCycleDetected: return "CycleDetected";
    case Rule::kInitialHasIncoming: return "InitialHasIncoming";
    case Rule::kFinalHasOutgoing: return "FinalHasOutgoing";
    case Rule::kMultipleSources: return "MultipleSources";
    case Rule::kMultipleSinks: return "MultipleSinks";
    case Rule::kNotOnPath: return "NotOnPath";
    case Rule::kEmptyBin: return "EmptyBin";
    case Rule::kBinOrder: return "BinOrder";
    case Rule::kBinPosteriorSum: return "BinPosteriorSum";
  }
  return "Unknown";
}

// `id` is the offending node, arc or bin id; for kCycleDetected it is a node
// on the cycle.
struct Violation {
  Rule rule;
  std::size_t id = 0;

  bool operator==(const Violation&) const = default;
};

namespace detail {

struct Adjacency {
  std::vector<std::vector<ArcId>> in;
  std::vector<std::vector<ArcId>> out;
};

inline Adjacency adjacency(const Lattice& lattice) {
  Adjacency adj;
  adj.in.resize(lattice.nodes.size());
  adj.out.resize(lattice.nodes.size());
  for (const auto& arc : lattice.arcs) {
    adj.out[arc.start].push_back(arc.id);
    adj.in[arc.end].push_back(arc.id);
  }
  return adj;
}

// Kahn's algorithm with a (time, id) min-heap. Returns fewer than
// node_count() entries when the graph has a cycle.
inline std::vector<NodeId> kahn_order(const Lattice& lattice,
                                      const Adjacency& adj) {
  using Key = std::pair<double, NodeId>;
  std::priority_queue<Key, std::vector<Key>, std::greater<>> ready;
  std::vector<std::size_t> pending(lattice.nodes.size());
  for (NodeId n = 0; n < lattice.nodes.size(); ++n) {
    pending[n] = adj.in[n].size();
    if (pending[n] == 0) ready.emplace(lattice.nodes[n].time, n);
  }
  std::vector<NodeId> order;
  order.reserve(lattice.nodes.size());
  while (!ready.empty()) {
    const NodeId n = ready.top().second;
    ready.pop();
    order.push_back(n);
    for (ArcId a : adj.out[n]) {
      const NodeId v = lattice.arcs[a].end;
      if (--pending[v] == 0) ready.emplace(lattice.nodes[v].time, v);
    }
  }
  return order;
}

}  // namespace detail

inline std::vector<Violation> validate(const Lattice& lattice) {
  std::vector<Violation> out;
  const std::size_t n_nodes = lattice.nodes.size();
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (lattice.nodes[i].id != i) out.push_back({Rule::kNonContiguousId, i});
    if (!(lattice.nodes[i].time >= 0.0)) out.push_back({Rule::kNegativeTime, i});
  }
  bool dangling = false;
  for (std::size_t i = 0; i < lattice.arcs.size(); ++i) {
    const Arc& arc = lattice.arcs[i];
    if (arc.id != i) out.push_back({Rule::kNonContiguousId, i});
    if (arc.start >= n_nodes || arc.end >= n_nodes) {
      out.push_back({Rule::kUndefinedNode, i});
      dangling = true;
    }
  }
  if (n_nodes == 0 || lattice.initial >= n_nodes || lattice.final >= n_nodes) {
    out.push_back({Rule::kUndefinedNode, n_nodes == 0 ? 0 : lattice.initial});
    return out;
  }
  if (dangling || !out.empty()) return out;

  for (const Arc& arc : lattice.arcs) {
    const double tu = lattice.nodes[arc.start].time;
    const double tv = lattice.nodes[arc.end].time;
    if (tu > tv) out.push_back({Rule::kTimeOrderViolation, arc.id});
    if (arc.start_time != tu || arc.end_time != tv)
      out.push_back({Rule::kArcTimeMismatch, arc.id});
    if (!(arc.posterior >= 0.0 && arc.posterior <= 1.0))
      out.push_back({Rule::kPosteriorOutOfRange, arc.id});
  }

  const auto adj = detail::adjacency(lattice);
  const auto order = detail::kahn_order(lattice, adj);
  if (order.size() != n_nodes) {
    std::vector<bool> placed(n_nodes, false);
    for (NodeId n : order) placed[n] = true;
    NodeId witness = 0;
    while (placed[witness]) ++witness;
    out.push_back({Rule::kCycleDetected, witness});
    return out;
  }

  if (!adj.in[lattice.initial].empty())
    out.push_back({Rule::kInitialHasIncoming, lattice.initial});
  if (!adj.out[lattice.final].empty())
    out.push_back({Rule::kFinalHasOutgoing, lattice.final});
  for (NodeId n = 0; n < n_nodes; ++n) {
    if (n != lattice.initial && adj.in[n].empty())
      out.push_back({Rule::kMultipleSources, n});
    if (n != lattice.final && adj.out[n].empty())
      out.push_back({Rule::kMultipleSinks, n});
  }

  // Every node must be reachable from initial and co-reachable to final.
  std::vector<bool> fwd(n_nodes, false), bwd(n_nodes, false);
  fwd[lattice.initial] = true;
  for (NodeId n : order) {
    if (!fwd[n]) continue;
    for (ArcId a : adj.out[n]) fwd[lattice.arcs[a].end] = true;
  }
  bwd[lattice.final] = true;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (ArcId a : adj.out[*it])
      if (bwd[lattice.arcs[a].end]) bwd[*it] = true;
  }
  for (NodeId n = 0; n < n_nodes; ++n)
    if (!fwd[n] || !bwd[n]) out.push_back({Rule::kNotOnPath, n});
  return out;
}

inline std::vector<Violation> validate(const ConfusionNetwork& cn,
                                       double bin_tolerance = kDefaultBinTolerance) {
  std::vector<Violation> out;
  for (std::size_t t = 0; t < cn.bins.size(); ++t) {
    const Bin& bin = cn.bins[t];
    if (bin.entries.empty()) out.push_back({Rule::kEmptyBin, t});
    if (bin.start_time < 0.0 || bin.end_time < bin.start_time ||
        (t > 0 && bin.start_time < cn.bins[t - 1].start_time))
      out.push_back({Rule::kBinOrder, t});
    double sum = 0.0;
    for (const auto& e : bin.entries) {
      if (!(e.posterior >= 0.0 && e.posterior <= 1.0))
        out.push_back({Rule::kPosteriorOutOfRange, t});
      sum += e.posterior;
    }
    if (!bin.entries.empty() && std::abs(sum - 1.0) > bin_tolerance)
      out.push_back({Rule::kBinPosteriorSum, t});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structural operations

// Ties are broken by ascending (time, NodeId), so the order is reproducible.
inline std::vector<NodeId> topological_order(const Lattice& lattice) {
  auto order = detail::kahn_order(lattice, detail::adjacency(lattice));
  if (order.size() != lattice.nodes.size())
    throw Error(ErrorCode::kCycle,
                "lattice '" + lattice.utterance_id + "' contains a cycle");
  return order;
}

// Flips every arc and swaps initial/final. Node times and arc payloads
// (including start_time/end_time) are left untouched, so reversing twice
// gives back the original lattice.
inline Lattice reverse(const Lattice& lattice) {
  Lattice out = lattice;
  for (auto& arc : out.arcs) std::swap(arc.start, arc.end);
  std::swap(out.initial, out.final);
  return out;
}

// Bin t spans nodes t -> t+1. Node t sits at the start of bin t; the last
// node sits at the end of the last bin.
inline Lattice cn_to_lattice(const ConfusionNetwork& cn) {
  if (cn.bins.empty())
    throw Error(ErrorCode::kEmptyCN, "confusion network '" + cn.utterance_id +
                                         "' has no bins");
  Lattice lat;
  lat.utterance_id = cn.utterance_id;
  const std::size_t n_bins = cn.bins.size();
  lat.nodes.reserve(n_bins + 1);
  for (std::size_t t = 0; t < n_bins; ++t)
    lat.nodes.push_back({t, cn.bins[t].start_time});
  lat.nodes.push_back({n_bins, cn.bins.back().end_time});
  lat.arcs.reserve(cn.arc_count());
  for (std::size_t t = 0; t < n_bins; ++t) {
    for (const auto& e : cn.bins[t].entries) {
      Arc arc;
      arc.id = lat.arcs.size();
      arc.start = t;
      arc.end = t + 1;
      arc.word = is_null_word(e.word) ? std::string(kNullWord) : e.word;
      arc.start_time = lat.nodes[t].time;
      arc.end_time = lat.nodes[t + 1].time;
      arc.posterior = e.posterior;
      lat.arcs.push_back(std::move(arc));
    }
  }
  lat.initial = 0;
  lat.final = n_bins;
  return lat;
}

// Arc id that cn_to_lattice assigns to entry `entry` of bin `bin`.
inline std::vector<ArcId> cn_bin_offsets(const ConfusionNetwork& cn) {
  std::vector<ArcId> offsets(cn.bins.size() + 1, 0);
  for (std::size_t t = 0; t < cn.bins.size(); ++t)
    offsets[t + 1] = offsets[t] + cn.bins[t].entries.size();
  return offsets;
}

struct OneBestEntry {
  std::size_t bin = 0;
  std::size_t entry = 0;
  ArcId arc_id = 0;
  std::string word;
  double posterior = 0.0;
  bool is_null = false;
};

// Maximum-posterior entry per bin; ties go to the first entry. Null
// selections are kept and flagged.
inline std::vector<OneBestEntry> one_best(const ConfusionNetwork& cn) {
  std::vector<OneBestEntry> out;
  out.reserve(cn.bins.size());
  ArcId offset = 0;
  for (std::size_t t = 0; t < cn.bins.size(); ++t) {
    const auto& entries = cn.bins[t].entries;
    if (entries.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].posterior > entries[best].posterior) best = i;
    out.push_back({t, best, offset + best, entries[best].word,
                   entries[best].posterior, is_null_word(entries[best].word)});
    offset += entries.size();
  }
  return out;
}

// Word view of the 1-best path with nulls removed.
inline std::vector<std::string> one_best_words(const ConfusionNetwork& cn) {
  std::vector<std::string> words;
  for (auto& e : one_best(cn))
    if (!e.is_null) words.push_back(std::move(e.word));
  return words;
}

}  // namespace latconf
