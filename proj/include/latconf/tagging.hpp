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

// Reference confidence targets.
//
//  * 1-best sequences: unit-cost Levenshtein alignment against the reference.
//  * Confusion networks: monotone alignment of reference words to bins with
//    soft cost 1 - P_t(word); a bin may be skipped at cost 1 - P_t(!NULL) and
//    a reference word at cost 1.
//  * Lattices: an arc is correct when a same-word reference word overlaps it
//    by at least a global threshold.
//
// All three break cost ties the same way: walk the suffix cost table from
// the start and take the most preferred move that stays on an optimal path.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/graph.hpp"

namespace latconf {

// ---------------------------------------------------------------------------
// Levenshtein alignment of 1-best sequences

// Preference order among equal-cost alignments.
enum class EditOp { kMatch, kSubstitution, kInsertion, kDeletion };

struct SequenceAlignment {
  std::vector<EditOp> ops;
  std::size_t distance = 0;
  std::vector<int> tags;  // one per hypothesis word
};

inline SequenceAlignment align_sequence(std::span<const std::string> hyp,
                                        std::span<const std::string> ref) {
  const std::size_t n = hyp.size(), m = ref.size();
  // cost[i][j]: edit distance between hyp[i:] and ref[j:].
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = n + 1; i-- > 0;) {
    for (std::size_t j = m + 1; j-- > 0;) {
      if (i == n) { at(i, j) = m - j; continue; }
      if (j == m) { at(i, j) = n - i; continue; }
      const std::size_t diag = at(i + 1, j + 1) + (hyp[i] == ref[j] ? 0 : 1);
      at(i, j) = std::min({diag, at(i + 1, j) + 1, at(i, j + 1) + 1});
    }
  }
  SequenceAlignment out;
  out.distance = at(0, 0);
  std::size_t i = 0, j = 0;
  while (i < n || j < m) {
    const std::size_t here = at(i, j);
    if (i < n && j < m && hyp[i] == ref[j] && at(i + 1, j + 1) == here) {
      out.ops.push_back(EditOp::kMatch);
      out.tags.push_back(1);
      ++i, ++j;
    } else if (i < n && j < m && hyp[i] != ref[j] && at(i + 1, j + 1) + 1 == here) {
      out.ops.push_back(EditOp::kSubstitution);
      out.tags.push_back(0);
      ++i, ++j;
    } else if (i < n && at(i + 1, j) + 1 == here) {
      out.ops.push_back(EditOp::kInsertion);
      out.tags.push_back(0);
      ++i;
    } else {
      out.ops.push_back(EditOp::kDeletion);
      ++j;
    }
  }
  return out;
}

// c*_i = 1 iff hyp_i is matched to an equal reference word. Deleted
// reference words produce no output. Callers strip null tokens first.
inline std::vector<int> tag_sequence(std::span<const std::string> hyp,
                                     std::span<const std::string> ref) {
  return align_sequence(hyp, ref).tags;
}

// ---------------------------------------------------------------------------
// Reduced confusion-network alignment

inline constexpr double kCostTieTolerance = 1e-9;

struct CnAlignment {
  double cost = 0.0;
  // Reference index aligned to each bin, or -1 when the bin was skipped.
  std::vector<long> bin_to_ref;
  std::vector<TargetTag> tags;  // one per CN arc, in cn_to_lattice arc order
};

inline double bin_posterior(const Bin& bin, std::string_view word) {
  double p = 0.0;
  for (const auto& e : bin.entries)
    if (e.word == word) p += e.posterior;
  return p;
}

inline CnAlignment align_cn(const ConfusionNetwork& cn, std::span<const std::string> ref) {
  const std::size_t bins = cn.bins.size(), m = ref.size();
  std::vector<double> align_cost(bins * std::max<std::size_t>(m, 1));
  std::vector<double> skip_bin(bins);
  for (std::size_t t = 0; t < bins; ++t) {
    skip_bin[t] = 1.0 - bin_posterior(cn.bins[t], kNullWord);
    for (std::size_t r = 0; r < m; ++r)
      align_cost[t * m + r] = 1.0 - bin_posterior(cn.bins[t], ref[r]);
  }
  constexpr double kSkipRef = 1.0;

  std::vector<double> suffix((bins + 1) * (m + 1));
  auto at = [&](std::size_t t, std::size_t r) -> double& { return suffix[t * (m + 1) + r]; };
  for (std::size_t t = bins + 1; t-- > 0;) {
    for (std::size_t r = m + 1; r-- > 0;) {
      double best;
      if (t == bins) {
        best = static_cast<double>(m - r) * kSkipRef;
      } else {
        best = skip_bin[t] + at(t + 1, r);
        if (r < m) {
          best = std::min(best, align_cost[t * m + r] + at(t + 1, r + 1));
          best = std::min(best, kSkipRef + at(t, r + 1));
        }
      }
      at(t, r) = best;
    }
  }

  CnAlignment out;
  out.cost = at(0, 0);
  out.bin_to_ref.assign(bins, -1);
  std::size_t t = 0, r = 0;
  while (t < bins || r < m) {
    const double here = at(t, r);
    if (t < bins && r < m &&
        align_cost[t * m + r] + at(t + 1, r + 1) <= here + kCostTieTolerance) {
      out.bin_to_ref[t] = static_cast<long>(r);
      ++t, ++r;
    } else if (t < bins && skip_bin[t] + at(t + 1, r) <= here + kCostTieTolerance) {
      ++t;
    } else {
      ++r;
    }
  }

  ArcId id = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    for (const auto& e : cn.bins[b].entries) {
      int target;
      if (out.bin_to_ref[b] >= 0)
        target = e.word == ref[static_cast<std::size_t>(out.bin_to_ref[b])] ? 1 : 0;
      else
        target = is_null_word(e.word) ? 1 : 0;
      out.tags.push_back({id++, target, TagMethod::kReducedCnc});
    }
  }
  return out;
}

inline std::vector<TargetTag> tag_cn(const ConfusionNetwork& cn,
                                     std::span<const std::string> ref) {
  return align_cn(cn, ref).tags;
}

// Tags for the 1-best arcs of a CN (nulls dropped) via Levenshtein, keyed by
// the CN arc ids of the selected entries.
inline std::vector<TargetTag> tag_one_best(const ConfusionNetwork& cn,
                                           std::span<const std::string> ref) {
  std::vector<ArcId> ids;
  std::vector<std::string> hyp;
  for (auto& e : one_best(cn)) {
    if (e.is_null) continue;
    ids.push_back(e.arc_id);
    hyp.push_back(std::move(e.word));
  }
  const auto tags = tag_sequence(hyp, ref);
  std::vector<TargetTag> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    out.push_back({ids[i], tags[i], TagMethod::kLevenshtein1Best});
  return out;
}

// ---------------------------------------------------------------------------
// Time-overlap tagging for lattices

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// Intersection over union of two time intervals, floored at 0. Two
// identical zero-length intervals overlap fully.
inline double overlap(Interval arc, Interval ref) {
  if (arc.end < arc.start || ref.end < ref.start)
    throw Error(ErrorCode::kInvalidInterval, "interval ends before it starts");
  const double inter = std::min(ref.end, arc.end) - std::max(ref.start, arc.start);
  const double uni = std::max(ref.end, arc.end) - std::min(ref.start, arc.start);
  if (uni <= 0.0) return 1.0;
  return std::max(0.0, inter / uni);
}

inline constexpr double kDefaultOverlapThreshold = 0.5;

inline std::vector<TargetTag> tag_lattice(const Lattice& lattice, const ReferenceTranscript& ref,
                                          double threshold = kDefaultOverlapThreshold) {
  if (!ref.timed)
    throw Error(ErrorCode::kMissingTimings,
                "reference '" + ref.utterance_id + "' has no word timings");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::kConfig, "overlap threshold must lie in (0, 1]");
  std::vector<TargetTag> out;
  out.reserve(lattice.arcs.size());
  for (const Arc& arc : lattice.arcs) {
    const Interval span{arc.start_time, arc.end_time};
    const bool null_arc = is_null_word(arc.word);
    bool hit = false;
    for (const auto& w : ref.words) {
      if (!null_arc && w.word != arc.word) continue;
      if (overlap(span, {w.start, w.end}) >= threshold) {
        hit = true;
        break;
      }
    }
    const int target = null_arc ? (hit ? 0 : 1) : (hit ? 1 : 0);
    out.push_back({arc.id, target, TagMethod::kOverlap});
  }
  return out;
}

}  // namespace latconf
