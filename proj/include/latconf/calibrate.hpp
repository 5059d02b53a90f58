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

// Posterior-to-confidence calibration baselines: the identity map (raw
// posteriors) and a one-feature decision tree whose leaves are pooled into a
// monotone piecewise mapping.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <span>
#include <vector>

#include "latconf/error.hpp"

namespace latconf {

inline constexpr double kConfidenceFloor = 1e-6;

enum class Interpolation { kIdentity, kStep, kLinear };

struct CalibrationMapping {
  Interpolation mode = Interpolation::kIdentity;
  // K+1 ascending breakpoints from 0 to 1; interval k is [b_k, b_{k+1}).
  std::vector<double> breakpoints;
  // K non-decreasing interval values and the training counts behind them.
  std::vector<double> values;
  std::vector<double> weights;
  // Linear mode adds tilt * (p - 0.5) so the map is strictly increasing and
  // never merges two distinct posteriors into a tie.
  double tilt = 1e-6;

  static CalibrationMapping identity() { return {}; }
  bool is_identity() const { return mode == Interpolation::kIdentity; }
  std::size_t interval_count() const { return values.size(); }

  bool operator==(const CalibrationMapping&) const = default;
};

struct TreeOptions {
  std::size_t max_leaves = 32;
  std::size_t min_leaf = 50;
  Interpolation mode = Interpolation::kLinear;
  double tilt = 1e-6;
};

// Weighted pool-adjacent-violators: returns the non-decreasing sequence
// closest to `values` in weighted least squares.
inline std::vector<double> pool_adjacent_violators(std::span<const double> values,
                                                   std::span<const double> weights) {
  struct Block {
    double sum;
    double weight;
    std::size_t size;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    blocks.push_back({values[i] * w, w, 1});
    while (blocks.size() > 1) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum / a.weight <= b.sum / b.weight) break;
      Block merged{a.sum + b.sum, a.weight + b.weight, a.size + b.size};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.size, b.sum / b.weight);
  return out;
}

namespace detail {

// n * H(n1 / n) in nats: summed cross-entropy of a leaf predicting its own
// empirical rate.
inline double leaf_cost(double n, double n1) {
  if (n <= 0.0) return 0.0;
  double cost = 0.0;
  if (n1 > 0.0) cost -= n1 * std::log(n1 / n);
  if (n - n1 > 0.0) cost -= (n - n1) * std::log((n - n1) / n);
  return cost;
}

struct SplitCandidate {
  double gain = 0.0;
  std::size_t lo = 0, hi = 0, split = 0;  // group ranges [lo, split) [split, hi)
  bool operator<(const SplitCandidate& o) const {
    if (gain != o.gain) return gain < o.gain;
    return lo > o.lo;  // prefer the leftmost leaf on equal gain
  }
};

}  // namespace detail

inline CalibrationMapping fit_tree(std::span<const double> posteriors,
                                   std::span<const double> targets,
                                   const TreeOptions& options = {}) {
  if (posteriors.empty())
    throw Error(ErrorCode::kEmptyTrainingSet, "no samples to fit the tree on");
  if (posteriors.size() != targets.size())
    throw Error(ErrorCode::kLengthMismatch, "posteriors and targets differ in length");

  std::vector<std::size_t> idx(posteriors.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return posteriors[a] < posteriors[b];
  });

  // Distinct posterior values with prefix counts.
  std::vector<double> value;
  std::vector<double> cum_n{0.0}, cum_pos{0.0};
  for (std::size_t i : idx) {
    if (value.empty() || posteriors[i] != value.back()) {
      value.push_back(posteriors[i]);
      cum_n.push_back(cum_n.back());
      cum_pos.push_back(cum_pos.back());
    }
    cum_n.back() += 1.0;
    cum_pos.back() += targets[i] > 0.5 ? 1.0 : 0.0;
  }
  const std::size_t groups = value.size();
  auto count = [&](std::size_t lo, std::size_t hi) { return cum_n[hi] - cum_n[lo]; };
  auto positives = [&](std::size_t lo, std::size_t hi) {
    return cum_pos[hi] - cum_pos[lo];
  };
  const double min_leaf = static_cast<double>(options.min_leaf);

  auto best_split = [&](std::size_t lo, std::size_t hi) {
    detail::SplitCandidate best{0.0, lo, hi, lo};
    const double parent = detail::leaf_cost(count(lo, hi), positives(lo, hi));
    for (std::size_t s = lo + 1; s < hi; ++s) {
      const double nl = count(lo, s), nr = count(s, hi);
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = parent - detail::leaf_cost(nl, positives(lo, s)) -
                          detail::leaf_cost(nr, positives(s, hi));
      if (gain > best.gain + 1e-12) {
        best.gain = gain;
        best.split = s;
      }
    }
    return best;
  };

  // Best-first growth: always split the leaf with the largest gain.
  std::vector<std::pair<std::size_t, std::size_t>> leaves;
  std::priority_queue<detail::SplitCandidate> frontier;
  frontier.push(best_split(0, groups));
  std::size_t leaf_count = 1;
  while (!frontier.empty()) {
    auto cand = frontier.top();
    frontier.pop();
    if (cand.split == cand.lo || leaf_count >= options.max_leaves) {
      leaves.emplace_back(cand.lo, cand.hi);
      continue;
    }
    ++leaf_count;
    frontier.push(best_split(cand.lo, cand.split));
    frontier.push(best_split(cand.split, cand.hi));
  }
  std::sort(leaves.begin(), leaves.end());

  CalibrationMapping mapping;
  mapping.mode = options.mode;
  mapping.tilt = options.mode == Interpolation::kLinear ? options.tilt : 0.0;
  mapping.breakpoints.push_back(0.0);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const auto [lo, hi] = leaves[k];
    const double n = count(lo, hi), n1 = positives(lo, hi);
    mapping.values.push_back((n1 + 1.0) / (n + 2.0));
    mapping.weights.push_back(n);
    if (k + 1 < leaves.size())
      mapping.breakpoints.push_back(0.5 * (value[hi - 1] + value[hi]));
  }
  mapping.breakpoints.push_back(1.0);
  mapping.values = pool_adjacent_violators(mapping.values, mapping.weights);
  return mapping;
}

inline double apply_mapping(const CalibrationMapping& mapping, double posterior) {
  if (mapping.is_identity() || mapping.values.empty()) return posterior;
  const auto& b = mapping.breakpoints;
  const auto& v = mapping.values;
  const std::size_t k_count = v.size();
  double out;
  if (mapping.mode == Interpolation::kStep) {
    const auto it = std::upper_bound(b.begin() + 1, b.end() - 1, posterior);
    out = v[static_cast<std::size_t>(it - (b.begin() + 1))];
  } else {
    auto mid = [&](std::size_t k) { return 0.5 * (b[k] + b[k + 1]); };
    if (posterior <= mid(0)) {
      out = v[0];
    } else if (posterior >= mid(k_count - 1)) {
      out = v[k_count - 1];
    } else {
      std::size_t k = 0;
      while (posterior > mid(k + 1)) ++k;
      const double lo = mid(k), hi = mid(k + 1);
      out = v[k] + (v[k + 1] - v[k]) * (posterior - lo) / (hi - lo);
    }
    out += mapping.tilt * (posterior - 0.5);
  }
  return std::clamp(out, kConfidenceFloor, 1.0 - kConfidenceFloor);
}

inline std::vector<double> apply_mapping(const CalibrationMapping& mapping,
                                         std::span<const double> posteriors) {
  std::vector<double> out(posteriors.size());
  for (std::size_t i = 0; i < posteriors.size(); ++i)
    out[i] = apply_mapping(mapping, posteriors[i]);
  return out;
}

}  // namespace latconf
