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

// Independent reference implementations used by the tests. Nothing here
// calls into the library's algorithms; only plain data types are shared.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "latconf/graph.hpp"
#include "latconf/nncore.hpp"

namespace oracle {

using latconf::ConfusionNetwork;
using Mat = std::vector<std::vector<double>>;

// Classic prefix-table Levenshtein distance with unit costs.
inline std::size_t edit_distance(const std::vector<std::string>& a,
                                 const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
  return d[a.size()][b.size()];
}

// Every monotone alignment of hypothesis words to reference words, scored
// with unit costs. Returns the tags of the lexicographically smallest
// optimal move sequence under match < substitution < insertion < deletion.
struct SequenceEnumeration {
  std::size_t distance = 0;
  std::vector<int> tags;
};

inline SequenceEnumeration enumerate_sequence(const std::vector<std::string>& hyp,
                                              const std::vector<std::string>& ref) {
  // 0 match, 1 substitution, 2 insertion (hyp word unmatched), 3 deletion.
  std::vector<int> moves, best_moves;
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::function<void(std::size_t, std::size_t, std::size_t)> go = [&](std::size_t i,
                                                                      std::size_t j,
                                                                      std::size_t cost) {
    if (cost > best) return;
    if (i == hyp.size() && j == ref.size()) {
      if (cost < best || moves < best_moves) {
        best = cost;
        best_moves = moves;
      }
      return;
    }
    if (i < hyp.size() && j < ref.size()) {
      const bool same = hyp[i] == ref[j];
      moves.push_back(same ? 0 : 1);
      go(i + 1, j + 1, cost + (same ? 0 : 1));
      moves.pop_back();
    }
    if (i < hyp.size()) {
      moves.push_back(2);
      go(i + 1, j, cost + 1);
      moves.pop_back();
    }
    if (j < ref.size()) {
      moves.push_back(3);
      go(i, j + 1, cost + 1);
      moves.pop_back();
    }
  };
  go(0, 0, 0);
  SequenceEnumeration out;
  out.distance = best;
  for (int m : best_moves)
    if (m != 3) out.tags.push_back(m == 0 ? 1 : 0);
  return out;
}

// Exhaustive monotone alignment of a reference to confusion-network bins.
// Moves: 0 aligns bin t with ref word r (cost 1 - P_t(r)), 1 skips a bin
// (cost 1 - P_t(!NULL)), 2 skips a reference word (cost 1). The chosen
// alignment is the lexicographically smallest move sequence among those
// within 1e-9 of the minimum cost.
struct CnEnumeration {
  double cost = 0.0;
  std::vector<int> tags;  // per arc in bin order
};

inline double posterior_of(const latconf::Bin& bin, const std::string& w) {
  double p = 0.0;
  for (const auto& e : bin.entries)
    if (e.word == w) p += e.posterior;
  return p;
}

inline CnEnumeration enumerate_cn(const ConfusionNetwork& cn, const std::vector<std::string>& ref) {
  const std::size_t bins = cn.bins.size(), m = ref.size();
  std::vector<int> moves;
  struct Candidate {
    double cost;
    std::vector<int> moves;
  };
  std::vector<Candidate> all;
  std::function<void(std::size_t, std::size_t, double)> go = [&](std::size_t t, std::size_t r,
                                                                 double cost) {
    if (t == bins && r == m) {
      all.push_back({cost, moves});
      return;
    }
    if (t < bins && r < m) {
      moves.push_back(0);
      go(t + 1, r + 1, cost + 1.0 - posterior_of(cn.bins[t], ref[r]));
      moves.pop_back();
    }
    if (t < bins) {
      moves.push_back(1);
      go(t + 1, r, cost + 1.0 - posterior_of(cn.bins[t], std::string(latconf::kNullWord)));
      moves.pop_back();
    }
    if (r < m) {
      moves.push_back(2);
      go(t, r + 1, cost + 1.0);
      moves.pop_back();
    }
  };
  go(0, 0, 0.0);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : all) best = std::min(best, c.cost);
  const std::vector<int>* chosen = nullptr;
  for (const auto& c : all)
    if (c.cost <= best + 1e-9 && (!chosen || c.moves < *chosen)) chosen = &c.moves;

  CnEnumeration out;
  out.cost = best;
  std::vector<long> bin_ref(bins, -1);
  std::size_t t = 0, r = 0;
  for (int mv : *chosen) {
    if (mv == 0) bin_ref[t++] = static_cast<long>(r++);
    else if (mv == 1) ++t;
    else ++r;
  }
  for (std::size_t b = 0; b < bins; ++b)
    for (const auto& e : cn.bins[b].entries) {
      if (bin_ref[b] >= 0) out.tags.push_back(e.word == ref[bin_ref[b]] ? 1 : 0);
      else out.tags.push_back(latconf::is_null_word(e.word) ? 1 : 0);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Dense linear algebra and cells on nested vectors

inline Mat to_mat(latconf::ConstMatrixRef m) {
  Mat out(m.rows, std::vector<double>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out[r][c] = m.data[r * m.cols + c];
  return out;
}

inline std::vector<double> matvec(const Mat& m, const std::vector<double>& v) {
  std::vector<double> out(m.size(), 0.0);
  for (std::size_t r = 0; r < m.size(); ++r)
    for (std::size_t c = 0; c < v.size(); ++c) out[r] += m[r][c] * v[c];
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// h' = sigmoid(W h + U x)
inline std::vector<double> simple_step(const Mat& w, const Mat& u, const std::vector<double>& h,
                                       const std::vector<double>& x) {
  const auto a = matvec(w, h);
  const auto b = matvec(u, x);
  std::vector<double> out(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) out[j] = sigmoid(a[j] + b[j]);
  return out;
}

// LSTM step with stacked gate rows in the order input, forget, output,
// candidate.
inline void lstm_step(const Mat& w, const Mat& u, const std::vector<double>& bias,
                      std::vector<double>& h, std::vector<double>& c,
                      const std::vector<double>& x) {
  const std::size_t H = h.size();
  const auto a = matvec(w, h);
  const auto b = matvec(u, x);
  std::vector<double> nh(H), nc(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sigmoid(a[j] + b[j] + bias[j]);
    const double f = sigmoid(a[H + j] + b[H + j] + bias[H + j]);
    const double o = sigmoid(a[2 * H + j] + b[2 * H + j] + bias[2 * H + j]);
    const double g = std::tanh(a[3 * H + j] + b[3 * H + j] + bias[3 * H + j]);
    nc[j] = f * c[j] + i * g;
    nh[j] = o * std::tanh(nc[j]);
  }
  h = nh;
  c = nc;
}

// Left-to-right and right-to-left recursions over a feature sequence, then
// the tanh feed-forward layer and logistic output on [h_fwd; h_bwd].
inline std::vector<double> sequence_birnn(const std::vector<std::vector<double>>& xs,
                                          const latconf::ModelParams& p) {
  using latconf::Direction;
  const auto& d = p.dims();
  const std::size_t T = xs.size(), H = d.hidden;
  const bool gated = d.cell == latconf::CellType::kGated;
  std::vector<std::vector<double>> states[2];
  for (int k = 0; k < 2; ++k) {
    const Direction dir = k == 0 ? Direction::kForward : Direction::kBackward;
    const Mat w = to_mat(p.recurrent(dir)), u = to_mat(p.input(dir));
    const auto bias = std::vector<double>(p.gate_bias(dir).begin(), p.gate_bias(dir).end());
    std::vector<double> h(p.h0(dir).begin(), p.h0(dir).end()), c(H, 0.0);
    states[k].assign(T, {});
    for (std::size_t s = 0; s < T; ++s) {
      const std::size_t t = k == 0 ? s : T - 1 - s;
      if (gated) lstm_step(w, u, bias, h, c, xs[t]);
      else h = simple_step(w, u, h, xs[t]);
      states[k][t] = h;
    }
  }
  std::vector<double> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<double> ctx = states[0][t];
    ctx.insert(ctx.end(), states[1][t].begin(), states[1][t].end());
    double logit = p.out_b();
    if (d.ff > 0) {
      const auto u = matvec(to_mat(p.ff_w()), ctx);
      for (std::size_t k = 0; k < d.ff; ++k)
        logit += p.out_w()[k] * std::tanh(u[k] + p.ff_b()[k]);
    } else {
      for (std::size_t j = 0; j < 2 * H; ++j) logit += p.out_w()[j] * ctx[j];
    }
    out[t] = sigmoid(logit);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics by direct counting

inline double bce(const std::vector<double>& c, const std::vector<double>& t) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i)
    s -= t[i] * std::log(c[i]) + (1.0 - t[i]) * std::log(1.0 - c[i]);
  return s / static_cast<double>(c.size());
}

inline double nce(const std::vector<double>& c, const std::vector<double>& t) {
  double pc = 0.0;
  for (double v : t) pc += v;
  pc /= static_cast<double>(t.size());
  const double hb = -(pc * std::log(pc) + (1.0 - pc) * std::log(1.0 - pc));
  std::vector<double> clamped(c);
  for (double& v : clamped) v = std::clamp(v, 1e-6, 1.0 - 1e-6);
  return (hb - bce(clamped, t)) / hb;
}

// Step-interpolated average precision: for every distinct threshold taken
// from high to low, count TP and predicted positives at "score >= theta".
inline double average_precision(const std::vector<double>& c, const std::vector<double>& t) {
  std::vector<double> thresholds(c);
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double positives = 0.0;
  for (double v : t) positives += v > 0.5;
  double ap = 0.0, prev_recall = 0.0;
  for (double th : thresholds) {
    double tp = 0.0, predicted = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i)
      if (c[i] >= th) {
        predicted += 1.0;
        tp += t[i] > 0.5;
      }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / predicted);
    prev_recall = recall;
  }
  return ap;
}

// Cheapest single split of sorted (posterior, target) data into two leaves
// by summed Bernoulli cross-entropy; returns the threshold halfway between
// the neighbouring distinct posteriors.
inline double best_split_threshold(std::vector<std::pair<double, double>> data) {
  std::sort(data.begin(), data.end());
  auto cost = [](double n, double n1) {
    double c = 0.0;
    if (n1 > 0) c -= n1 * std::log(n1 / n);
    if (n - n1 > 0) c -= (n - n1) * std::log((n - n1) / n);
    return c;
  };
  double best = std::numeric_limits<double>::infinity(), threshold = 0.0;
  for (std::size_t s = 1; s < data.size(); ++s) {
    if (data[s].first == data[s - 1].first) continue;
    double nl = 0, pl = 0, nr = 0, pr = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i < s) { nl += 1; pl += data[i].second; }
      else { nr += 1; pr += data[i].second; }
    }
    const double c = cost(nl, pl) + cost(nr, pr);
    if (c < best) {
      best = c;
      threshold = 0.5 * (data[s - 1].first + data[s].first);
    }
  }
  return threshold;
}

}  // namespace oracle
