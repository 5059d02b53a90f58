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

// Confidence quality over pooled (confidence, target) pairs.
//
// NCE = (H_b - H_m) / H_b, where H_m is the mean binary cross-entropy of the
// confidences and H_b that of the constant predictor P_c (the fraction of
// positive targets). Average precision uses step interpolation over the
// descending-confidence ranking; arcs with equal confidence enter the
// ranking together. Precision is 1 by convention when nothing is predicted
// positive.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "latconf/calibrate.hpp"
#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/text.hpp"

namespace latconf {

namespace detail {

inline void check_pairs(std::span<const double> c, std::span<const double> t) {
  if (c.size() != t.size())
    throw Error(ErrorCode::kLengthMismatch, "confidences and targets differ in length");
  if (c.empty()) throw Error(ErrorCode::kLengthMismatch, "no confidence/target pairs");
}

inline double clamp_confidence(double c) {
  return std::clamp(c, kConfidenceFloor, 1.0 - kConfidenceFloor);
}

inline double mean_cross_entropy(std::span<const double> c, std::span<const double> t) {
  double sum = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double p = clamp_confidence(c[i]);
    sum += t[i] * std::log(p) + (1.0 - t[i]) * std::log(1.0 - p);
  }
  return -sum / static_cast<double>(c.size());
}

}  // namespace detail

struct NceResult {
  double nce = 0.0;
  double p_c = 0.0;
  double h_baseline = 0.0;
  double h_model = 0.0;
};

inline double empirical_correctness(std::span<const double> targets) {
  if (targets.empty()) throw Error(ErrorCode::kLengthMismatch, "no targets");
  return std::accumulate(targets.begin(), targets.end(), 0.0) /
         static_cast<double>(targets.size());
}

inline NceResult nce(std::span<const double> confidences, std::span<const double> targets) {
  detail::check_pairs(confidences, targets);
  NceResult r;
  r.p_c = empirical_correctness(targets);
  if (r.p_c <= 0.0 || r.p_c >= 1.0)
    throw Error(ErrorCode::kDegenerateTargets, "all targets are identical; NCE is undefined");
  // The baseline goes through the same summation as the model so a constant
  // P_c prediction gives exactly zero.
  const std::vector<double> constant(targets.size(), r.p_c);
  r.h_baseline = detail::mean_cross_entropy(constant, targets);
  r.h_model = detail::mean_cross_entropy(confidences, targets);
  r.nce = (r.h_baseline - r.h_model) / r.h_baseline;
  return r;
}

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Counts with "positive" meaning confidence >= threshold.
inline PrPoint counts_at(std::span<const double> confidences, std::span<const double> targets,
                         double threshold) {
  detail::check_pairs(confidences, targets);
  PrPoint p;
  p.threshold = threshold;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const bool correct = targets[i] > 0.5;
    positives += correct;
    if (confidences[i] >= threshold) (correct ? p.tp : p.fp) += 1;
  }
  p.fn = positives - p.tp;
  p.precision = p.tp + p.fp == 0 ? 1.0 : static_cast<double>(p.tp) / (p.tp + p.fp);
  p.recall = positives == 0 ? 0.0 : static_cast<double>(p.tp) / positives;
  return p;
}

namespace detail {

inline std::size_t count_positives(std::span<const double> targets) {
  std::size_t n = 0;
  for (double t : targets) n += t > 0.5;
  if (n == 0) throw Error(ErrorCode::kNoPositives, "no positive targets");
  return n;
}

// Indices sorted by descending confidence.
inline std::vector<std::size_t> rank_descending(std::span<const double> c) {
  std::vector<std::size_t> idx(c.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
  return idx;
}

}  // namespace detail

// One point per distinct confidence value, in ascending threshold order.
inline std::vector<PrPoint> pr_curve(std::span<const double> confidences,
                                     std::span<const double> targets) {
  detail::check_pairs(confidences, targets);
  const std::size_t positives = detail::count_positives(targets);
  const auto idx = detail::rank_descending(confidences);
  std::vector<PrPoint> out;
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < idx.size();) {
    const double theta = confidences[idx[k]];
    while (k < idx.size() && confidences[idx[k]] == theta) {
      (targets[idx[k]] > 0.5 ? tp : fp) += 1;
      ++k;
    }
    PrPoint p;
    p.threshold = theta;
    p.tp = tp;
    p.fp = fp;
    p.fn = positives - tp;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(positives);
    out.push_back(p);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline double average_precision(std::span<const double> confidences,
                                std::span<const double> targets) {
  detail::check_pairs(confidences, targets);
  const double positives = static_cast<double>(detail::count_positives(targets));
  const auto idx = detail::rank_descending(confidences);
  double ap = 0.0, prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t k = 0; k < idx.size();) {
    const double theta = confidences[idx[k]];
    while (k < idx.size() && confidences[idx[k]] == theta) {
      tp += targets[idx[k]] > 0.5;
      ++seen;
      ++k;
    }
    const double recall = static_cast<double>(tp) / positives;
    ap += (recall - prev_recall) * (static_cast<double>(tp) / static_cast<double>(seen));
    prev_recall = recall;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Reports

inline const std::vector<double>& default_report_thresholds() {
  static const std::vector<double> t{0.25, 0.5, 0.75};
  return t;
}

struct EvalReport {
  std::string label;
  std::size_t count = 0;
  double p_c = 0.0;
  double h_baseline = 0.0;
  double h_model = 0.0;
  double nce = 0.0;
  double ap = 0.0;
  std::vector<PrPoint> pr;
  std::vector<PrPoint> at_thresholds;
};

inline EvalReport make_report(std::span<const double> confidences,
                              std::span<const double> targets,
                              std::span<const double> thresholds = default_report_thresholds(),
                              std::string label = "model") {
  EvalReport r;
  r.label = std::move(label);
  const NceResult n = nce(confidences, targets);
  r.count = confidences.size();
  r.p_c = n.p_c;
  r.h_baseline = n.h_baseline;
  r.h_model = n.h_model;
  r.nce = n.nce;
  r.ap = average_precision(confidences, targets);
  r.pr = pr_curve(confidences, targets);
  for (double th : thresholds) r.at_thresholds.push_back(counts_at(confidences, targets, th));
  return r;
}

inline void write_report(std::ostream& out, const EvalReport& r) {
  out << "[" << r.label << "]\n";
  out << "arcs " << r.count << "\n";
  out << text::format("p_c %.6f\n", r.p_c);
  out << text::format("h_baseline %.6f\n", r.h_baseline);
  out << text::format("h_model %.6f\n", r.h_model);
  out << text::format("nce %.4f\n", r.nce);
  out << text::format("ap %.4f\n", r.ap);
  out << "ap_interpolation step\n";
  for (const auto& p : r.at_thresholds)
    out << text::format("at %.4f tp %zu fp %zu fn %zu precision %.4f recall %.4f\n",
                        p.threshold, p.tp, p.fp, p.fn, p.precision, p.recall);
}

// A table with one row per scoring method over the same arcs.
inline void write_table(std::ostream& out, std::span<const EvalReport> rows) {
  out << text::format("%-12s %8s %8s %8s\n", "method", "arcs", "NCE", "AP");
  for (const auto& r : rows)
    out << text::format("%-12s %8zu %8.4f %8.4f\n", r.label.c_str(), r.count, r.nce, r.ap);
}

// Two columns, recall then precision, one line per threshold point.
inline void write_pr_points(std::ostream& out, std::span<const PrPoint> pr) {
  out << "# recall precision threshold\n";
  for (const auto& p : pr)
    out << text::format("%.6f %.6f %.6f\n", p.recall, p.precision, p.threshold);
}

// Pairs each score with its target by (utterance, arc). Every score must
// have a target; targets without a score (e.g. arcs outside the scored
// condition) are ignored.
struct ScoredPairs {
  std::vector<double> confidences;
  std::vector<double> targets;
};

inline ScoredPairs join_scores(std::span<const ScoreRecord> scores,
                               std::span<const TargetRecord> targets) {
  std::map<std::pair<std::string, ArcId>, int> lookup;
  for (const auto& t : targets) lookup[{t.utterance_id, t.tag.arc_id}] = t.tag.target;
  ScoredPairs out;
  for (const auto& s : scores) {
    const auto it = lookup.find({s.utterance_id, s.arc_id});
    if (it == lookup.end())
      throw Error(ErrorCode::kLengthMismatch, "no target for utterance '" + s.utterance_id +
                                                  "' arc " + std::to_string(s.arc_id));
    out.confidences.push_back(s.confidence);
    out.targets.push_back(it->second);
  }
  return out;
}

}  // namespace latconf
