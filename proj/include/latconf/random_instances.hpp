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

// Small seeded random graphs and model instances for gradient checks and
// property tests.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "latconf/graph.hpp"
#include "latconf/nncore.hpp"
#include "latconf/propagate.hpp"
#include "latconf/text.hpp"

namespace latconf {

// Confusion network with `bins` bins of 1..max_entries entries each.
// Posteriors in each bin sum to 1; `null_rate` is the chance that a bin
// contains !NULL.
inline ConfusionNetwork random_cn(std::mt19937_64& rng, std::size_t bins,
                                  std::size_t max_entries, std::size_t vocab = 6,
                                  double null_rate = 0.3) {
  std::uniform_int_distribution<std::size_t> n_entries(1, max_entries);
  std::uniform_int_distribution<std::size_t> word(0, vocab - 1);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  std::bernoulli_distribution has_null(null_rate);
  ConfusionNetwork cn;
  cn.utterance_id = "rand";
  double t = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    Bin bin{t, t + 0.3, {}};
    t += 0.3;
    const std::size_t k = n_entries(rng);
    std::vector<std::string> words;
    if (has_null(rng)) words.emplace_back(kNullWord);
    while (words.size() < k && words.size() < vocab + 1) {
      std::string w = text::format("v%zu", word(rng));
      if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
    }
    double sum = 0.0;
    std::vector<double> raw;
    for (std::size_t i = 0; i < words.size(); ++i) sum += raw.emplace_back(unit(rng));
    for (std::size_t i = 0; i < words.size(); ++i) bin.entries.push_back({words[i], raw[i] / sum});
    cn.bins.push_back(std::move(bin));
  }
  return cn;
}

// Single-source, single-sink DAG. A chain 0 -> 1 -> ... -> n-1 keeps every
// node on a source-sink path; `extra` forward arcs are added at random,
// including parallel arcs.
inline Lattice random_lattice(std::mt19937_64& rng, std::size_t nodes, std::size_t extra,
                              std::size_t vocab = 6) {
  std::uniform_int_distribution<std::size_t> word(0, vocab);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Lattice lat;
  lat.utterance_id = "rand";
  for (std::size_t i = 0; i < nodes; ++i) lat.nodes.push_back({i, 0.25 * static_cast<double>(i)});
  auto add = [&](NodeId s, NodeId e) {
    Arc a;
    a.id = lat.arcs.size();
    a.start = s;
    a.end = e;
    const std::size_t w = word(rng);
    a.word = w == vocab ? std::string(kNullWord) : text::format("v%zu", w);
    a.start_time = lat.nodes[s].time;
    a.end_time = lat.nodes[e].time;
    a.posterior = unit(rng);
    a.am_score = -10.0 * unit(rng);
    a.lm_score = -3.0 * unit(rng);
    lat.arcs.push_back(std::move(a));
  };
  for (std::size_t i = 0; i + 1 < nodes; ++i) add(i, i + 1);
  if (nodes >= 2) {
    std::uniform_int_distribution<std::size_t> pick(0, nodes - 2);
    for (std::size_t k = 0; k < extra; ++k) {
      const NodeId s = pick(rng);
      std::uniform_int_distribution<std::size_t> to(s + 1, nodes - 1);
      add(s, to(rng));
    }
  }
  lat.initial = 0;
  lat.final = nodes - 1;
  return lat;
}

// A model input with uniform random features in [-1, 1].
inline GraphInput random_input(std::mt19937_64& rng, const Lattice& lattice, std::size_t features) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector x(lattice.arcs.size() * features);
  for (double& v : x) v = u(rng);
  return prepare_graph(lattice, std::move(x));
}

inline Vector random_targets(std::mt19937_64& rng, std::size_t n) {
  std::bernoulli_distribution b(0.5);
  Vector t(n);
  for (double& v : t) v = b(rng) ? 1.0 : 0.0;
  return t;
}

// Initialized parameters with every entry (biases and h0 included) moved by
// a uniform offset in [-scale, scale], so no gradient is trivially zero.
inline ModelParams random_params(std::mt19937_64& rng, const ModelDims& dims, double scale = 0.3) {
  ModelParams p = initialize(dims, rng());
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : p.flat()) v += u(rng);
  return p;
}

enum class InstanceShape { kSequence, kCn, kLattice };

// Graph for a gradient-check instance of the given shape.
inline Lattice random_instance_graph(std::mt19937_64& rng, InstanceShape shape) {
  std::uniform_int_distribution<std::size_t> len(2, 5);
  switch (shape) {
    case InstanceShape::kSequence:
      return cn_to_lattice(random_cn(rng, len(rng), 1));
    case InstanceShape::kCn:
      return cn_to_lattice(random_cn(rng, len(rng), 3));
    case InstanceShape::kLattice: {
      const std::size_t n = len(rng) + 1;
      return random_lattice(rng, n, n);
    }
  }
  return {};
}

}  // namespace latconf
