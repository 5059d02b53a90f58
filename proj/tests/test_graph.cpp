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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "latconf/graph.hpp"
#include "latconf/random_instances.hpp"

namespace latconf {
namespace {

Lattice make_lattice(std::vector<double> times, std::vector<std::pair<NodeId, NodeId>> edges) {
  Lattice lat;
  lat.utterance_id = "t";
  for (std::size_t i = 0; i < times.size(); ++i) lat.nodes.push_back({i, times[i]});
  for (const auto& [s, e] : edges) {
    Arc a;
    a.id = lat.arcs.size();
    a.start = s;
    a.end = e;
    a.word = "w" + std::to_string(a.id);
    a.start_time = times[s];
    a.end_time = times[e];
    a.posterior = 0.5;
    lat.arcs.push_back(a);
  }
  lat.initial = 0;
  lat.final = times.size() - 1;
  return lat;
}

bool has_rule(const std::vector<Violation>& v, Rule r) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == r; });
}

TEST(Validate, SingleArcIsValid) {
  EXPECT_TRUE(validate(make_lattice({0.0, 0.4}, {{0, 1}})).empty());
}

TEST(Validate, BackwardsTimeIsReportedForTheArc) {
  Lattice lat = make_lattice({0.5, 0.4}, {{0, 1}});
  const auto v = validate(lat);
  ASSERT_TRUE(has_rule(v, Rule::kTimeOrderViolation));
  for (const auto& x : v)
    if (x.rule == Rule::kTimeOrderViolation) {
      EXPECT_EQ(x.id, 0u);
    }
}

TEST(Validate, TwoNodeCycle) {
  Lattice lat = make_lattice({0.0, 0.0}, {{0, 1}, {1, 0}});
  const auto v = validate(lat);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, Rule::kCycleDetected);
}

TEST(Validate, UndefinedNodeAndBadPosterior) {
  Lattice lat = make_lattice({0.0, 0.4}, {{0, 1}});
  lat.arcs[0].posterior = 1.5;
  EXPECT_TRUE(has_rule(validate(lat), Rule::kPosteriorOutOfRange));
  lat.arcs[0].posterior = 0.5;
  lat.arcs[0].end = 9;
  EXPECT_TRUE(has_rule(validate(lat), Rule::kUndefinedNode));
}

TEST(Validate, DanglingNodeIsNotOnAPath) {
  Lattice lat = make_lattice({0.0, 0.2, 0.4}, {{0, 2}, {0, 1}});
  lat.final = 2;
  const auto v = validate(lat);
  EXPECT_FALSE(v.empty());
}

TEST(TopologicalOrder, Chain) {
  const Lattice lat = make_lattice({0.0, 0.1, 0.2}, {{0, 1}, {1, 2}});
  EXPECT_EQ(topological_order(lat), (std::vector<NodeId>{0, 1, 2}));
}

TEST(TopologicalOrder, DiamondFollowsTimes) {
  // Node 2 is earlier than node 1, so it comes first.
  const Lattice lat = make_lattice({0.0, 0.3, 0.2, 0.5}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  EXPECT_EQ(topological_order(lat), (std::vector<NodeId>{0, 2, 1, 3}));
  const Lattice tied = make_lattice({0.0, 0.2, 0.3, 0.5}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  EXPECT_EQ(topological_order(tied), (std::vector<NodeId>{0, 1, 2, 3}));
}

TEST(TopologicalOrder, CycleThrows) {
  const Lattice lat = make_lattice({0.0, 0.0}, {{0, 1}, {1, 0}});
  try {
    topological_order(lat);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCycle);
  }
}

TEST(TopologicalOrder, RandomDagsSatisfyEveryArc) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Lattice lat = random_lattice(rng, 50, 120);
    const auto order = topological_order(lat);
    ASSERT_EQ(order.size(), lat.nodes.size());
    std::vector<std::size_t> pos(order.size(), order.size());
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (std::size_t p : pos) ASSERT_LT(p, order.size());  // a permutation
    for (const Arc& a : lat.arcs) EXPECT_LT(pos[a.start], pos[a.end]);
  }
}

TEST(Reverse, ChainFlips) {
  const Lattice r = reverse(make_lattice({0.0, 0.4}, {{0, 1}}));
  EXPECT_EQ(r.arcs[0].start, 1u);
  EXPECT_EQ(r.arcs[0].end, 0u);
  EXPECT_EQ(r.initial, 1u);
  EXPECT_EQ(r.final, 0u);
}

TEST(Reverse, DiamondSwapsDegrees) {
  const Lattice lat = make_lattice({0.0, 0.2, 0.3, 0.5}, {{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  const Lattice r = reverse(lat);
  for (NodeId n = 0; n < 4; ++n) {
    std::size_t in = 0, out = 0, rin = 0, rout = 0;
    for (const Arc& a : lat.arcs) in += a.end == n, out += a.start == n;
    for (const Arc& a : r.arcs) rin += a.end == n, rout += a.start == n;
    EXPECT_EQ(in, rout);
    EXPECT_EQ(out, rin);
  }
}

TEST(Reverse, DoubleReversalIsIdentityAndPayloadsSurvive) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Lattice lat = random_lattice(rng, 12, 20);
    const Lattice r = reverse(lat);
    EXPECT_EQ(reverse(r), lat);
    EXPECT_EQ(r.nodes, lat.nodes);
    for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
      EXPECT_EQ(r.arcs[i].word, lat.arcs[i].word);
      EXPECT_EQ(r.arcs[i].posterior, lat.arcs[i].posterior);
      EXPECT_EQ(r.arcs[i].am_score, lat.arcs[i].am_score);
      EXPECT_EQ(r.arcs[i].lm_score, lat.arcs[i].lm_score);
    }
  }
}

TEST(CnToLattice, OneBinTwoParallelArcs) {
  ConfusionNetwork cn{"u", {{0.0, 0.4, {{"cat", 0.9}, {"!NULL", 0.1}}}}};
  const Lattice lat = cn_to_lattice(cn);
  EXPECT_EQ(lat.nodes.size(), 2u);
  ASSERT_EQ(lat.arcs.size(), 2u);
  EXPECT_EQ(lat.arcs[0].start, 0u);
  EXPECT_EQ(lat.arcs[1].end, 1u);
  EXPECT_EQ(lat.arcs[0].posterior, 0.9);
  EXPECT_EQ(lat.arcs[1].posterior, 0.1);
}

TEST(CnToLattice, SingleEntryBinsMakeAChain) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 1.0}}}, {0.1, 0.2, {{"b", 1.0}}},
                            {0.2, 0.3, {{"c", 1.0}}}}};
  const Lattice lat = cn_to_lattice(cn);
  EXPECT_EQ(lat.nodes.size(), 4u);
  EXPECT_EQ(lat.arcs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(lat.arcs[i].start, i);
    EXPECT_EQ(lat.arcs[i].end, i + 1);
  }
}

TEST(CnToLattice, EmptyNetworkThrows) {
  try {
    cn_to_lattice(ConfusionNetwork{"u", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyCN);
  }
}

TEST(CnToLattice, RandomNetworksAreValidLattices) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const auto cn = random_cn(rng, 1 + rep % 9, 4);
    const Lattice lat = cn_to_lattice(cn);
    EXPECT_TRUE(validate(lat).empty());
    std::size_t k = 0;
    for (const auto& bin : cn.bins)
      for (const auto& e : bin.entries) EXPECT_EQ(lat.arcs[k++].posterior, e.posterior);
  }
}

TEST(OneBest, PicksMaximumPerBin) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 0.6}, {"b", 0.4}}},
                            {0.1, 0.2, {{"!NULL", 0.7}, {"c", 0.3}}}}};
  const auto best = one_best(cn);
  ASSERT_EQ(best.size(), 2u);
  EXPECT_EQ(best[0].bin, 0u);
  EXPECT_EQ(best[0].word, "a");
  EXPECT_EQ(best[0].posterior, 0.6);
  EXPECT_EQ(best[1].bin, 1u);
  EXPECT_EQ(best[1].word, "!NULL");
  EXPECT_TRUE(best[1].is_null);
  EXPECT_EQ(best[1].arc_id, 2u);
  EXPECT_EQ(one_best_words(cn), (std::vector<std::string>{"a"}));
}

TEST(OneBest, TieGoesToFirstEntry) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"x", 0.5}, {"y", 0.5}}}}};
  EXPECT_EQ(one_best(cn)[0].word, "x");
}

TEST(OneBest, SelectionDominatesItsBin) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto cn = random_cn(rng, 6, 4);
    for (const auto& e : one_best(cn))
      for (const auto& other : cn.bins[e.bin].entries) EXPECT_GE(e.posterior, other.posterior);
  }
}

TEST(ValidateCn, BinSumTolerance) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 0.6}, {"b", 0.3}}}}};
  EXPECT_FALSE(validate(cn).empty());
  EXPECT_TRUE(validate(cn, 0.2).empty());
  cn.bins.push_back({0.1, 0.2, {}});
  EXPECT_FALSE(validate(cn, 0.2).empty());
}

}  // namespace
}  // namespace latconf
