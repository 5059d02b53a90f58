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

#include <random>

#include "latconf/random_instances.hpp"
#include "latconf/tagging.hpp"
#include "oracles.hpp"

namespace latconf {
namespace {

using Words = std::vector<std::string>;

std::vector<int> targets_of(const std::vector<TargetTag>& tags) {
  std::vector<int> out;
  for (const auto& t : tags) out.push_back(t.target);
  return out;
}

Words random_words(std::mt19937_64& rng, std::size_t max_len, std::size_t vocab) {
  std::uniform_int_distribution<std::size_t> len(0, max_len), w(0, vocab - 1);
  Words out(len(rng));
  for (auto& s : out) s = "v" + std::to_string(w(rng));
  return out;
}

TEST(TagSequence, Examples) {
  EXPECT_EQ(tag_sequence(Words{"a", "b", "c"}, Words{"a", "b", "c"}), (std::vector<int>{1, 1, 1}));
  EXPECT_EQ(tag_sequence(Words{"a", "x"}, Words{"a", "b"}), (std::vector<int>{1, 0}));
  EXPECT_EQ(tag_sequence(Words{"a", "b", "c"}, Words{"a", "c"}), (std::vector<int>{1, 0, 1}));
  EXPECT_EQ(tag_sequence(Words{}, Words{"a"}), std::vector<int>{});
  EXPECT_EQ(tag_sequence(Words{"a"}, Words{}), std::vector<int>{0});
}

TEST(TagSequence, MatchesEnumerationAndDistanceOracle) {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 300; ++rep) {
    const Words h = random_words(rng, 6, 4), r = random_words(rng, 6, 4);
    const auto a = align_sequence(h, r);
    const auto e = oracle::enumerate_sequence(h, r);
    EXPECT_EQ(a.distance, oracle::edit_distance(h, r));
    EXPECT_EQ(a.distance, e.distance);
    EXPECT_EQ(a.tags, e.tags);
    // Distance = hypothesis errors + deleted reference words.
    std::size_t zeros = 0, deletions = 0;
    for (int t : a.tags) zeros += t == 0;
    for (EditOp op : a.ops) deletions += op == EditOp::kDeletion;
    EXPECT_EQ(a.distance, zeros + deletions);
    EXPECT_EQ(tag_sequence(h, h), std::vector<int>(h.size(), 1));
  }
}

TEST(TagCn, HandExample) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 0.9}, {"!NULL", 0.1}}},
                            {0.1, 0.2, {{"b", 0.6}, {"c", 0.4}}}}};
  const auto al = align_cn(cn, Words{"a", "c"});
  EXPECT_NEAR(al.cost, 0.1 + 0.6, 1e-12);
  EXPECT_EQ(targets_of(al.tags), (std::vector<int>{1, 0, 0, 1}));
  for (std::size_t i = 0; i < al.tags.size(); ++i) {
    EXPECT_EQ(al.tags[i].arc_id, i);
    EXPECT_EQ(al.tags[i].method, TagMethod::kReducedCnc);
  }
}

TEST(TagCn, EmptyReferenceSkipsEveryBin) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 0.9}, {"!NULL", 0.1}}},
                            {0.1, 0.2, {{"b", 0.6}, {"c", 0.4}}}}};
  EXPECT_EQ(targets_of(tag_cn(cn, Words{})), (std::vector<int>{0, 1, 0, 0}));
}

TEST(TagCn, SingleCertainBin) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 1.0}}}}};
  const auto al = align_cn(cn, Words{"a"});
  EXPECT_EQ(al.cost, 0.0);
  EXPECT_EQ(targets_of(al.tags), std::vector<int>{1});
}

TEST(TagCn, MatchesExhaustiveEnumeration) {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<std::size_t> bins(1, 6);
  for (int rep = 0; rep < 300; ++rep) {
    const auto cn = random_cn(rng, bins(rng), 4, 5);
    const Words ref = random_words(rng, 6, 5);
    const auto al = align_cn(cn, ref);
    const auto e = oracle::enumerate_cn(cn, ref);
    EXPECT_NEAR(al.cost, e.cost, 1e-9);
    EXPECT_EQ(targets_of(al.tags), e.tags) << "rep " << rep;
  }
}

TEST(TagOneBest, UsesCnArcIdsAndDropsNulls) {
  ConfusionNetwork cn{"u", {{0.0, 0.1, {{"a", 0.9}, {"!NULL", 0.1}}},
                            {0.1, 0.2, {{"!NULL", 0.6}, {"c", 0.4}}},
                            {0.2, 0.3, {{"x", 0.3}, {"d", 0.7}}}}};
  const auto tags = tag_one_best(cn, Words{"a", "d"});
  ASSERT_EQ(tags.size(), 2u);
  EXPECT_EQ(tags[0].arc_id, 0u);
  EXPECT_EQ(tags[1].arc_id, 5u);
  EXPECT_EQ(tags[0].target, 1);
  EXPECT_EQ(tags[1].target, 1);
}

TEST(Overlap, Examples) {
  EXPECT_EQ(overlap({1, 2}, {1, 2}), 1.0);
  EXPECT_EQ(overlap({0, 1}, {2, 3}), 0.0);
  EXPECT_NEAR(overlap({0, 2}, {1, 3}), 1.0 / 3.0, 1e-12);
  EXPECT_THROW(overlap({2, 1}, {0, 1}), Error);
}

TEST(Overlap, SymmetricScaleInvariantBounded) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0), k(0.1, 10.0);
  for (int rep = 0; rep < 500; ++rep) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a > b) std::swap(a, b);
    if (c > d) std::swap(c, d);
    const double o = overlap({a, b}, {c, d});
    EXPECT_GE(o, 0.0);
    EXPECT_LE(o, 1.0);
    EXPECT_NEAR(o, overlap({c, d}, {a, b}), 1e-15);
    const double s = k(rng);
    EXPECT_NEAR(o, overlap({a * s, b * s}, {c * s, d * s}), 1e-12);
  }
}

Lattice one_arc(const std::string& word, double s, double e) {
  Lattice lat;
  lat.utterance_id = "u";
  lat.nodes = {{0, s}, {1, e}};
  Arc a;
  a.word = word;
  a.start = 0;
  a.end = 1;
  a.start_time = s;
  a.end_time = e;
  a.posterior = 1.0;
  lat.arcs.push_back(a);
  lat.final = 1;
  return lat;
}

TEST(TagLattice, Examples) {
  const ReferenceTranscript cat{"u", {{"cat", 0.0, 0.4}}, true};
  const ReferenceTranscript dog{"u", {{"dog", 0.0, 0.4}}, true};
  EXPECT_EQ(tag_lattice(one_arc("cat", 0.0, 0.4), cat)[0].target, 1);
  EXPECT_EQ(tag_lattice(one_arc("cat", 0.0, 0.4), dog)[0].target, 0);
  const ReferenceTranscript late{"u", {{"cat", 1.0, 3.0}}, true};
  EXPECT_EQ(tag_lattice(one_arc("cat", 0.0, 2.0), late, 0.5)[0].target, 0);
  EXPECT_EQ(tag_lattice(one_arc("cat", 0.0, 2.0), late, 0.3)[0].target, 1);
}

TEST(TagLattice, Errors) {
  const ReferenceTranscript untimed{"u", {{"cat", 0.0, 0.0}}, false};
  try {
    tag_lattice(one_arc("cat", 0, 1), untimed);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingTimings);
  }
  const ReferenceTranscript timed{"u", {{"cat", 0.0, 1.0}}, true};
  EXPECT_THROW(tag_lattice(one_arc("cat", 0, 1), timed, 0.0), Error);
}

TEST(TagLattice, LowerThresholdIsMorePermissive) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int rep = 0; rep < 50; ++rep) {
    const Lattice lat = random_lattice(rng, 8, 10, 3);
    ReferenceTranscript ref{"u", {}, true};
    double t = 0.0;
    for (int i = 0; i < 6; ++i) {
      const double d = u(rng);
      ref.words.push_back({"v" + std::to_string(i % 3), t, t + d});
      t += d;
    }
    const auto loose = tag_lattice(lat, ref, 1e-9);
    const auto strict = tag_lattice(lat, ref, 1.0);
    for (std::size_t i = 0; i < lat.arcs.size(); ++i) {
      if (is_null_word(lat.arcs[i].word)) continue;
      EXPECT_GE(loose[i].target, strict[i].target);
    }
  }
}

}  // namespace
}  // namespace latconf
