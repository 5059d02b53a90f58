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

// Seeded synthetic corpora: timed references, confusion networks and
// lattices built from them.
//
// Each reference word yields one bin. Whether the bin is in error follows a
// two-state Markov chain whose stationary error rate is p_sub + p_del and
// whose lag-one correlation is `error_correlation`, so errors come in
// bursts. Bin entries get Gaussian scores and posteriors are a temperature
// softmax of those scores:
//
//   correct      the reference word wins by a margin in [0.2, 3]
//   substitution the reference word is absent; a distractor wins, and with
//                probability `trap_rate` it is a "trap" word winning by a
//                correct-sized margin
//   deletion     !NULL wins; the reference word is present but loses
//   insertion    an extra 0.1 s bin after a word; a distractor wins, !NULL
//                is present
//
// Trap words are a fixed random subset of the vocabulary that never occurs
// in references. When one wins a bin its posterior looks like that of a
// correct word, which only word identity can undo.
// Lattices add skip arcs over pairs of adjacent bins, taking a share of the
// covered arcs' posterior mass.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/graph.hpp"
#include "latconf/text.hpp"

namespace latconf {

struct SynthConfig {
  std::size_t vocab_size = 50;
  std::size_t utterances = 500;
  std::size_t min_length = 6;
  std::size_t max_length = 14;
  double p_sub = 0.25;
  double p_ins = 0.03;
  double p_del = 0.03;
  std::size_t depth = 3;       // maximum entries per bin
  double temperature = 0.5;    // softmax temperature; lower is sharper
  double error_correlation = 0.3;
  double trap_fraction = 0.2;
  double trap_rate = 0.6;
  double skip_rate = 0.3;      // chance to start a skip arc at each bin pair
  std::uint64_t seed = 1;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0))
        throw Error(ErrorCode::kConfig, std::string(name) + " must lie in [0, 1]");
    };
    prob(p_sub, "p_sub");
    prob(p_ins, "p_ins");
    prob(p_del, "p_del");
    prob(error_correlation, "error_correlation");
    prob(trap_fraction, "trap_fraction");
    prob(trap_rate, "trap_rate");
    prob(skip_rate, "skip_rate");
    if (p_sub + p_ins + p_del >= 1.0)
      throw Error(ErrorCode::kConfig, "error probabilities must sum to less than 1");
    if (depth == 0) throw Error(ErrorCode::kConfig, "depth must be at least 1");
    if (vocab_size < depth) throw Error(ErrorCode::kConfig, "vocab_size must be >= depth");
    if (vocab_size < 2 && p_sub > 0.0)
      throw Error(ErrorCode::kConfig, "substitutions need at least two vocabulary words");
    if (std::round(trap_fraction * static_cast<double>(vocab_size)) >=
        static_cast<double>(vocab_size))
      throw Error(ErrorCode::kConfig, "trap_fraction leaves no words for references");
    if (utterances == 0) throw Error(ErrorCode::kConfig, "utterances must be positive");
    if (min_length == 0 || min_length > max_length)
      throw Error(ErrorCode::kConfig, "need 1 <= min_length <= max_length");
    if (!(temperature > 0.0)) throw Error(ErrorCode::kConfig, "temperature must be positive");
  }
};

// Reads `key = value` text; unknown keys are rejected.
inline SynthConfig parse_synth_config(std::istream& in) {
  SynthConfig c;
  for (const auto& [key, value] : text::parse_key_values(in)) {
    auto num = [&](const std::string& v) {
      const auto d = text::to_double(v);
      if (!d) throw Error(ErrorCode::kConfig, "bad value for " + key + ": '" + v + "'");
      return *d;
    };
    auto count = [&](const std::string& v) {
      const auto i = text::to_int(v);
      if (!i || *i < 0) throw Error(ErrorCode::kConfig, "bad value for " + key + ": '" + v + "'");
      return static_cast<std::size_t>(*i);
    };
    if (key == "vocab_size" || key == "V") c.vocab_size = count(value);
    else if (key == "utterances" || key == "N") c.utterances = count(value);
    else if (key == "min_length") c.min_length = count(value);
    else if (key == "max_length") c.max_length = count(value);
    else if (key == "p_sub") c.p_sub = num(value);
    else if (key == "p_ins") c.p_ins = num(value);
    else if (key == "p_del") c.p_del = num(value);
    else if (key == "depth") c.depth = count(value);
    else if (key == "temperature") c.temperature = num(value);
    else if (key == "error_correlation") c.error_correlation = num(value);
    else if (key == "trap_fraction") c.trap_fraction = num(value);
    else if (key == "trap_rate") c.trap_rate = num(value);
    else if (key == "skip_rate") c.skip_rate = num(value);
    else if (key == "seed") c.seed = count(value);
    else throw Error(ErrorCode::kConfig, "unknown synth key '" + key + "'");
  }
  c.validate();
  return c;
}

inline std::string vocab_word(std::size_t i) { return text::format("w%02zu", i); }

namespace detail {

// Values pass through their file representation so that write/parse
// round trips are exact.
inline double snap(const char* fmt, double v) { return *text::to_double(text::format(fmt, v)); }

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : gen_(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  bool chance(double p) { return uniform(0.0, 1.0) < p; }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(gen_); }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

enum class BinKind { kCorrect, kSubstitution, kDeletion, kInsertion };

struct Scored {
  std::string word;
  double score;
};

}  // namespace detail

class SynthGenerator {
 public:
  explicit SynthGenerator(const SynthConfig& config) : cfg_(config), rng_(config.seed) {
    cfg_.validate();
    std::vector<std::size_t> ids(cfg_.vocab_size);
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
    std::shuffle(ids.begin(), ids.end(), rng_.engine());
    const auto traps = static_cast<std::size_t>(
        std::round(cfg_.trap_fraction * static_cast<double>(cfg_.vocab_size)));
    trap_.assign(cfg_.vocab_size, false);
    for (std::size_t i = 0; i < traps; ++i) trap_[ids[i]] = true;
    for (std::size_t i = 0; i < cfg_.vocab_size; ++i)
      (trap_[i] ? trap_words_ : spoken_words_).push_back(i);
  }

  bool is_trap(std::size_t word) const { return trap_[word]; }

  Corpus generate() {
    Corpus c;
    for (std::size_t u = 0; u < cfg_.utterances; ++u) {
      ReferenceTranscript ref;
      ConfusionNetwork cn;
      generate_utterance(text::format("utt%04zu", u), ref, cn);
      ReferenceTranscript plain = ref;
      plain.timed = false;
      for (auto& w : plain.words) w.start = w.end = 0.0;
      c.timed_refs.push_back(ref);
      c.text_refs.push_back(std::move(plain));
      c.lattices.push_back(make_lattice(cn));
      c.cns.push_back(std::move(cn));
    }
    return c;
  }

 private:
  void generate_utterance(const std::string& id, ReferenceTranscript& ref, ConfusionNetwork& cn) {
    ref.utterance_id = id;
    ref.timed = true;
    cn.utterance_id = id;
    const std::size_t length =
        cfg_.min_length + rng_.index(cfg_.max_length - cfg_.min_length + 1);
    const double err = cfg_.p_sub + cfg_.p_del;
    const double rho = cfg_.error_correlation;
    bool in_error = rng_.chance(err);
    long centis = 0;  // running time in hundredths of a second
    for (std::size_t i = 0; i < length; ++i) {
      if (i > 0) in_error = rng_.chance(in_error ? rho + (1.0 - rho) * err : (1.0 - rho) * err);
      const std::size_t word = spoken_words_[rng_.index(spoken_words_.size())];
      const long dur = std::lround(100.0 * (0.3 + rng_.uniform(-0.05, 0.05)));
      const double start = static_cast<double>(centis) / 100.0;
      const double end = static_cast<double>(centis + dur) / 100.0;
      ref.words.push_back({vocab_word(word), start, end});
      detail::BinKind kind = detail::BinKind::kCorrect;
      if (in_error)
        kind = rng_.chance(cfg_.p_sub / err) ? detail::BinKind::kSubstitution
                                             : detail::BinKind::kDeletion;
      cn.bins.push_back(make_bin(kind, word, start, end));
      centis += dur;
      if (rng_.chance(cfg_.p_ins)) {
        const double s = static_cast<double>(centis) / 100.0;
        const double e = static_cast<double>(centis + 10) / 100.0;
        cn.bins.push_back(make_bin(detail::BinKind::kInsertion, word, s, e));
        centis += 10;
      }
    }
  }

  // Distinct vocabulary indices avoiding `exclude`.
  std::vector<std::size_t> distractors(std::size_t count, const std::vector<std::size_t>& exclude) {
    std::vector<std::size_t> pool;
    for (std::size_t w = 0; w < cfg_.vocab_size; ++w)
      if (std::find(exclude.begin(), exclude.end(), w) == exclude.end()) pool.push_back(w);
    std::shuffle(pool.begin(), pool.end(), rng_.engine());
    pool.resize(std::min(count, pool.size()));
    return pool;
  }

  Bin make_bin(detail::BinKind kind, std::size_t ref_word, double start, double end) {
    using detail::BinKind;
    std::size_t k = 1 + rng_.index(cfg_.depth);
    if (kind == BinKind::kDeletion || kind == BinKind::kInsertion) k = std::max<std::size_t>(k, 2);
    std::vector<detail::Scored> entries;
    double margin = rng_.uniform(0.2, 3.0);

    std::string winner;
    std::vector<std::size_t> used{ref_word};
    switch (kind) {
      case BinKind::kCorrect:
        winner = vocab_word(ref_word);
        break;
      case BinKind::kDeletion:
        winner = std::string(kNullWord);
        break;
      case BinKind::kSubstitution:
      case BinKind::kInsertion: {
        std::size_t w;
        if (kind == BinKind::kSubstitution && !trap_words_.empty() && rng_.chance(cfg_.trap_rate) &&
            !(trap_words_.size() == 1 && trap_words_[0] == ref_word)) {
          do w = trap_words_[rng_.index(trap_words_.size())]; while (w == ref_word);
        } else {
          const auto d = distractors(1, used);
          w = d.empty() ? ref_word : d[0];
          margin = rng_.uniform(0.0, 1.5);
        }
        used.push_back(w);
        winner = vocab_word(w);
        break;
      }
    }

    // Losing entries.
    std::vector<std::string> losers;
    if (kind == BinKind::kDeletion) losers.push_back(vocab_word(ref_word));
    if (kind == BinKind::kInsertion) losers.push_back(std::string(kNullWord));
    const bool room_for_null = kind == BinKind::kCorrect || kind == BinKind::kSubstitution;
    if (room_for_null && k > 1 && rng_.chance(0.3)) losers.push_back(std::string(kNullWord));
    if (losers.size() + 1 < k)
      for (std::size_t w : distractors(k - 1 - losers.size(), used)) losers.push_back(vocab_word(w));

    double best_loser = -1e300;
    for (const auto& w : losers) {
      const double s = rng_.normal();
      best_loser = std::max(best_loser, s);
      entries.push_back({w, s});
    }
    const double top = (losers.empty() ? 0.0 : best_loser) + margin;
    entries.insert(entries.begin() + static_cast<long>(rng_.index(entries.size() + 1)),
                   {winner, top});

    // Temperature softmax, rounded to file precision. The rounding residual
    // goes to the winner so each bin still sums to 1 up to 1e-6.
    double mx = -1e300;
    for (const auto& e : entries) mx = std::max(mx, e.score);
    double z = 0.0;
    for (const auto& e : entries) z += std::exp((e.score - mx) / cfg_.temperature);
    Bin bin{start, end, {}};
    double rest = 0.0;
    std::size_t win_index = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const double p = detail::snap("%.6f", std::exp((entries[i].score - mx) / cfg_.temperature) / z);
      bin.entries.push_back({entries[i].word, p});
      if (entries[i].word == winner) win_index = i;
      else rest += p;
    }
    bin.entries[win_index].posterior = detail::snap("%.6f", std::max(0.0, 1.0 - rest));
    return bin;
  }

  Lattice make_lattice(const ConfusionNetwork& cn) {
    Lattice lat = cn_to_lattice(cn);
    const auto offsets = cn_bin_offsets(cn);
    for (auto& a : lat.arcs) {
      const double dur = a.end_time - a.start_time;
      a.am_score = detail::snap("%.6g", -100.0 * dur * rng_.uniform(5.0, 15.0));
      a.lm_score = detail::snap("%.6g", -rng_.uniform(1.0, 8.0));
    }
    const std::size_t bins = cn.bins.size();
    for (std::size_t t = 0; t + 1 < bins;) {
      if (!rng_.chance(cfg_.skip_rate)) {
        ++t;
        continue;
      }
      const double share = rng_.uniform(0.05, 0.2);
      for (ArcId a = offsets[t]; a < offsets[t + 2]; ++a)
        lat.arcs[a].posterior = detail::snap("%.6f", lat.arcs[a].posterior * (1.0 - share));
      Arc skip;
      skip.id = lat.arcs.size();
      skip.start = t;
      skip.end = t + 2;
      skip.word = vocab_word(rng_.index(cfg_.vocab_size));
      skip.start_time = lat.nodes[t].time;
      skip.end_time = lat.nodes[t + 2].time;
      skip.posterior = detail::snap("%.6f", share);
      skip.am_score = detail::snap("%.6g", -100.0 * (skip.end_time - skip.start_time) *
                                               rng_.uniform(5.0, 15.0));
      skip.lm_score = detail::snap("%.6g", -rng_.uniform(1.0, 8.0));
      lat.arcs.push_back(std::move(skip));
      t += 2;
    }
    for (auto& n : lat.nodes) n.time = detail::snap("%.2f", n.time);
    for (auto& a : lat.arcs) {
      a.start_time = lat.nodes[a.start].time;
      a.end_time = lat.nodes[a.end].time;
    }
    return lat;
  }

  SynthConfig cfg_;
  detail::SynthRng rng_;
  std::vector<bool> trap_;
  std::vector<std::size_t> trap_words_;
  std::vector<std::size_t> spoken_words_;
};

inline Corpus gen_corpus(const SynthConfig& config) { return SynthGenerator(config).generate(); }

}  // namespace latconf
