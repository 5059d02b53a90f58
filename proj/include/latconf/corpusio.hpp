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

// Readers and writers for every on-disk format, plus per-arc feature
// extraction.
//
//   SLF lattices     header KEY=VALUE lines, `N= L=`, `I= t=`, `J= S= E= W= a= l= p=`
//   CN files         `UTT id`, then `BIN start end` blocks of `ARC word posterior`
//   CTM references   `utt channel start duration word`
//   text references  `utt w1 w2 ...`
//   embeddings       optional `count dim` header, then `token f1 .. fD`
//   targets          `utt arc_id 0|1 method`
//   scores           `utt arc_id confidence`
//   checkpoints      versioned text, every tensor at 17 significant digits

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "latconf/calibrate.hpp"
#include "latconf/error.hpp"
#include "latconf/graph.hpp"
#include "latconf/nncore.hpp"
#include "latconf/text.hpp"

namespace latconf {

// Non-fatal findings of a reader (bin sums off, overlapping references...).
struct Diagnostics {
  std::vector<std::string> warnings;
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag) diag->warnings.push_back(std::move(message));
}

// ---------------------------------------------------------------------------
// SLF

inline Lattice parse_slf(std::istream& in, const std::string& stem = {}) {
  Lattice lat;
  std::optional<std::size_t> n_nodes, n_links;
  std::optional<std::size_t> start, end;
  struct PendingNode {
    double time;
    std::size_t line;
  };
  std::map<std::size_t, PendingNode> nodes;
  struct PendingLink {
    Arc arc;
    std::size_t line;
  };
  std::map<std::size_t, PendingLink> links;

  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tokens = text::split(line);
    std::vector<std::pair<std::string_view, std::string_view>> fields;
    for (auto tok : tokens) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0)
        throw SyntaxError(lineno, "expected KEY=VALUE, got '" + std::string(tok) + "'");
      fields.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    const auto key = fields.front().first;
    if (key == "I") {
      std::optional<std::size_t> id;
      double time = 0.0;
      for (auto [k, v] : fields) {
        if (k == "I") id = text::need_index(v, lineno, "node id");
        else if (k == "t") time = text::need_double(v, lineno, "node time");
      }
      if (!n_nodes) throw SyntaxError(lineno, "node line before N= L= line");
      if (*id >= *n_nodes)
        throw Error(ErrorCode::kCountMismatch,
                    "line " + std::to_string(lineno) + ": node id " + std::to_string(*id) +
                        " but N=" + std::to_string(*n_nodes));
      if (!nodes.emplace(*id, PendingNode{time, lineno}).second)
        throw SyntaxError(lineno, "duplicate node " + std::to_string(*id));
    } else if (key == "J") {
      Arc arc;
      bool has_s = false, has_e = false;
      for (auto [k, v] : fields) {
        if (k == "J") arc.id = text::need_index(v, lineno, "link id");
        else if (k == "S") { arc.start = text::need_index(v, lineno, "start node"); has_s = true; }
        else if (k == "E") { arc.end = text::need_index(v, lineno, "end node"); has_e = true; }
        else if (k == "W") arc.word = std::string(v);
        else if (k == "a") arc.am_score = text::need_double(v, lineno, "acoustic score");
        else if (k == "l") arc.lm_score = text::need_double(v, lineno, "language score");
        else if (k == "p") arc.posterior = text::need_double(v, lineno, "posterior");
      }
      if (!has_s || !has_e) throw SyntaxError(lineno, "link without S= or E=");
      if (!n_links) throw SyntaxError(lineno, "link line before N= L= line");
      if (arc.id >= *n_links)
        throw Error(ErrorCode::kCountMismatch,
                    "line " + std::to_string(lineno) + ": link id " + std::to_string(arc.id) +
                        " but L=" + std::to_string(*n_links));
      if (is_null_word(arc.word)) arc.word = std::string(kNullWord);
      const std::size_t id = arc.id;
      if (!links.emplace(id, PendingLink{std::move(arc), lineno}).second)
        throw SyntaxError(lineno, "duplicate link " + std::to_string(id));
    } else {
      for (auto [k, v] : fields) {
        if (k == "N") n_nodes = text::need_index(v, lineno, "node count");
        else if (k == "L") n_links = text::need_index(v, lineno, "link count");
        else if (k == "UTTERANCE") lat.utterance_id = std::string(v);
        else if (k == "start") start = text::need_index(v, lineno, "start node");
        else if (k == "end") end = text::need_index(v, lineno, "end node");
        else if (k == "VERSION") continue;
        else lat.metadata[std::string(k)] = std::string(v);
      }
    }
  }
  if (!n_nodes || !n_links) throw SyntaxError(lineno + 1, "missing N= L= line");
  if (nodes.size() != *n_nodes)
    throw Error(ErrorCode::kCountMismatch, "N=" + std::to_string(*n_nodes) + " but " +
                                               std::to_string(nodes.size()) + " node lines");
  if (links.size() != *n_links)
    throw Error(ErrorCode::kCountMismatch, "L=" + std::to_string(*n_links) + " but " +
                                               std::to_string(links.size()) + " link lines");
  if (lat.utterance_id.empty()) lat.utterance_id = stem;

  for (const auto& [id, node] : nodes) lat.nodes.push_back({id, node.time});
  std::vector<std::size_t> in_deg(lat.nodes.size(), 0), out_deg(lat.nodes.size(), 0);
  for (auto& [id, link] : links) {
    Arc& arc = link.arc;
    if (arc.start >= lat.nodes.size() || arc.end >= lat.nodes.size())
      throw Error(ErrorCode::kUndefinedNode,
                  "line " + std::to_string(link.line) + ": link " + std::to_string(id) +
                      " references node " +
                      std::to_string(std::max(arc.start, arc.end)) + " with N=" +
                      std::to_string(lat.nodes.size()));
    arc.start_time = lat.nodes[arc.start].time;
    arc.end_time = lat.nodes[arc.end].time;
    ++out_deg[arc.start];
    ++in_deg[arc.end];
    lat.arcs.push_back(std::move(arc));
  }
  auto first_where = [&](const std::vector<std::size_t>& deg, NodeId fallback) {
    for (NodeId n = 0; n < deg.size(); ++n)
      if (deg[n] == 0) return n;
    return fallback;
  };
  if (start && *start >= lat.nodes.size())
    throw Error(ErrorCode::kUndefinedNode, "start=" + std::to_string(*start));
  if (end && *end >= lat.nodes.size())
    throw Error(ErrorCode::kUndefinedNode, "end=" + std::to_string(*end));
  const NodeId last = lat.nodes.empty() ? 0 : lat.nodes.size() - 1;
  lat.initial = start ? *start : first_where(in_deg, 0);
  lat.final = end ? *end : first_where(out_deg, last);
  return lat;
}

inline Lattice parse_slf(std::string_view content, const std::string& stem = {}) {
  std::istringstream in{std::string(content)};
  return parse_slf(in, stem);
}

inline std::string write_slf(const Lattice& lat) {
  std::string out = "VERSION=1.0\n";
  out += "UTTERANCE=" + lat.utterance_id + "\n";
  for (const auto& [k, v] : lat.metadata) out += k + "=" + v + "\n";
  out += text::format("start=%zu\nend=%zu\n", lat.initial, lat.final);
  out += text::format("N=%zu L=%zu\n", lat.nodes.size(), lat.arcs.size());
  for (const auto& n : lat.nodes) out += text::format("I=%zu t=%.2f\n", n.id, n.time);
  for (const auto& a : lat.arcs) {
    const std::string word = is_null_word(a.word) ? std::string(kNullWord) : a.word;
    out += text::format("J=%zu S=%zu E=%zu W=%s a=%.6g l=%.6g p=%.6f\n", a.id, a.start, a.end,
                        word.c_str(), a.am_score, a.lm_score, a.posterior);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Confusion networks

inline ConfusionNetwork parse_cn(std::istream& in, Diagnostics* diag = nullptr,
                                 double bin_tolerance = kDefaultBinTolerance) {
  ConfusionNetwork cn;
  bool have_utt = false;
  std::string raw;
  std::size_t lineno = 0, bin_line = 0;
  auto close_bin = [&]() {
    if (cn.bins.empty()) return;
    const Bin& bin = cn.bins.back();
    if (bin.entries.empty()) throw SyntaxError(bin_line, "BIN without ARC lines");
    double sum = 0.0;
    for (const auto& e : bin.entries) sum += e.posterior;
    if (std::abs(sum - 1.0) > bin_tolerance)
      warn(diag, text::format("%s: bin %zu posteriors sum to %.6f", cn.utterance_id.c_str(),
                              cn.bins.size() - 1, sum));
  };
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::split(line);
    if (tok[0] == "UTT") {
      if (tok.size() != 2 || have_utt) throw SyntaxError(lineno, "malformed or repeated UTT line");
      cn.utterance_id = std::string(tok[1]);
      have_utt = true;
    } else if (tok[0] == "BIN") {
      if (!have_utt) throw SyntaxError(lineno, "BIN before UTT");
      if (tok.size() != 3) throw SyntaxError(lineno, "expected BIN <start> <end>");
      close_bin();
      Bin bin;
      bin.start_time = text::need_double(tok[1], lineno, "bin start");
      bin.end_time = text::need_double(tok[2], lineno, "bin end");
      if (bin.end_time < bin.start_time) throw SyntaxError(lineno, "bin ends before it starts");
      cn.bins.push_back(std::move(bin));
      bin_line = lineno;
    } else if (tok[0] == "ARC") {
      if (cn.bins.empty()) throw SyntaxError(lineno, "ARC before BIN");
      if (tok.size() != 3) throw SyntaxError(lineno, "expected ARC <word> <posterior>");
      const double p = text::need_double(tok[2], lineno, "posterior");
      if (!(p >= 0.0 && p <= 1.0)) throw SyntaxError(lineno, "posterior outside [0,1]");
      cn.bins.back().entries.push_back(
          {is_null_word(tok[1]) ? std::string(kNullWord) : std::string(tok[1]), p});
    } else {
      throw SyntaxError(lineno, "unknown record '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_utt) throw SyntaxError(lineno + 1, "missing UTT line");
  close_bin();
  return cn;
}

inline ConfusionNetwork parse_cn(std::string_view content, Diagnostics* diag = nullptr) {
  std::istringstream in{std::string(content)};
  return parse_cn(in, diag);
}

inline std::string write_cn(const ConfusionNetwork& cn) {
  std::string out = "UTT " + cn.utterance_id + "\n";
  for (const auto& bin : cn.bins) {
    out += text::format("BIN %.2f %.2f\n", bin.start_time, bin.end_time);
    for (const auto& e : bin.entries)
      out += text::format("ARC %s %.6f\n",
                          (is_null_word(e.word) ? std::string(kNullWord) : e.word).c_str(),
                          e.posterior);
  }
  return out;
}

// ---------------------------------------------------------------------------
// References

struct RefWord {
  std::string word;
  double start = 0.0;
  double end = 0.0;

  bool operator==(const RefWord&) const = default;
};

struct ReferenceTranscript {
  std::string utterance_id;
  std::vector<RefWord> words;
  bool timed = false;

  std::vector<std::string> tokens() const {
    std::vector<std::string> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(w.word);
    return out;
  }
  bool operator==(const ReferenceTranscript&) const = default;
};

inline std::vector<ReferenceTranscript> parse_ctm(std::istream& in, Diagnostics* diag = nullptr) {
  std::vector<ReferenceTranscript> out;
  std::unordered_map<std::string, std::size_t> index;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#' || line.starts_with(";;")) continue;
    const auto tok = text::split(line);
    if (tok.size() < 5 || tok.size() > 6)
      throw SyntaxError(lineno, "expected <utt> <channel> <start> <duration> <word>");
    const double start = text::need_double(tok[2], lineno, "start time");
    const double dur = text::need_double(tok[3], lineno, "duration");
    if (dur < 0.0)
      throw Error(ErrorCode::kNegativeDuration,
                  "line " + std::to_string(lineno) + ": duration " + std::string(tok[3]));
    const std::string utt(tok[0]);
    auto [it, fresh] = index.emplace(utt, out.size());
    if (fresh) out.push_back({utt, {}, true});
    out[it->second].words.push_back({std::string(tok[4]), start, start + dur});
  }
  for (auto& ref : out) {
    std::stable_sort(ref.words.begin(), ref.words.end(),
                     [](const RefWord& a, const RefWord& b) { return a.start < b.start; });
    for (std::size_t i = 1; i < ref.words.size(); ++i)
      if (ref.words[i].start < ref.words[i - 1].end - 1e-9)
        warn(diag, text::format("OverlapWarning: %s words %zu and %zu overlap",
                                ref.utterance_id.c_str(), i - 1, i));
  }
  return out;
}

inline std::string write_ctm(const std::vector<ReferenceTranscript>& refs) {
  std::string out;
  for (const auto& ref : refs)
    for (const auto& w : ref.words)
      out += text::format("%s 1 %.2f %.2f %s\n", ref.utterance_id.c_str(), w.start,
                          w.end - w.start, w.word.c_str());
  return out;
}

// Plain-text references: `utt w1 w2 ...`, no timings.
inline std::vector<ReferenceTranscript> parse_references(std::istream& in) {
  std::vector<ReferenceTranscript> out;
  std::string raw;
  while (std::getline(in, raw)) {
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::split(line);
    ReferenceTranscript ref{std::string(tok[0]), {}, false};
    for (std::size_t i = 1; i < tok.size(); ++i) ref.words.push_back({std::string(tok[i]), 0, 0});
    out.push_back(std::move(ref));
  }
  return out;
}

inline std::string write_references(const std::vector<ReferenceTranscript>& refs) {
  std::string out;
  for (const auto& ref : refs) {
    out += ref.utterance_id;
    for (const auto& w : ref.words) out += " " + w.word;
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Embeddings

enum class OovPolicy { kHashVector };

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, Vector> vectors;
  OovPolicy oov_policy = OovPolicy::kHashVector;
};

inline EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string raw;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty()) continue;
    const auto tok = text::split(line);
    if (first) {
      first = false;
      if (tok.size() == 2 && text::to_int(tok[0]) && text::to_int(tok[1])) {
        table.dim = static_cast<std::size_t>(*text::to_int(tok[1]));
        continue;
      }
    }
    if (table.dim == 0) table.dim = tok.size() - 1;
    if (tok.size() != table.dim + 1 || table.dim == 0)
      throw Error(ErrorCode::kDimensionMismatch,
                  "line " + std::to_string(lineno) + ": expected " +
                      std::to_string(table.dim) + " values, got " +
                      std::to_string(tok.size() - 1));
    Vector v(table.dim);
    for (std::size_t i = 0; i < table.dim; ++i)
      v[i] = text::need_double(tok[i + 1], lineno, "embedding value");
    table.vectors[std::string(tok[0])] = std::move(v);
  }
  return table;
}

// Header line, then one row per token in sorted order at 17 significant digits.
inline std::string write_embeddings(const EmbeddingTable& table) {
  std::map<std::string, const Vector*> sorted;
  for (const auto& [token, v] : table.vectors) sorted[token] = &v;
  std::string out = text::format("%zu %zu\n", table.vectors.size(), table.dim);
  for (const auto& [token, v] : sorted) {
    out += token;
    for (double x : *v) out += text::format(" %.17g", x);
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Stored vector, or for unknown tokens a hash-seeded vector in [-0.1, 0.1]
// that is identical across runs and platforms. The null token embeds to 0.
inline Vector embed(const EmbeddingTable& table, std::string_view token) {
  if (is_null_word(token)) return Vector(table.dim, 0.0);
  if (auto it = table.vectors.find(std::string(token)); it != table.vectors.end())
    return it->second;
  Vector v(table.dim);
  std::uint64_t state = detail::fnv1a(token);
  for (double& x : v) {
    const double unit = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-53;
    x = 0.2 * unit - 0.1;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Features

// x = [mapped posterior, duration, embedding (D), am score, lm score]; the
// two scores are present only with use_scores. Values are not normalized.
struct FeatureLayout {
  std::size_t embed_dim = 50;
  bool use_scores = false;

  std::size_t size() const { return 2 + embed_dim + (use_scores ? 2 : 0); }
  bool operator==(const FeatureLayout&) const = default;
};

struct ArcPayload {
  std::string_view word;
  double posterior = 0.0;
  double duration = 0.0;
  double am_score = 0.0;
  double lm_score = 0.0;
};

inline Vector extract_features(const ArcPayload& arc, const CalibrationMapping& mapping,
                               const EmbeddingTable& table, const FeatureLayout& layout) {
  Vector x;
  x.reserve(layout.size());
  x.push_back(apply_mapping(mapping, arc.posterior));
  x.push_back(std::max(0.0, arc.duration));
  if (table.dim != layout.embed_dim)
    throw Error(ErrorCode::kFeatureLayoutMismatch,
                "embedding table has dimension " + std::to_string(table.dim) +
                    ", layout expects " + std::to_string(layout.embed_dim));
  const Vector e = embed(table, arc.word);
  x.insert(x.end(), e.begin(), e.end());
  if (layout.use_scores) {
    x.push_back(arc.am_score);
    x.push_back(arc.lm_score);
  }
  return x;
}

inline Vector extract_features(const Lattice& lat, ArcId arc, const CalibrationMapping& mapping,
                               const EmbeddingTable& table, const FeatureLayout& layout) {
  const Arc& a = lat.arcs.at(arc);
  return extract_features({a.word, a.posterior, a.duration(), a.am_score, a.lm_score}, mapping,
                          table, layout);
}

inline Vector extract_features(const ConfusionNetwork& cn, std::size_t bin, std::size_t entry,
                               const CalibrationMapping& mapping, const EmbeddingTable& table,
                               const FeatureLayout& layout) {
  const Bin& b = cn.bins.at(bin);
  const CnEntry& e = b.entries.at(entry);
  return extract_features({e.word, e.posterior, b.end_time - b.start_time, 0.0, 0.0}, mapping,
                          table, layout);
}

// ---------------------------------------------------------------------------
// Targets and scores

enum class TagMethod { kLevenshtein1Best, kReducedCnc, kOverlap };

inline std::string_view tag_method_name(TagMethod m) {
  switch (m) {
    case TagMethod::kLevenshtein1Best: return "levenshtein_1best";
    case TagMethod::kReducedCnc: return "reduced_cnc";
    case TagMethod::kOverlap: return "overlap";
  }
  return "unknown";
}

inline std::optional<TagMethod> parse_tag_method(std::string_view s) {
  if (s == "levenshtein_1best") return TagMethod::kLevenshtein1Best;
  if (s == "reduced_cnc") return TagMethod::kReducedCnc;
  if (s == "overlap") return TagMethod::kOverlap;
  return std::nullopt;
}

struct TargetTag {
  ArcId arc_id = 0;
  int target = 0;
  TagMethod method = TagMethod::kLevenshtein1Best;

  bool operator==(const TargetTag&) const = default;
};

struct TargetRecord {
  std::string utterance_id;
  TargetTag tag;
};

struct ScoreRecord {
  std::string utterance_id;
  ArcId arc_id = 0;
  double confidence = 0.0;
};

inline std::vector<TargetRecord> parse_targets(std::istream& in) {
  std::vector<TargetRecord> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::split(line);
    if (tok.size() != 4) throw SyntaxError(lineno, "expected <utt> <arc_id> <0|1> <method>");
    const auto target = text::to_int(tok[2]);
    const auto method = parse_tag_method(tok[3]);
    if (!target || (*target != 0 && *target != 1)) throw SyntaxError(lineno, "target not 0/1");
    if (!method) throw SyntaxError(lineno, "unknown tagging method");
    out.push_back({std::string(tok[0]),
                   {text::need_index(tok[1], lineno, "arc id"), static_cast<int>(*target),
                    *method}});
  }
  return out;
}

inline std::string write_targets(const std::vector<TargetRecord>& records) {
  std::string out;
  for (const auto& r : records)
    out += text::format("%s %zu %d %s\n", r.utterance_id.c_str(), r.tag.arc_id, r.tag.target,
                        std::string(tag_method_name(r.tag.method)).c_str());
  return out;
}

inline std::vector<ScoreRecord> parse_scores(std::istream& in) {
  std::vector<ScoreRecord> out;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string_view line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto tok = text::split(line);
    if (tok.size() != 3) throw SyntaxError(lineno, "expected <utt> <arc_id> <confidence>");
    out.push_back({std::string(tok[0]), text::need_index(tok[1], lineno, "arc id"),
                   text::need_double(tok[2], lineno, "confidence")});
  }
  return out;
}

inline std::string write_scores(const std::vector<ScoreRecord>& records) {
  std::string out;
  for (const auto& r : records)
    out += text::format("%s %zu %.10f\n", r.utterance_id.c_str(), r.arc_id, r.confidence);
  return out;
}

// ---------------------------------------------------------------------------
// Calibration mapping table

inline std::string_view interpolation_name(Interpolation m) {
  switch (m) {
    case Interpolation::kIdentity: return "identity";
    case Interpolation::kStep: return "step";
    case Interpolation::kLinear: return "linear";
  }
  return "identity";
}

inline std::optional<Interpolation> parse_interpolation(std::string_view s) {
  if (s == "identity") return Interpolation::kIdentity;
  if (s == "step") return Interpolation::kStep;
  if (s == "linear") return Interpolation::kLinear;
  return std::nullopt;
}

// `mapping <mode> <intervals> <tilt>` then one `<lo> <hi> <value> <weight>`
// line per interval.
inline std::string write_mapping(const CalibrationMapping& m) {
  std::string out = text::format("mapping %s %zu %.17g\n",
                                 std::string(interpolation_name(m.mode)).c_str(),
                                 m.values.size(), m.tilt);
  for (std::size_t k = 0; k < m.values.size(); ++k)
    out += text::format("%.17g %.17g %.17g %.17g\n", m.breakpoints[k], m.breakpoints[k + 1],
                        m.values[k], k < m.weights.size() ? m.weights[k] : 0.0);
  return out;
}

namespace detail {

inline bool next_content_line(std::istream& in, std::string& raw, std::size_t& lineno) {
  while (std::getline(in, raw)) {
    ++lineno;
    auto t = text::trim(raw);
    if (!t.empty() && t.front() != '#') return true;
  }
  return false;
}

inline CalibrationMapping read_mapping_body(std::istream& in, std::string_view header,
                                            std::size_t& lineno) {
  const auto tok = text::split(header);
  if (tok.size() != 4 || tok[0] != "mapping") throw SyntaxError(lineno, "expected mapping header");
  CalibrationMapping m;
  const auto mode = parse_interpolation(tok[1]);
  if (!mode) throw SyntaxError(lineno, "unknown interpolation mode");
  m.mode = *mode;
  const std::size_t k = text::need_index(tok[2], lineno, "interval count");
  m.tilt = text::need_double(tok[3], lineno, "tilt");
  std::string raw;
  for (std::size_t i = 0; i < k; ++i) {
    if (!next_content_line(in, raw, lineno)) throw SyntaxError(lineno + 1, "truncated mapping");
    const auto row = text::split(raw);
    if (row.size() != 4) throw SyntaxError(lineno, "expected <lo> <hi> <value> <weight>");
    if (i == 0) m.breakpoints.push_back(text::need_double(row[0], lineno, "breakpoint"));
    m.breakpoints.push_back(text::need_double(row[1], lineno, "breakpoint"));
    m.values.push_back(text::need_double(row[2], lineno, "value"));
    m.weights.push_back(text::need_double(row[3], lineno, "weight"));
  }
  return m;
}

}  // namespace detail

inline CalibrationMapping parse_mapping(std::istream& in) {
  std::string raw;
  std::size_t lineno = 0;
  if (!detail::next_content_line(in, raw, lineno)) throw SyntaxError(1, "empty mapping file");
  return detail::read_mapping_body(in, text::trim(raw), lineno);
}

// ---------------------------------------------------------------------------
// Model checkpoints

inline constexpr int kCheckpointVersion = 1;

inline std::string_view cell_name(CellType c) { return c == CellType::kGated ? "gated" : "simple"; }
inline std::optional<CellType> parse_cell(std::string_view s) {
  if (s == "gated") return CellType::kGated;
  if (s == "simple") return CellType::kSimple;
  return std::nullopt;
}

inline std::string_view merge_name(MergeMethod m) {
  switch (m) {
    case MergeMethod::kMax: return "max";
    case MergeMethod::kMean: return "mean";
    case MergeMethod::kPosterior: return "posterior";
    case MergeMethod::kAttention: return "attention";
  }
  return "attention";
}
inline std::optional<MergeMethod> parse_merge(std::string_view s) {
  if (s == "max") return MergeMethod::kMax;
  if (s == "mean") return MergeMethod::kMean;
  if (s == "posterior") return MergeMethod::kPosterior;
  if (s == "attention") return MergeMethod::kAttention;
  return std::nullopt;
}

inline std::string_view activation_name(AttentionActivation a) {
  switch (a) {
    case AttentionActivation::kLogistic: return "logistic";
    case AttentionActivation::kTanh: return "tanh";
    case AttentionActivation::kIdentity: return "identity";
  }
  return "logistic";
}
inline std::optional<AttentionActivation> parse_activation(std::string_view s) {
  if (s == "logistic") return AttentionActivation::kLogistic;
  if (s == "tanh") return AttentionActivation::kTanh;
  if (s == "identity") return AttentionActivation::kIdentity;
  return std::nullopt;
}

// Everything besides the weights that predict() needs to reproduce a run.
struct ModelMetadata {
  std::string mode = "cn";  // seq | cn | lat
  MergeMethod merge = MergeMethod::kAttention;
  AttentionActivation activation = AttentionActivation::kLogistic;
  FeatureLayout features;
  CalibrationMapping mapping;
  // Free-form provenance (seed, split, selected epoch, init scheme, ...).
  std::map<std::string, std::string> info;

  bool operator==(const ModelMetadata&) const = default;
};

struct Checkpoint {
  ModelParams params;
  ModelMetadata meta;
};

inline std::string write_checkpoint(const ModelParams& params, const ModelMetadata& meta) {
  const ModelDims& d = params.dims();
  std::string out = text::format("latconf-checkpoint %d\n", kCheckpointVersion);
  out += "mode " + meta.mode + "\n";
  out += "cell " + std::string(cell_name(d.cell)) + "\n";
  out += "merge " + std::string(merge_name(meta.merge)) + "\n";
  out += "attention_activation " + std::string(activation_name(meta.activation)) + "\n";
  out += text::format("input_dim %zu\nhidden_dim %zu\nff_dim %zu\n", d.input, d.hidden, d.ff);
  out += text::format("embed_dim %zu\nuse_scores %d\n", meta.features.embed_dim,
                      meta.features.use_scores ? 1 : 0);
  out += "feature_layout posterior,duration,embedding";
  out += meta.features.use_scores ? ",am,lm\n" : "\n";
  for (const auto& [k, v] : meta.info) out += "info " + k + " " + v + "\n";
  out += write_mapping(meta.mapping);
  for (const auto& t : params.tensors()) {
    out += text::format("tensor %s %zu %zu\n", t.name.c_str(), t.rows, t.cols);
    const auto flat = params.flat();
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t c = 0; c < t.cols; ++c) {
        if (c) out += ' ';
        out += text::format("%.17g", flat[t.offset + r * t.cols + c]);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

inline Checkpoint parse_checkpoint(std::istream& in) {
  std::string raw;
  std::size_t lineno = 0;
  if (!detail::next_content_line(in, raw, lineno)) throw SyntaxError(1, "empty checkpoint");
  {
    const auto tok = text::split(raw);
    if (tok.size() != 2 || tok[0] != "latconf-checkpoint")
      throw SyntaxError(lineno, "not a latconf checkpoint");
    const auto version = text::to_int(tok[1]);
    if (!version || *version != kCheckpointVersion)
      throw Error(ErrorCode::kVersionMismatch, "checkpoint version '" + std::string(tok[1]) +
                                                   "', expected " +
                                                   std::to_string(kCheckpointVersion));
  }
  ModelMetadata meta;
  ModelDims dims;
  bool have_mapping = false;
  // Header records until the first tensor.
  while (true) {
    if (!detail::next_content_line(in, raw, lineno)) throw SyntaxError(lineno + 1, "truncated checkpoint");
    const auto tok = text::split(raw);
    const auto key = tok[0];
    if (key == "tensor") break;
    if (key == "mapping") {
      meta.mapping = detail::read_mapping_body(in, text::trim(raw), lineno);
      have_mapping = true;
      continue;
    }
    if (key == "info") {
      if (tok.size() < 3) throw SyntaxError(lineno, "malformed info record");
      const auto key_end = static_cast<std::size_t>(tok[1].data() - raw.data()) + tok[1].size();
      std::string_view rest = text::trim(std::string_view(raw).substr(key_end));
      meta.info[std::string(tok[1])] = std::string(rest);
      continue;
    }
    if (tok.size() != 2) throw SyntaxError(lineno, "malformed header record");
    const auto val = tok[1];
    if (key == "mode") meta.mode = std::string(val);
    else if (key == "cell") {
      auto c = parse_cell(val);
      if (!c) throw SyntaxError(lineno, "unknown cell type");
      dims.cell = *c;
    } else if (key == "merge") {
      auto m = parse_merge(val);
      if (!m) throw SyntaxError(lineno, "unknown merge method");
      meta.merge = *m;
    } else if (key == "attention_activation") {
      auto a = parse_activation(val);
      if (!a) throw SyntaxError(lineno, "unknown attention activation");
      meta.activation = *a;
    } else if (key == "input_dim") dims.input = text::need_index(val, lineno, "input_dim");
    else if (key == "hidden_dim") dims.hidden = text::need_index(val, lineno, "hidden_dim");
    else if (key == "ff_dim") dims.ff = text::need_index(val, lineno, "ff_dim");
    else if (key == "embed_dim") meta.features.embed_dim = text::need_index(val, lineno, "embed_dim");
    else if (key == "use_scores") meta.features.use_scores = val == "1";
    else if (key == "feature_layout") continue;
    else throw SyntaxError(lineno, "unknown header record '" + std::string(key) + "'");
  }
  if (!have_mapping) throw SyntaxError(lineno, "checkpoint has no mapping record");
  if (meta.features.size() != dims.input)
    throw Error(ErrorCode::kShapeMismatch, "feature layout implies " +
                                               std::to_string(meta.features.size()) +
                                               " inputs, checkpoint declares " +
                                               std::to_string(dims.input));
  ModelParams params(dims);
  auto flat = params.flat();
  const auto& tensors = params.tensors();
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    const auto& t = tensors[ti];
    if (ti > 0 && !detail::next_content_line(in, raw, lineno))
      throw SyntaxError(lineno + 1, "truncated checkpoint");
    const auto tok = text::split(raw);
    if (tok.size() != 4 || tok[0] != "tensor") throw SyntaxError(lineno, "expected tensor record");
    const std::size_t rows = text::need_index(tok[2], lineno, "rows");
    const std::size_t cols = text::need_index(tok[3], lineno, "cols");
    if (tok[1] != t.name || rows != t.rows || cols != t.cols)
      throw Error(ErrorCode::kShapeMismatch,
                  "line " + std::to_string(lineno) + ": tensor " + std::string(tok[1]) + " " +
                      std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                      t.name + " " + std::to_string(t.rows) + "x" + std::to_string(t.cols));
    for (std::size_t r = 0; r < t.rows; ++r) {
      if (!detail::next_content_line(in, raw, lineno))
        throw SyntaxError(lineno + 1, "truncated tensor " + t.name);
      const auto vals = text::split(raw);
      if (vals.size() != t.cols)
        throw Error(ErrorCode::kShapeMismatch, "line " + std::to_string(lineno) + ": tensor " +
                                                   t.name + " row has " +
                                                   std::to_string(vals.size()) + " values");
      for (std::size_t c = 0; c < t.cols; ++c)
        flat[t.offset + r * t.cols + c] = text::need_double(vals[c], lineno, "weight");
    }
  }
  if (!detail::next_content_line(in, raw, lineno) || text::trim(raw) != "end")
    throw SyntaxError(lineno + 1, "missing end record");
  return {std::move(params), std::move(meta)};
}

inline Checkpoint parse_checkpoint(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_checkpoint(in);
}

inline void save_model(const std::string& path, const ModelParams& params,
                       const ModelMetadata& meta) {
  text::write_file(path, write_checkpoint(params, meta));
}

inline Checkpoint load_model(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return parse_checkpoint(in);
}

// ---------------------------------------------------------------------------
// Corpus directories: refs.ctm, refs.txt, cn/*.cn, lat/*.slf

struct Corpus {
  std::vector<ReferenceTranscript> timed_refs;  // refs.ctm
  std::vector<ReferenceTranscript> text_refs;   // refs.txt
  std::vector<ConfusionNetwork> cns;
  std::vector<Lattice> lattices;
  std::optional<EmbeddingTable> embeddings;     // embeddings.txt, when present
};

inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     std::string_view ext) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<ConfusionNetwork> read_cns(const std::filesystem::path& path,
                                              Diagnostics* diag = nullptr) {
  std::vector<ConfusionNetwork> out;
  const auto files = std::filesystem::is_directory(path) ? list_files(path, ".cn")
                                                          : std::vector{path};
  for (const auto& f : files) {
    std::istringstream in(text::read_file(f.string()));
    out.push_back(parse_cn(in, diag));
  }
  return out;
}

inline std::vector<Lattice> read_lattices(const std::filesystem::path& path) {
  std::vector<Lattice> out;
  const auto files = std::filesystem::is_directory(path) ? list_files(path, ".slf")
                                                          : std::vector{path};
  for (const auto& f : files) {
    std::istringstream in(text::read_file(f.string()));
    out.push_back(parse_slf(in, f.stem().string()));
  }
  return out;
}

inline Corpus read_corpus(const std::filesystem::path& dir, Diagnostics* diag = nullptr) {
  Corpus c;
  if (std::filesystem::exists(dir / "refs.ctm")) {
    std::istringstream in(text::read_file((dir / "refs.ctm").string()));
    c.timed_refs = parse_ctm(in, diag);
  }
  if (std::filesystem::exists(dir / "refs.txt")) {
    std::istringstream in(text::read_file((dir / "refs.txt").string()));
    c.text_refs = parse_references(in);
  }
  c.cns = read_cns(dir / "cn", diag);
  c.lattices = read_lattices(dir / "lat");
  if (std::filesystem::exists(dir / "embeddings.txt")) {
    std::istringstream in(text::read_file((dir / "embeddings.txt").string()));
    c.embeddings = parse_embeddings(in);
  }
  return c;
}

inline void write_corpus(const std::filesystem::path& dir, const Corpus& c) {
  std::filesystem::create_directories(dir / "cn");
  std::filesystem::create_directories(dir / "lat");
  text::write_file((dir / "refs.ctm").string(), write_ctm(c.timed_refs));
  text::write_file((dir / "refs.txt").string(), write_references(c.text_refs));
  for (const auto& cn : c.cns)
    text::write_file((dir / "cn" / (cn.utterance_id + ".cn")).string(), write_cn(cn));
  for (const auto& lat : c.lattices)
    text::write_file((dir / "lat" / (lat.utterance_id + ".slf")).string(), write_slf(lat));
  if (c.embeddings)
    text::write_file((dir / "embeddings.txt").string(), write_embeddings(*c.embeddings));
}

}  // namespace latconf
