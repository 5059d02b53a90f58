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

// Training and evaluation over tagged corpora.
//
// Training is per-utterance SGD with global-norm clipping. The order of the
// training utterances is reshuffled every epoch from seed + epoch. After
// each epoch the validation NCE decides model selection: an improvement
// keeps the parameters, a miss halves the learning rate, and `patience`
// consecutive misses stop training.
//
// With several workers each epoch's order is dealt round-robin into
// disjoint shards. Workers copy the shared parameters, compute a gradient
// on that copy and write their update back element by element with relaxed
// atomic loads and stores, without locks. A single worker follows exactly
// the same arithmetic as plain sequential SGD.

#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latconf/calibrate.hpp"
#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/metrics.hpp"
#include "latconf/nncore.hpp"
#include "latconf/propagate.hpp"
#include "latconf/tagging.hpp"
#include "latconf/text.hpp"

namespace latconf {

// ---------------------------------------------------------------------------
// Modes and conditions

enum class GraphMode { kSequence, kCn, kLattice };

inline std::string_view mode_name(GraphMode m) {
  switch (m) {
    case GraphMode::kSequence: return "seq";
    case GraphMode::kCn: return "cn";
    case GraphMode::kLattice: return "lat";
  }
  return "?";
}

inline std::optional<GraphMode> parse_mode(std::string_view s) {
  if (s == "seq" || s == "sequence") return GraphMode::kSequence;
  if (s == "cn") return GraphMode::kCn;
  if (s == "lat" || s == "lattice") return GraphMode::kLattice;
  return std::nullopt;
}

// Evaluation condition scored by each mode.
inline std::string_view condition_name(GraphMode m) {
  switch (m) {
    case GraphMode::kSequence: return "1best_cn";
    case GraphMode::kCn: return "all_cn";
    case GraphMode::kLattice: return "all_lattice";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tagging a whole corpus

inline std::map<std::string, const ReferenceTranscript*> index_references(
    const std::vector<ReferenceTranscript>& refs) {
  std::map<std::string, const ReferenceTranscript*> out;
  for (const auto& r : refs) out[r.utterance_id] = &r;
  return out;
}

// Targets for every scoreable arc of the corpus in the given mode.
// Sequence and CN tagging only need word references; lattice tagging needs
// timed ones.
inline std::vector<TargetRecord> tag_corpus(const Corpus& corpus, GraphMode mode,
                                            double overlap_threshold = kDefaultOverlapThreshold) {
  const auto& refs = mode == GraphMode::kLattice || corpus.text_refs.empty() ? corpus.timed_refs
                                                                             : corpus.text_refs;
  const auto index = index_references(refs);
  auto find = [&](const std::string& id) -> const ReferenceTranscript& {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorCode::kIo, "no reference for utterance '" + id + "'");
    return *it->second;
  };
  std::vector<TargetRecord> out;
  if (mode == GraphMode::kLattice) {
    for (const auto& lat : corpus.lattices)
      for (const auto& t : tag_lattice(lat, find(lat.utterance_id), overlap_threshold))
        out.push_back({lat.utterance_id, t});
    return out;
  }
  for (const auto& cn : corpus.cns) {
    const auto ref = find(cn.utterance_id).tokens();
    const auto tags = mode == GraphMode::kCn ? tag_cn(cn, ref) : tag_one_best(cn, ref);
    for (const auto& t : tags) out.push_back({cn.utterance_id, t});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

// "8:1:1" style ratios, normalized to sum to 1.
inline std::optional<SplitRatios> parse_split_ratios(std::string_view v) {
  std::vector<double> parts;
  std::size_t pos = 0;
  while (true) {
    const auto next = v.find(':', pos);
    const auto d = text::to_double(text::trim(v.substr(pos, next == v.npos ? v.npos : next - pos)));
    if (!d || *d < 0.0) return std::nullopt;
    parts.push_back(*d);
    if (next == v.npos) break;
    pos = next + 1;
  }
  const double sum = parts.size() == 3 ? parts[0] + parts[1] + parts[2] : 0.0;
  if (!(sum > 0.0)) return std::nullopt;
  return SplitRatios{parts[0] / sum, parts[1] / sum, parts[2] / sum};
}

struct CorpusSplit {
  std::vector<std::size_t> train, valid, test;  // indices into the utterance list
};

inline CorpusSplit split_corpus(std::size_t utterances, const SplitRatios& r, std::uint64_t seed) {
  if (utterances == 0) throw Error(ErrorCode::kEmptyCorpus, "cannot split an empty corpus");
  if (!(r.train > 0.0 && r.valid > 0.0 && r.test > 0.0))
    throw Error(ErrorCode::kZeroPartition, "every split ratio must be positive");
  if (std::abs(r.train + r.valid + r.test - 1.0) > 1e-9)
    throw Error(ErrorCode::kConfig, "split ratios must sum to 1");
  const auto n = static_cast<double>(utterances);
  const auto n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r.valid * n)));
  const auto n_test = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(r.test * n)));
  if (n_valid + n_test >= utterances)
    throw Error(ErrorCode::kZeroPartition,
                "corpus of " + std::to_string(utterances) + " utterances leaves no training data");
  std::vector<std::size_t> order(utterances);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  CorpusSplit s;
  const std::size_t n_train = utterances - n_valid - n_test;
  s.train.assign(order.begin(), order.begin() + static_cast<long>(n_train));
  s.valid.assign(order.begin() + static_cast<long>(n_train),
                 order.begin() + static_cast<long>(n_train + n_valid));
  s.test.assign(order.begin() + static_cast<long>(n_train + n_valid), order.end());
  return s;
}

// ---------------------------------------------------------------------------
// Examples

struct Example {
  GraphInput input;
  Vector targets;  // per local arc
};

inline void remap_posterior_feature(GraphInput& in, const CalibrationMapping& mapping,
                                    std::size_t feature_size) {
  for (std::size_t a = 0; a < in.arc_count(); ++a)
    in.features[a * feature_size] = apply_mapping(mapping, in.posteriors[a]);
}

inline GraphInput prepare_input(const Corpus& corpus, std::size_t index, GraphMode mode,
                                const CalibrationMapping& mapping, const EmbeddingTable& table,
                                const FeatureLayout& layout) {
  switch (mode) {
    case GraphMode::kSequence:
      return prepare_one_best(corpus.cns.at(index), mapping, table, layout);
    case GraphMode::kCn:
      return prepare_cn(corpus.cns.at(index), mapping, table, layout);
    case GraphMode::kLattice:
      return prepare_lattice(corpus.lattices.at(index), mapping, table, layout);
  }
  return {};
}

inline std::size_t utterance_count(const Corpus& corpus, GraphMode mode) {
  return mode == GraphMode::kLattice ? corpus.lattices.size() : corpus.cns.size();
}

inline std::string utterance_id(const Corpus& corpus, GraphMode mode, std::size_t i) {
  return mode == GraphMode::kLattice ? corpus.lattices.at(i).utterance_id
                                     : corpus.cns.at(i).utterance_id;
}

// One example per utterance, features built with `mapping`. Utterances with
// no scoreable arcs (an all-null 1-best) are kept with zero arcs. Every arc
// must have a target.
inline std::vector<Example> build_examples(const Corpus& corpus,
                                           const std::vector<TargetRecord>& targets,
                                           GraphMode mode, const CalibrationMapping& mapping,
                                           const EmbeddingTable& table,
                                           const FeatureLayout& layout) {
  std::map<std::string, std::map<ArcId, int>> by_utt;
  for (const auto& t : targets) by_utt[t.utterance_id][t.tag.arc_id] = t.tag.target;
  std::vector<Example> out;
  const std::size_t n = utterance_count(corpus, mode);
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example ex{prepare_input(corpus, i, mode, mapping, table, layout), {}};
    const auto it = by_utt.find(ex.input.utterance_id);
    for (std::size_t a = 0; a < ex.input.arc_count(); ++a) {
      const ArcId id = ex.input.report_ids[a];
      if (it == by_utt.end() || !it->second.contains(id))
        throw Error(ErrorCode::kLengthMismatch, "utterance '" + ex.input.utterance_id +
                                                    "' arc " + std::to_string(id) +
                                                    " has no target");
      ex.targets.push_back(it->second.at(id));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// Raw posteriors and targets pooled over a subset of examples.
inline ScoredPairs pool_posteriors(const std::vector<Example>& examples,
                                   const std::vector<std::size_t>& subset) {
  ScoredPairs p;
  for (std::size_t i : subset) {
    const auto& ex = examples[i];
    p.confidences.insert(p.confidences.end(), ex.input.posteriors.begin(),
                         ex.input.posteriors.end());
    p.targets.insert(p.targets.end(), ex.targets.begin(), ex.targets.end());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Configuration

struct TrainConfig {
  GraphMode mode = GraphMode::kCn;
  MergeMethod merge = MergeMethod::kAttention;
  AttentionActivation activation = AttentionActivation::kLogistic;
  CellType cell = CellType::kGated;
  std::size_t hidden = 128;
  std::size_t ff = 128;
  double lr = 0.05;
  std::size_t epochs = 20;
  std::size_t patience = 3;  // consecutive validation misses before stopping
  std::size_t workers = 1;
  std::uint64_t seed = 1;
  SplitRatios split;
  double clip = 5.0;
  double overlap_threshold = kDefaultOverlapThreshold;
  FeatureLayout features;
  TreeOptions tree;
  bool map_posterior_feature = true;  // feed the tree-mapped posterior to the network

  void validate() const {
    if (hidden == 0) throw Error(ErrorCode::kConfig, "hidden size must be positive");
    if (workers == 0) throw Error(ErrorCode::kConfig, "workers must be at least 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::kConfig, "bad learning rate");
    if (!(clip >= 0.0)) throw Error(ErrorCode::kConfig, "clip must be non-negative");
    if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0))
      throw Error(ErrorCode::kConfig, "overlap threshold must lie in (0, 1]");
  }
};

// Applies flat `key = value` overrides to `cfg`.
inline void apply_train_settings(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    auto bad = [&] { return Error(ErrorCode::kConfig, "bad value for " + key + ": '" + value + "'"); };
    auto num = [&] {
      const auto d = text::to_double(value);
      if (!d) throw bad();
      return *d;
    };
    auto count = [&] {
      const auto i = text::to_int(value);
      if (!i || *i < 0) throw bad();
      return static_cast<std::size_t>(*i);
    };
    if (key == "mode") {
      const auto m = parse_mode(value);
      if (!m) throw bad();
      cfg.mode = *m;
    } else if (key == "merge") {
      const auto m = parse_merge(value);
      if (!m) throw bad();
      cfg.merge = *m;
    } else if (key == "attention_activation") {
      const auto a = parse_activation(value);
      if (!a) throw bad();
      cfg.activation = *a;
    } else if (key == "cell") {
      const auto c = parse_cell(value);
      if (!c) throw bad();
      cfg.cell = *c;
    } else if (key == "hidden_dim") cfg.hidden = count();
    else if (key == "ff_dim") cfg.ff = count();
    else if (key == "lr") cfg.lr = num();
    else if (key == "epochs") cfg.epochs = count();
    else if (key == "patience") cfg.patience = count();
    else if (key == "workers") cfg.workers = count();
    else if (key == "seed") cfg.seed = count();
    else if (key == "clip") cfg.clip = num();
    else if (key == "overlap_threshold") cfg.overlap_threshold = num();
    else if (key == "embed_dim") cfg.features.embed_dim = count();
    else if (key == "use_scores") cfg.features.use_scores = value == "1" || value == "true";
    else if (key == "split") {
      const auto r = parse_split_ratios(value);
      if (!r) throw bad();
      cfg.split = *r;
    } else if (key == "tree_max_leaves") cfg.tree.max_leaves = count();
    else if (key == "tree_min_leaf") cfg.tree.min_leaf = count();
    else throw Error(ErrorCode::kConfig, "unknown training key '" + key + "'");
  }
}

// ---------------------------------------------------------------------------
// Reports

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean over training utterances; 0 at epoch 0
  double valid_nce = 0.0;
  double valid_ap = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::size_t selected_epoch = 0;
  double best_valid_nce = 0.0;
  double wall_seconds = 0.0;
  std::size_t workers = 1;
};

inline void write_training_log(std::ostream& out, const TrainReport& r) {
  out << "# epoch train_loss valid_nce valid_ap lr seconds\n";
  for (const auto& e : r.epochs)
    out << text::format("epoch %zu loss %.6f valid_nce %.6f valid_ap %.6f lr %.6g time %.2f\n",
                        e.epoch, e.train_loss, e.valid_nce, e.valid_ap, e.lr, e.seconds);
  out << text::format("selected %zu valid_nce %.6f wall %.2f workers %zu\n", r.selected_epoch,
                      r.best_valid_nce, r.wall_seconds, r.workers);
}

struct TrainResult {
  Model model;
  TrainReport report;
  CorpusSplit split;
};

// ---------------------------------------------------------------------------
// Training

namespace detail {

inline ScoredPairs score_subset(const std::vector<Example>& examples,
                                const std::vector<std::size_t>& subset, const ModelParams& params,
                                const PropagationConfig& cfg) {
  ScoredPairs p;
  for (std::size_t i : subset) {
    const auto& ex = examples[i];
    const Vector c = confidences(ex.input, params, cfg);
    p.confidences.insert(p.confidences.end(), c.begin(), c.end());
    p.targets.insert(p.targets.end(), ex.targets.begin(), ex.targets.end());
  }
  return p;
}

class SharedParams {
 public:
  explicit SharedParams(ModelParams& p) : params_(p) {}

  void snapshot(ModelParams& out) const {
    auto src = params_.flat();
    auto dst = out.flat();
    for (std::size_t i = 0; i < src.size(); ++i)
      dst[i] = std::atomic_ref<double>(src[i]).load(std::memory_order_relaxed);
  }

  void apply(const Gradient& grad, double lr) const {
    auto p = params_.flat();
    auto g = grad.flat();
    for (std::size_t i = 0; i < p.size(); ++i) {
      std::atomic_ref<double> ref(p[i]);
      ref.store(ref.load(std::memory_order_relaxed) - lr * g[i], std::memory_order_relaxed);
    }
  }

 private:
  ModelParams& params_;
};

struct WorkerTally {
  double loss_sum = 0.0;
  std::size_t utterances = 0;
  bool diverged = false;
  std::string where;
};

inline void run_shard(const std::vector<Example>& examples, const std::vector<std::size_t>& order,
                      std::size_t worker, std::size_t workers, const SharedParams& shared,
                      const ModelDims& dims, const PropagationConfig& prop, double lr,
                      double clip, std::size_t epoch, WorkerTally& tally) {
  ModelParams local(dims);
  Gradient grad(dims);
  for (std::size_t k = worker; k < order.size(); k += workers) {
    const Example& ex = examples[order[k]];
    if (ex.input.arc_count() == 0) continue;
    shared.snapshot(local);
    grad.fill(0.0);
    const double loss = accumulate_gradient(ex.input, ex.targets, local, prop, grad);
    if (!std::isfinite(loss)) {
      tally.diverged = true;
      tally.where = "epoch " + std::to_string(epoch) + ", utterance '" +
                    ex.input.utterance_id + "'";
      return;
    }
    clip_gradient(grad, clip);
    shared.apply(grad, lr);
    tally.loss_sum += loss;
    ++tally.utterances;
  }
}

}  // namespace detail

// Trains on the `split.train` examples (built with identity mapping; the
// posterior feature is remapped here once the tree is fit).
inline TrainResult train_examples(std::vector<Example> examples, const CorpusSplit& split,
                                  const TrainConfig& cfg) {
  cfg.validate();
  using clock = std::chrono::steady_clock;
  const auto t_start = clock::now();

  // Calibration tree on the training pool, then the mapped posterior feature.
  const ScoredPairs pool = pool_posteriors(examples, split.train);
  const CalibrationMapping mapping = fit_tree(pool.confidences, pool.targets, cfg.tree);
  const std::size_t X = cfg.features.size();
  if (cfg.map_posterior_feature)
    for (auto& ex : examples) remap_posterior_feature(ex.input, mapping, X);

  const ModelDims dims{X, cfg.hidden, cfg.ff, cfg.cell};
  const PropagationConfig prop{cfg.merge, cfg.activation};
  ModelParams params = initialize(dims, cfg.seed);
  ModelParams best = params;

  TrainReport report;
  report.workers = cfg.workers;
  auto validate_now = [&](std::size_t epoch, double loss, double lr, double seconds) {
    const ScoredPairs v = detail::score_subset(examples, split.valid, params, prop);
    EpochLog log{epoch, loss, nce(v.confidences, v.targets).nce,
                 average_precision(v.confidences, v.targets), lr, seconds};
    report.epochs.push_back(log);
    return log.valid_nce;
  };
  report.best_valid_nce = validate_now(0, 0.0, cfg.lr, 0.0);

  double lr = cfg.lr;
  std::size_t misses = 0;
  detail::SharedParams shared(params);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t_epoch = clock::now();
    std::vector<std::size_t> order = split.train;
    std::mt19937_64 rng(cfg.seed + epoch);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<detail::WorkerTally> tallies(cfg.workers);
    if (cfg.workers == 1) {
      detail::run_shard(examples, order, 0, 1, shared, dims, prop, lr, cfg.clip, epoch,
                        tallies[0]);
    } else {
      std::vector<std::thread> threads;
      for (std::size_t w = 0; w < cfg.workers; ++w)
        threads.emplace_back([&, w] {
          detail::run_shard(examples, order, w, cfg.workers, shared, dims, prop, lr, cfg.clip,
                            epoch, tallies[w]);
        });
      for (auto& t : threads) t.join();
    }
    double loss_sum = 0.0;
    std::size_t count = 0;
    for (const auto& t : tallies) {
      if (t.diverged) throw Error(ErrorCode::kDivergence, "non-finite loss at " + t.where);
      loss_sum += t.loss_sum;
      count += t.utterances;
    }
    for (double v : params.flat())
      if (!std::isfinite(v))
        throw Error(ErrorCode::kDivergence,
                    "non-finite parameters after epoch " + std::to_string(epoch));

    const double seconds = std::chrono::duration<double>(clock::now() - t_epoch).count();
    const double valid_nce =
        validate_now(epoch, count ? loss_sum / static_cast<double>(count) : 0.0, lr, seconds);
    if (valid_nce > report.best_valid_nce) {
      report.best_valid_nce = valid_nce;
      report.selected_epoch = epoch;
      best = params;
      misses = 0;
    } else {
      lr *= 0.5;
      if (++misses >= cfg.patience) break;
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - t_start).count();

  TrainResult result;
  result.split = split;
  result.report = report;
  result.model.params = std::move(best);
  auto& meta = result.model.meta;
  meta.mode = std::string(mode_name(cfg.mode));
  meta.merge = cfg.merge;
  meta.activation = cfg.activation;
  meta.features = cfg.features;
  meta.mapping = cfg.map_posterior_feature ? mapping : CalibrationMapping::identity();
  meta.info["seed"] = std::to_string(cfg.seed);
  meta.info["split"] = text::format("%.17g:%.17g:%.17g", cfg.split.train, cfg.split.valid,
                                    cfg.split.test);
  meta.info["selected_epoch"] = std::to_string(report.selected_epoch);
  meta.info["workers"] = std::to_string(cfg.workers);
  meta.info["lr"] = text::format("%.17g", cfg.lr);
  meta.info["clip"] = text::format("%.17g", cfg.clip);
  meta.info["init"] = "uniform_inv_sqrt_hidden";
  meta.info["features"] = "raw";
  result.model.embeddings.dim = cfg.features.embed_dim;
  return result;
}

// Uses the corpus embedding table when it has one (its dimension overrides
// cfg.features.embed_dim), otherwise hash vectors of cfg.features.embed_dim.
inline TrainResult train(const Corpus& corpus, const std::vector<TargetRecord>& targets,
                         TrainConfig cfg) {
  EmbeddingTable table;
  table.dim = cfg.features.embed_dim;
  if (corpus.embeddings) {
    table = *corpus.embeddings;
    cfg.features.embed_dim = table.dim;
  }
  cfg.validate();
  auto examples = build_examples(corpus, targets, cfg.mode, CalibrationMapping::identity(),
                                 table, cfg.features);
  const CorpusSplit split = split_corpus(examples.size(), cfg.split, cfg.seed);
  TrainResult r = train_examples(std::move(examples), split, cfg);
  r.model.meta.info["embeddings"] = corpus.embeddings ? "file" : "hash";
  r.model.embeddings = std::move(table);
  return r;
}

// Same as train() with cfg.workers asynchronous workers.
inline TrainResult train_hogwild(const Corpus& corpus, const std::vector<TargetRecord>& targets,
                                 TrainConfig cfg, std::size_t workers) {
  cfg.workers = workers;
  return train(corpus, targets, cfg);
}

// ---------------------------------------------------------------------------
// Evaluation

struct ConditionReport {
  std::string condition;
  EvalReport raw;
  EvalReport tree;
  EvalReport model;
};

// Scores the given examples (built with identity mapping) with the raw
// posterior, the model's calibration tree and the model itself.
inline ConditionReport evaluate_examples(const Model& model, std::vector<Example> examples,
                                         const std::vector<std::size_t>& subset, GraphMode mode) {
  check_layout(model);
  const std::size_t X = model.params.dims().input;
  for (auto& ex : examples) remap_posterior_feature(ex.input, model.meta.mapping, X);
  const ScoredPairs raw = pool_posteriors(examples, subset);
  const ScoredPairs net = detail::score_subset(examples, subset, model.params, model.propagation());
  ConditionReport r;
  r.condition = std::string(condition_name(mode));
  r.raw = make_report(raw.confidences, raw.targets, default_report_thresholds(), "posterior");
  const Vector mapped = apply_mapping(model.meta.mapping, raw.confidences);
  r.tree = make_report(mapped, raw.targets, default_report_thresholds(), "tree");
  r.model = make_report(net.confidences, net.targets, default_report_thresholds(), "rnn");
  return r;
}

inline ConditionReport evaluate(const Model& model, const Corpus& corpus,
                                const std::vector<TargetRecord>& targets, GraphMode mode,
                                const std::vector<std::size_t>& subset) {
  auto examples = build_examples(corpus, targets, mode, CalibrationMapping::identity(),
                                 model.embeddings, model.meta.features);
  return evaluate_examples(model, std::move(examples), subset, mode);
}

inline void write_condition_report(std::ostream& out, const ConditionReport& r) {
  out << "condition " << r.condition << "\n";
  const EvalReport rows[] = {r.raw, r.tree, r.model};
  write_table(out, rows);
  for (const auto& row : rows) write_report(out, row);
}

// Rebuilds the model's utterance split from the seed and ratios recorded at
// training time.
inline CorpusSplit recorded_split(const Model& model, std::size_t utterances) {
  SplitRatios r;
  std::uint64_t seed = 1;
  if (auto it = model.meta.info.find("seed"); it != model.meta.info.end())
    if (auto v = text::to_int(it->second)) seed = static_cast<std::uint64_t>(*v);
  if (auto it = model.meta.info.find("split"); it != model.meta.info.end())
    if (auto parsed = parse_split_ratios(it->second)) r = *parsed;
  return split_corpus(utterances, r, seed);
}

}  // namespace latconf
