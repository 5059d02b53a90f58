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

// Command-line front end.
//
//   gen       --out DIR [--config FILE] [--seed S] [--utterances N]
//   tag       --mode seq|cn|lat --hyp PATH --ref PATH [--overlap-threshold T] --out FILE
//   train     --mode M --data DIR --tags FILE --merge X --cell C --out FILE
//             [--workers W] [--seed S] [--config FILE] [--epochs E] [--lr R]
//             [--hidden H] [--ff F] [--activation A] [--log FILE]
//   predict   --model FILE --data DIR --out FILE [--split all|train|valid|test]
//   eval      --scores FILE --tags FILE [--report FILE] [--pr FILE]
//             [--baselines --data DIR --model FILE]
//   gradcheck --mode M [--seed S] [--cell C] [--merge X] [--instances K]
//
// Exit status: 0 on success, 1 when input validation or a check fails,
// 2 on usage errors. Diagnostics go to the error stream.

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "latconf/calibrate.hpp"
#include "latconf/corpusio.hpp"
#include "latconf/error.hpp"
#include "latconf/metrics.hpp"
#include "latconf/propagate.hpp"
#include "latconf/random_instances.hpp"
#include "latconf/synth.hpp"
#include "latconf/tagging.hpp"
#include "latconf/text.hpp"
#include "latconf/train.hpp"

namespace latconf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr double kGradCheckLimit = 1e-4;

namespace detail {

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return text::parse_key_values(in);
}

inline std::vector<ReferenceTranscript> read_refs(const std::string& path, Diagnostics* diag) {
  std::istringstream in(text::read_file(path));
  if (std::filesystem::path(path).extension() == ".ctm") return parse_ctm(in, diag);
  return parse_references(in);
}

inline std::vector<TargetRecord> read_targets(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return parse_targets(in);
}

inline std::vector<ScoreRecord> read_scores(const std::string& path) {
  std::istringstream in(text::read_file(path));
  return parse_scores(in);
}

// The embedding table comes from the data directory when it ships one.
inline Model load_full_model(const std::string& path, const Corpus& corpus) {
  Checkpoint ck = load_model(path);
  Model m{std::move(ck.params), std::move(ck.meta), {}};
  if (corpus.embeddings) m.embeddings = *corpus.embeddings;
  else m.embeddings.dim = m.meta.features.embed_dim;
  check_layout(m);
  return m;
}

inline GraphMode model_mode(const Model& m) {
  const auto mode = parse_mode(m.meta.mode);
  if (!mode) throw Error(ErrorCode::kSyntax, "checkpoint has unknown mode '" + m.meta.mode + "'");
  return *mode;
}

inline std::vector<std::size_t> select_split(const Model& model, std::size_t n,
                                             const std::string& which) {
  if (which == "all") {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    return all;
  }
  const CorpusSplit s = recorded_split(model, n);
  std::vector<std::size_t> out = which == "train" ? s.train : which == "valid" ? s.valid : s.test;
  std::sort(out.begin(), out.end());
  return out;
}

inline void print_warnings(const Diagnostics& diag, std::ostream& err) {
  for (const auto& w : diag.warnings) err << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------

inline int cmd_gen(const std::string& config, const std::string& out_dir,
                   std::optional<std::uint64_t> seed, std::optional<std::size_t> utterances,
                   std::ostream& out) {
  SynthConfig cfg;
  if (!config.empty()) {
    std::istringstream in(text::read_file(config));
    cfg = parse_synth_config(in);
  }
  if (seed) cfg.seed = *seed;
  if (utterances) cfg.utterances = *utterances;
  cfg.validate();
  const Corpus corpus = gen_corpus(cfg);
  write_corpus(out_dir, corpus);
  out << "wrote " << corpus.cns.size() << " utterances to " << out_dir << "\n";
  return kExitOk;
}

inline int cmd_tag(const std::string& mode_s, const std::string& hyp, const std::string& ref,
                   double threshold, const std::string& out_path, std::ostream& err) {
  const GraphMode mode = *parse_mode(mode_s);
  Diagnostics diag;
  Corpus corpus;
  auto refs = read_refs(ref, &diag);
  const bool timed = !refs.empty() && refs.front().timed;
  (timed ? corpus.timed_refs : corpus.text_refs) = std::move(refs);
  if (mode == GraphMode::kLattice) {
    if (!timed)
      throw Error(ErrorCode::kMissingTimings, "lattice tagging needs a timed (.ctm) reference");
    corpus.lattices = read_lattices(hyp);
  } else {
    corpus.cns = read_cns(hyp, &diag);
  }
  print_warnings(diag, err);
  text::write_file(out_path, write_targets(tag_corpus(corpus, mode, threshold)));
  return kExitOk;
}

struct TrainArgs {
  std::string mode, data, tags, merge, cell, out, config, activation, log;
  std::optional<std::size_t> workers, epochs, hidden, ff;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
};

inline int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  TrainConfig cfg;
  if (!a.config.empty()) apply_train_settings(cfg, read_key_values(a.config));
  std::map<std::string, std::string> flags;
  if (!a.mode.empty()) flags["mode"] = a.mode;
  if (!a.merge.empty()) flags["merge"] = a.merge;
  if (!a.cell.empty()) flags["cell"] = a.cell;
  if (!a.activation.empty()) flags["attention_activation"] = a.activation;
  if (a.workers) flags["workers"] = std::to_string(*a.workers);
  if (a.epochs) flags["epochs"] = std::to_string(*a.epochs);
  if (a.hidden) flags["hidden_dim"] = std::to_string(*a.hidden);
  if (a.ff) flags["ff_dim"] = std::to_string(*a.ff);
  if (a.seed) flags["seed"] = std::to_string(*a.seed);
  if (a.lr) flags["lr"] = text::format("%.17g", *a.lr);
  apply_train_settings(cfg, flags);

  Diagnostics diag;
  const Corpus corpus = read_corpus(a.data, &diag);
  print_warnings(diag, err);
  const auto targets = read_targets(a.tags);
  const TrainResult result = train(corpus, targets, cfg);
  save_model(a.out, result.model.params, result.model.meta);
  std::ostringstream log;
  write_training_log(log, result.report);
  if (!a.log.empty()) text::write_file(a.log, log.str());
  out << log.str();
  return kExitOk;
}

inline int cmd_predict(const std::string& model_path, const std::string& data,
                       const std::string& out_path, const std::string& split, std::ostream& err) {
  Diagnostics diag;
  const Corpus corpus = read_corpus(data, &diag);
  print_warnings(diag, err);
  const Model model = load_full_model(model_path, corpus);
  const GraphMode mode = model_mode(model);
  std::vector<ScoreRecord> scores;
  for (std::size_t i : select_split(model, utterance_count(corpus, mode), split)) {
    const GraphInput in = prepare_input(corpus, i, mode, model.meta.mapping, model.embeddings,
                                        model.meta.features);
    for (auto& s : predict(in, model)) scores.push_back(std::move(s));
  }
  text::write_file(out_path, write_scores(scores));
  return kExitOk;
}

struct EvalArgs {
  std::string scores, tags, report, pr, data, model;
  bool baselines = false;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto scores = read_scores(a.scores);
  const auto targets = read_targets(a.tags);
  const ScoredPairs pairs = join_scores(scores, targets);
  const EvalReport model_row =
      make_report(pairs.confidences, pairs.targets, default_report_thresholds(), "rnn");
  std::ostringstream report;
  if (a.baselines) {
    const Corpus corpus = read_corpus(a.data);
    const Model model = load_full_model(a.model, corpus);
    const GraphMode mode = model_mode(model);
    std::map<std::pair<std::string, ArcId>, double> raw;
    for (std::size_t i = 0; i < utterance_count(corpus, mode); ++i) {
      const GraphInput in = prepare_input(corpus, i, mode, CalibrationMapping::identity(),
                                          model.embeddings, model.meta.features);
      for (std::size_t k = 0; k < in.arc_count(); ++k)
        raw[{in.utterance_id, in.report_ids[k]}] = in.posteriors[k];
    }
    Vector posteriors;
    for (const auto& s : scores) {
      const auto it = raw.find({s.utterance_id, s.arc_id});
      if (it == raw.end())
        throw Error(ErrorCode::kLengthMismatch, "scored arc missing from data: '" +
                                                    s.utterance_id + "' arc " +
                                                    std::to_string(s.arc_id));
      posteriors.push_back(it->second);
    }
    ConditionReport cr;
    cr.condition = std::string(condition_name(mode));
    cr.raw = make_report(posteriors, pairs.targets, default_report_thresholds(), "posterior");
    cr.tree = make_report(apply_mapping(model.meta.mapping, posteriors), pairs.targets,
                          default_report_thresholds(), "tree");
    cr.model = model_row;
    write_condition_report(report, cr);
    out << report.str();
  } else {
    write_report(report, model_row);
    out << text::format("NCE %.4f\nAP %.4f\n", model_row.nce, model_row.ap);
  }
  if (!a.report.empty()) text::write_file(a.report, report.str());
  if (!a.pr.empty()) {
    std::ostringstream pr;
    write_pr_points(pr, model_row.pr);
    text::write_file(a.pr, pr.str());
  }
  return kExitOk;
}

inline InstanceShape instance_shape(GraphMode m) {
  switch (m) {
    case GraphMode::kSequence: return InstanceShape::kSequence;
    case GraphMode::kCn: return InstanceShape::kCn;
    case GraphMode::kLattice: return InstanceShape::kLattice;
  }
  return InstanceShape::kCn;
}

inline int cmd_gradcheck(const std::string& mode_s, std::uint64_t seed, const std::string& cell,
                         const std::string& merge, const std::string& activation,
                         std::size_t instances, std::ostream& out, std::ostream& err) {
  const GraphMode mode = *parse_mode(mode_s);
  const ModelDims dims{5, 4, 3, *parse_cell(cell)};
  const PropagationConfig cfg{*parse_merge(merge), *parse_activation(activation)};
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < instances; ++k) {
    const Lattice g = random_instance_graph(rng, instance_shape(mode));
    const GraphInput in = random_input(rng, g, dims.input);
    const Vector t = random_targets(rng, in.arc_count());
    const ModelParams p = random_params(rng, dims);
    const auto r = check_gradient(in, t, p, cfg);
    worst = std::max(worst, r.max_relative_error);
    checked += r.checked;
  }
  out << text::format("max relative error %.3e over %zu coordinates\n", worst, checked);
  if (!(worst < kGradCheckLimit)) {
    err << text::format("gradient check failed: %.3e >= %.0e\n", worst, kGradCheckLimit);
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidence estimation over sequences, confusion networks and lattices",
               "latconf"};
  app.require_subcommand(1);
  const std::vector<std::string> modes{"seq", "cn", "lat"};
  const std::vector<std::string> merges{"max", "mean", "posterior", "attention"};
  const std::vector<std::string> cells{"simple", "gated"};
  const std::vector<std::string> activations{"logistic", "tanh", "identity"};

  // gen
  std::string gen_config, gen_out;
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_utts;
  auto* gen = app.add_subcommand("gen", "Write a synthetic corpus");
  gen->add_option("--config", gen_config, "key = value generator settings")->check(CLI::ExistingFile);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Override the seed");
  gen->add_option("--utterances", gen_utts, "Override the utterance count");

  // tag
  std::string tag_mode, tag_hyp, tag_ref, tag_out;
  double tag_threshold = kDefaultOverlapThreshold;
  auto* tag = app.add_subcommand("tag", "Write reference targets for hypothesis arcs");
  tag->add_option("--mode", tag_mode)->required()->check(CLI::IsMember(modes));
  tag->add_option("--hyp", tag_hyp, "CN or SLF file or directory")->required()->check(CLI::ExistingPath);
  tag->add_option("--ref", tag_ref, "CTM or plain-text references")->required()->check(CLI::ExistingFile);
  tag->add_option("--overlap-threshold", tag_threshold)->check(CLI::Range(0.0, 1.0));
  tag->add_option("--out", tag_out)->required();

  // train
  detail::TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a confidence model");
  tr->add_option("--mode", ta.mode)->check(CLI::IsMember(modes));
  tr->add_option("--data", ta.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--tags", ta.tags)->required()->check(CLI::ExistingFile);
  tr->add_option("--merge", ta.merge)->check(CLI::IsMember(merges));
  tr->add_option("--cell", ta.cell)->check(CLI::IsMember(cells));
  tr->add_option("--activation", ta.activation, "Attention activation")->check(CLI::IsMember(activations));
  tr->add_option("--workers", ta.workers)->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed);
  tr->add_option("--epochs", ta.epochs);
  tr->add_option("--lr", ta.lr)->check(CLI::NonNegativeNumber);
  tr->add_option("--hidden", ta.hidden)->check(CLI::PositiveNumber);
  tr->add_option("--ff", ta.ff);
  tr->add_option("--config", ta.config, "key = value training settings")->check(CLI::ExistingFile);
  tr->add_option("--log", ta.log, "Training log path");
  tr->add_option("--out", ta.out)->required();

  // predict
  std::string pr_model, pr_data, pr_out, pr_split = "all";
  auto* pred = app.add_subcommand("predict", "Score arcs with a trained model");
  pred->add_option("--model", pr_model)->required()->check(CLI::ExistingFile);
  pred->add_option("--data", pr_data)->required()->check(CLI::ExistingDirectory);
  pred->add_option("--out", pr_out)->required();
  pred->add_option("--split", pr_split)->check(CLI::IsMember({"all", "train", "valid", "test"}));

  // eval
  detail::EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate scores against targets");
  ev->add_option("--scores", ea.scores)->required()->check(CLI::ExistingFile);
  ev->add_option("--tags", ea.tags)->required()->check(CLI::ExistingFile);
  ev->add_option("--report", ea.report);
  ev->add_option("--pr", ea.pr);
  auto* base_flag = ev->add_flag("--baselines", ea.baselines, "Add posterior and tree rows");
  auto* data_opt = ev->add_option("--data", ea.data)->check(CLI::ExistingDirectory);
  auto* model_opt = ev->add_option("--model", ea.model)->check(CLI::ExistingFile);
  base_flag->needs(data_opt)->needs(model_opt);

  // gradcheck
  std::string gc_mode, gc_cell = "gated", gc_merge = "attention", gc_act = "logistic";
  std::uint64_t gc_seed = 0;
  std::size_t gc_instances = 1;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the model gradient");
  gc->add_option("--mode", gc_mode)->required()->check(CLI::IsMember(modes));
  gc->add_option("--seed", gc_seed);
  gc->add_option("--cell", gc_cell)->check(CLI::IsMember(cells));
  gc->add_option("--merge", gc_merge)->check(CLI::IsMember(merges));
  gc->add_option("--activation", gc_act)->check(CLI::IsMember(activations));
  gc->add_option("--instances", gc_instances)->check(CLI::PositiveNumber);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return detail::cmd_gen(gen_config, gen_out, gen_seed, gen_utts, out);
    if (*tag) return detail::cmd_tag(tag_mode, tag_hyp, tag_ref, tag_threshold, tag_out, err);
    if (*tr) return detail::cmd_train(ta, out, err);
    if (*pred) return detail::cmd_predict(pr_model, pr_data, pr_out, pr_split, err);
    if (*ev) return detail::cmd_eval(ea, out);
    if (*gc)
      return detail::cmd_gradcheck(gc_mode, gc_seed, gc_cell, gc_merge, gc_act, gc_instances,
                                   out, err);
  } catch (const Error& e) {
    err << "error [" << error_name(e.code()) << "]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(std::move(args), out, err);
}

}  // namespace latconf::cli
