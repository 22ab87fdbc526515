// Copyright 2026 The LDDG Authors. All Rights Reserved.
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

#ifndef LDDG_CLI_HPP_
#define LDDG_CLI_HPP_

// Command-line front end. Precedence for every setting: built-in default,
// then the JSON config file, then command-line flags.

#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lddg/experiments.hpp"

namespace lddg {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Raised for malformed invocations; maps to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct OutputPaths {
  std::string source;   // source dataset
  std::string target;   // target dataset
  std::string model;    // checkpoint
  std::string metrics;  // JSONL stream
};

struct CliConfig {
  SyntheticConfig data;
  TrainConfig train;
  OutputPaths paths;
};

namespace detail {

// Reads keys of one JSON object into typed fields; rejects anything unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw Error("config: '" + prefix_ + "' must be an object");
  }

  template <class T>
  void field(const std::string& key, T& dst) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      dst = it->template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error("config: '" + name(key) + "' has the wrong type");
    }
  }

  void custom(const std::string& key, const std::function<void(const Json&)>& fn) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it != obj_.end()) fn(*it);
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.contains(it.key())) throw Error("config: unknown key '" + name(it.key()) + "'");
  }

  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

 private:
  const Json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

inline std::string enum_string(const Json& j, const std::string& name) {
  if (!j.is_string()) throw Error("config: '" + name + "' must be a string");
  return j.get<std::string>();
}

}  // namespace detail

/// Parses a JSON config over the defaults in `base`.
inline CliConfig parse_cli_config(const Json& root, CliConfig base = {}) {
  detail::ObjectReader top(root, "");
  top.custom("data", [&](const Json& j) {
    detail::ObjectReader r(j, "data");
    SyntheticConfig& d = base.data;
    r.field("num_domains", d.num_domains);
    r.field("num_classes", d.num_classes);
    r.field("feature_dim", d.feature_dim);
    r.field("latent_dim_true", d.latent_dim_true);
    r.field("samples_per_domain_class", d.samples_per_domain_class);
    r.field("domain_scales", d.domain_scales);
    r.field("noise_std", d.noise_std);
    r.field("target_mixture", d.target_mixture);
    r.field("norm_bound", d.norm_bound);
    r.field("offset_scale", d.offset_scale);
    r.field("target_shift", d.target_shift);
    r.field("target_samples_per_class", d.target_samples_per_class);
    r.field("seed", d.seed);
    r.finish();
  });
  top.custom("train", [&](const Json& j) {
    detail::ObjectReader r(j, "train");
    TrainConfig& t = base.train;
    r.field("lambda1", t.lambda1);
    r.field("lambda2", t.lambda2);
    r.field("lambda_nuclear", t.lambda_nuclear);
    r.field("learning_rate", t.learning_rate);
    r.field("weight_decay", t.weight_decay);
    r.field("epochs", t.epochs);
    r.field("batch_per_domain", t.batch_per_domain);
    r.field("lr_decay_every", t.lr_decay_every);
    r.field("lr_decay_factor", t.lr_decay_factor);
    r.field("latent_dim", t.latent_dim);
    r.field("seed", t.seed);
    r.field("rank_target", t.rank_target);
    r.custom("rank_mode", [&](const Json& v) {
      t.rank_mode = parse_rank_mode(detail::enum_string(v, "train.rank_mode"));
    });
    r.custom("rank_penalty", [&](const Json& v) {
      t.rank_penalty = parse_rank_penalty(detail::enum_string(v, "train.rank_penalty"));
    });
    r.field("encoder_widths", t.encoder_widths);
    r.field("head_hidden", t.head_hidden);
    r.field("log_singular_values", t.log_singular_values);
    r.field("validation_fraction", t.validation_fraction);
    r.custom("loss", [&](const Json& v) {
      detail::ObjectReader l(v, "train.loss");
      l.custom("kind", [&](const Json& k) {
        t.loss.kind = parse_loss_kind(detail::enum_string(k, "train.loss.kind"));
      });
      l.field("gamma", t.loss.gamma);
      l.field("beta_shift", t.loss.beta_shift);
      l.finish();
    });
    r.finish();
  });
  top.custom("output", [&](const Json& j) {
    detail::ObjectReader r(j, "output");
    r.field("source", base.paths.source);
    r.field("target", base.paths.target);
    r.field("model", base.paths.model);
    r.field("metrics", base.paths.metrics);
    r.finish();
  });
  top.finish();
  return base;
}

inline CliConfig load_cli_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  Json root;
  try {
    root = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config '" + path + "': " + e.what());
  }
  return parse_cli_config(root);
}

inline Json to_json(const SyntheticConfig& d) {
  return Json{{"num_domains", d.num_domains},
              {"num_classes", d.num_classes},
              {"feature_dim", d.feature_dim},
              {"latent_dim_true", d.latent_dim_true},
              {"samples_per_domain_class", d.samples_per_domain_class},
              {"domain_scales", d.domain_scales},
              {"noise_std", d.noise_std},
              {"target_mixture", d.target_mixture},
              {"norm_bound", d.norm_bound},
              {"offset_scale", d.offset_scale},
              {"target_shift", d.target_shift},
              {"target_samples_per_class", d.target_samples_per_class},
              {"seed", d.seed}};
}

inline Json to_json(const TrainConfig& t) {
  return Json{{"lambda1", t.lambda1},
              {"lambda2", t.lambda2},
              {"lambda_nuclear", t.lambda_nuclear},
              {"learning_rate", t.learning_rate},
              {"weight_decay", t.weight_decay},
              {"epochs", t.epochs},
              {"batch_per_domain", t.batch_per_domain},
              {"lr_decay_every", t.lr_decay_every},
              {"lr_decay_factor", t.lr_decay_factor},
              {"latent_dim", t.latent_dim},
              {"seed", t.seed},
              {"rank_target", t.rank_target},
              {"rank_mode", std::string(to_string(t.rank_mode))},
              {"rank_penalty", std::string(to_string(t.rank_penalty))},
              {"encoder_widths", t.encoder_widths},
              {"head_hidden", t.head_hidden},
              {"log_singular_values", t.log_singular_values},
              {"validation_fraction", t.validation_fraction},
              {"loss",
               {{"kind", std::string(to_string(t.loss.kind))},
                {"gamma", t.loss.gamma},
                {"beta_shift", t.loss.beta_shift}}}};
}

inline Json to_json(const EpochRecord& e, const TrainConfig& cfg) {
  Json j{{"type", "epoch"},
         {"epoch", e.epoch},
         {"learning_rate", e.learning_rate},
         {"total", e.loss.total},
         {"cls", e.loss.cls},
         {"rank", e.loss.rank},
         {"kl", e.loss.kl},
         {"lambda1", cfg.lambda1},
         {"lambda2", cfg.lambda2}};
  if (!e.singular_values.empty()) j["singular_values"] = e.singular_values;
  return j;
}

inline Json to_json(const EvalResult& r) {
  return Json{{"type", "eval"},
              {"overall", r.overall},
              {"records", r.records},
              {"per_domain", r.per_domain},
              {"per_domain_n", r.per_domain_n}};
}

inline Json to_json(const BoundReport& b) {
  return Json{{"type", "bound"},
              {"theorem", b.theorem},
              {"trial", b.trial},
              {"lhs", b.lhs},
              {"rhs", b.rhs},
              {"tolerance", b.tolerance},
              {"margin", b.margin()},
              {"error_estimate", b.error_estimate},
              {"lse_violations", b.lse_violations},
              {"satisfied", b.satisfied},
              {"descriptor", b.descriptor}};
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out.flush()) throw Error("write failed for '" + path + "'");
}

inline const std::string& require(const std::string& value, const std::string& key,
                                  const std::string& flag) {
  if (value.empty())
    throw UsageError("missing required key '" + key + "' (set it in the config or pass " + flag +
                     ")");
  return value;
}

// Emits one JSON line to a file, or to `fallback` when no path is given.
class RecordSink {
 public:
  RecordSink(const std::string& path, std::ostream& fallback) : out_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw Error("cannot write '" + path + "'");
      out_ = &file_;
    }
  }
  void emit(const Json& j) { *out_ << j.dump() << '\n'; }
  void finish() {
    out_->flush();
    if (!*out_) throw Error("failed to write records");
  }

 private:
  std::ofstream file_;
  std::ostream* out_;
};

template <class T>
std::vector<T> unique_checked(std::vector<T> v, const std::string& what) {
  std::set<T> s(v.begin(), v.end());
  if (s.size() != v.size()) throw UsageError("duplicate " + what + " values");
  return v;
}

}  // namespace detail

/// Runs the `lddg` command line. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear-dependency domain generalization toolkit", "lddg"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_path;
  auto add_config = [&](CLI::App* c) {
    c->add_option("-c,--config", config_path, "JSON config (defaults apply to absent keys)")
        ->check(CLI::ExistingFile);
  };

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate source and target datasets");
  add_config(gen);
  std::string gen_source, gen_target;
  std::optional<std::uint64_t> gen_seed;
  gen->add_option("--source-out", gen_source, "Source dataset path");
  gen->add_option("--target-out", gen_target, "Target dataset path");
  gen->add_option("--seed", gen_seed, "Data seed");

  // train
  auto* tr = app.add_subcommand("train", "Train on a source dataset");
  add_config(tr);
  std::string tr_data, tr_target, tr_model, tr_metrics, tr_rank_mode;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::size_t> tr_epochs, tr_log_sv, tr_rank;
  std::optional<double> tr_l1, tr_l2;
  tr->add_option("--data", tr_data, "Source dataset");
  tr->add_option("--target", tr_target, "Optional target dataset scored after training");
  tr->add_option("--model-out", tr_model, "Checkpoint path");
  tr->add_option("--metrics-out", tr_metrics, "Per-epoch JSONL metrics (default stdout)");
  tr->add_option("--log-singular-values", tr_log_sv, "Top-k latent singular values per epoch");
  tr->add_option("--rank-mode", tr_rank_mode, "per_batch or per_class");
  tr->add_option("--rank-target", tr_rank, "Rank target");
  tr->add_option("--seed", tr_seed, "Training seed");
  tr->add_option("--epochs", tr_epochs, "Epochs");
  tr->add_option("--lambda1", tr_l1, "Rank weight");
  tr->add_option("--lambda2", tr_l2, "KL weight");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  std::string ev_model, ev_data, ev_out;
  ev->add_option("--model", ev_model, "Checkpoint")->required();
  ev->add_option("--data", ev_data, "Dataset")->required();
  ev->add_option("--out", ev_out, "Also write the record to this file");

  // verify
  auto* ve = app.add_subcommand("verify", "Numerically check the generalization bounds");
  int ve_theorem = 1;
  long long ve_trials = 100;
  std::uint64_t ve_seed = 0;
  std::string ve_out;
  bool ve_prior = false;
  ve->add_option("--theorem", ve_theorem, "1 or 2")->required()->check(CLI::IsMember({1, 2}));
  ve->add_option("--trials", ve_trials, "Number of trials (>= 1)");
  ve->add_option("--seed", ve_seed, "Seed");
  ve->add_option("--out", ve_out, "JSONL report path (default stdout)");
  ve->add_flag("--prior-sources", ve_prior, "Theorem 1 only: every source equals the prior");

  // sweep-rank / ablate
  std::string st_data, st_target, st_out;
  std::vector<std::size_t> sw_ranks;
  std::vector<std::string> ab_cells;
  std::vector<std::uint64_t> st_seeds;
  auto add_study = [&](CLI::App* c) {
    add_config(c);
    c->add_option("--data", st_data, "Source dataset");
    c->add_option("--target", st_target, "Target dataset");
    c->add_option("--seeds", st_seeds, "Training seeds")->delimiter(',');
    c->add_option("--out", st_out, "Table path (default stdout)");
  };
  auto* sw = app.add_subcommand("sweep-rank", "Target accuracy per rank target");
  add_study(sw);
  sw->add_option("--ranks", sw_ranks, "Rank targets")->delimiter(',')->required();
  auto* ab = app.add_subcommand("ablate", "Target accuracy per objective variant");
  add_study(ab);
  ab->add_option("--cells", ab_cells, "none,rank,kl,nuclear,nuclear+kl,rank+kl")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    CliConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = load_cli_config(config_path);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
    }

    if (gen->parsed()) {
      if (!gen_source.empty()) cfg.paths.source = gen_source;
      if (!gen_target.empty()) cfg.paths.target = gen_target;
      if (gen_seed) cfg.data.seed = *gen_seed;
      detail::require(cfg.paths.source, "output.source", "--source-out");
      detail::require(cfg.paths.target, "output.target", "--target-out");
      const SyntheticData data = generate_synthetic(cfg.data);
      save_dataset(data.sources, cfg.paths.source);
      save_dataset(data.target, cfg.paths.target);
      out << Json{{"type", "gen_data"},
                  {"source", cfg.paths.source},
                  {"source_records", data.sources.records.size()},
                  {"target", cfg.paths.target},
                  {"target_records", data.target.records.size()}}
                 .dump()
          << "\n";
      return kExitOk;
    }

    if (tr->parsed()) {
      if (!tr_data.empty()) cfg.paths.source = tr_data;
      if (!tr_target.empty()) cfg.paths.target = tr_target;
      if (!tr_model.empty()) cfg.paths.model = tr_model;
      if (!tr_metrics.empty()) cfg.paths.metrics = tr_metrics;
      if (tr_log_sv) cfg.train.log_singular_values = *tr_log_sv;
      if (!tr_rank_mode.empty()) cfg.train.rank_mode = parse_rank_mode(tr_rank_mode);
      if (tr_rank) cfg.train.rank_target = *tr_rank;
      if (tr_seed) cfg.train.seed = *tr_seed;
      if (tr_epochs) cfg.train.epochs = *tr_epochs;
      if (tr_l1) cfg.train.lambda1 = *tr_l1;
      if (tr_l2) cfg.train.lambda2 = *tr_l2;
      detail::require(cfg.paths.source, "output.source", "--data");
      detail::require(cfg.paths.model, "output.model", "--model-out");
      const DomainDataset sources = load_dataset(cfg.paths.source);
      std::optional<DomainDataset> target;
      if (!cfg.paths.target.empty()) {
        target = load_dataset(cfg.paths.target);
        if (target->feature_dim != sources.feature_dim)
          throw Error("target has " + std::to_string(target->feature_dim) +
                      " features, sources have " + std::to_string(sources.feature_dim));
      }
      detail::RecordSink sink(cfg.paths.metrics, out);
      const TrainConfig& tc = cfg.train;
      TrainOutput result =
          train(tc, sources, [&](const EpochRecord& e) { sink.emit(to_json(e, tc)); });
      save_checkpoint(result.params, cfg.paths.model);
      Json summary{{"type", "train_summary"},
                   {"epochs", result.result.epochs.size()},
                   {"source_accuracy", result.result.source.overall},
                   {"model", cfg.paths.model},
                   {"config", to_json(tc)}};
      if (target) summary["target_accuracy"] = evaluate(result.params, *target).overall;
      sink.emit(summary);
      sink.finish();
      return kExitOk;
    }

    if (ev->parsed()) {
      const ModelParams params = load_checkpoint(ev_model);
      const DomainDataset data = load_dataset(ev_data);
      const Json rec = to_json(evaluate(params, data));
      out << rec.dump() << "\n";
      if (!ev_out.empty()) detail::write_text(ev_out, rec.dump() + "\n");
      return kExitOk;
    }

    if (ve->parsed()) {
      if (ve_trials < 1) throw UsageError("--trials must be at least 1");
      if (ve_prior && ve_theorem != 1) throw UsageError("--prior-sources applies to theorem 1 only");
      detail::RecordSink sink(ve_out, out);
      std::size_t failures = 0;
      const auto n = static_cast<std::size_t>(ve_trials);
      const std::vector<std::size_t> classes{2, 7};
      for (std::size_t i = 0; i < n; ++i) {
        try {
          const BoundReport r =
              ve_theorem == 1
                  ? verify_theorem1(make_theorem1_trial(ve_seed, i, 3, ve_prior))
                  : verify_theorem2(make_theorem2_trial(ve_seed, i, 3, classes[i % 2]), ve_seed);
          if (!r.satisfied) ++failures;
          sink.emit(to_json(r));
        } catch (const Error& e) {
          ++failures;
          sink.emit(Json{{"type", "bound_error"},
                         {"theorem", ve_theorem},
                         {"trial", i},
                         {"error", e.what()}});
        }
      }
      sink.emit(Json{{"type", "verify_summary"},
                     {"theorem", ve_theorem},
                     {"trials", n},
                     {"failures", failures}});
      sink.finish();
      return failures == 0 ? kExitOk : kExitFailure;
    }

    // sweep-rank or ablate
    if (!st_data.empty()) cfg.paths.source = st_data;
    if (!st_target.empty()) cfg.paths.target = st_target;
    detail::require(cfg.paths.source, "output.source", "--data");
    detail::require(cfg.paths.target, "output.target", "--target");
    if (st_seeds.empty()) st_seeds = {1, 2, 3, 4, 5};
    st_seeds = detail::unique_checked(st_seeds, "seed");
    const DomainDataset sources = load_dataset(cfg.paths.source);
    const DomainDataset target = load_dataset(cfg.paths.target);
    std::string table;
    if (sw->parsed()) {
      sw_ranks = detail::unique_checked(sw_ranks, "rank");
      table = format_table("rank", sweep_rank(cfg.train, sources, target, sw_ranks, st_seeds));
    } else {
      std::vector<AblationCell> cells;
      if (ab_cells.empty()) cells = all_ablation_cells();
      for (const auto& c : ab_cells) cells.push_back(parse_ablation_cell(c));
      cells = detail::unique_checked(cells, "cell");
      if (st_seeds.size() < 3) throw UsageError("ablate needs at least 3 seeds");
      table = format_table("cell", ablate_components(cfg.train, sources, target, cells, st_seeds));
    }
    if (st_out.empty())
      out << table;
    else
      detail::write_text(st_out, table);
    return kExitOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace lddg

#endif  // LDDG_CLI_HPP_
