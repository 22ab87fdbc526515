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

#ifndef LDDG_EXPERIMENTS_HPP_
#define LDDG_EXPERIMENTS_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "lddg/data.hpp"
#include "lddg/model.hpp"
#include "lddg/theory.hpp"

namespace lddg {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double learning_rate = 0.0;
  LossBreakdown loss;     // batch averages
  std::vector<double> singular_values;  // top-k of the epoch's last latent batch
};

struct EvalResult {
  std::vector<double> per_domain;        // accuracy per domain id
  std::vector<std::size_t> per_domain_n; // records per domain id
  double overall = 0.0;
  std::size_t records = 0;
};

struct RunResult {
  TrainConfig config;
  std::vector<EpochRecord> epochs;
  EvalResult source;
  std::optional<double> target_accuracy;
  std::optional<std::size_t> best_epoch;  // by source validation accuracy
  std::optional<double> best_validation_accuracy;
};

struct TrainOutput {
  ModelParams params;
  RunResult result;
  std::optional<ModelParams> best_params;
};

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k)
    if (row[k] > row[best]) best = k;
  return best;
}

/// Accuracy of argmax(logits) under posterior-mean inference.
inline EvalResult evaluate(const ModelParams& params, const DomainDataset& d) {
  if (d.records.empty()) throw Error("evaluate: no records");
  if (d.feature_dim != params.input_dim())
    throw Error("evaluate: dataset has " + std::to_string(d.feature_dim) +
                " features, model expects " + std::to_string(params.input_dim()));
  const auto idx = d.all_indices();
  const Matrix logits = predict_logits(params, d.features(idx));
  EvalResult r;
  r.per_domain.assign(d.num_domains, 0.0);
  r.per_domain_n.assign(d.num_domains, 0);
  std::vector<std::size_t> hits(d.num_domains, 0);
  std::size_t total_hits = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Record& rec = d.records[i];
    const bool ok = argmax_row(logits.row(i)) == rec.label;
    ++r.per_domain_n[rec.domain];
    if (ok) {
      ++hits[rec.domain];
      ++total_hits;
    }
  }
  for (std::size_t k = 0; k < d.num_domains; ++k)
    if (r.per_domain_n[k] > 0)
      r.per_domain[k] = static_cast<double>(hits[k]) / static_cast<double>(r.per_domain_n[k]);
  r.records = idx.size();
  r.overall = static_cast<double>(total_hits) / static_cast<double>(idx.size());
  return r;
}

/// Optional per-epoch hook; receives each record as soon as it is complete.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch training of the full objective with Adam.
///
/// Throws when a batch produces a non-finite loss, naming epoch and batch.
inline TrainOutput train(const TrainConfig& cfg, const DomainDataset& sources,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  sources.validate();
  if (sources.records.empty()) throw Error("train: no source records");
  for (const auto& idx : sources.indices_by_domain())
    if (idx.empty()) throw Error("train: every source domain needs at least one record");

  DomainDataset fit = sources;
  std::optional<DomainDataset> val;
  if (cfg.validation_fraction > 0.0) {
    auto [tr, va] = split_validation(sources, cfg.validation_fraction, cfg.seed);
    if (!va.records.empty()) {
      fit = std::move(tr);
      val = std::move(va);
    }
  }

  TrainOutput out;
  out.params = init_params(cfg.shape(sources.feature_dim, sources.num_classes), cfg.seed);
  out.result.config = cfg;
  AdamState state;
  bool warned_vacuous = false;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = sample_batches(fit, cfg.batch_per_domain, cfg.seed, epoch);
    Rng noise_rng(cfg.seed, "noise", epoch);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.learning_rate = learning_rate_at(cfg, epoch);
    Matrix last_z;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const Matrix x = fit.features(batches[b]);
      const auto y = fit.labels(batches[b]);
      const Matrix noise = noise_rng.normal_matrix(x.rows(), cfg.latent_dim);
      const ForwardTrace trace = forward(out.params, x, noise);
      const ObjectiveTerms terms = evaluate_objective(trace, y, cfg);
      if (!std::isfinite(terms.loss.total))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                    std::to_string(b + 1));
      if (terms.rank.vacuous && cfg.lambda1 != 0.0 && !warned_vacuous) {
        std::cerr << "warning: batch of " << x.rows() << " rows x " << cfg.latent_dim
                  << " latent dims is too small for rank target " << cfg.rank_target
                  << "; rank term is zero for such batches\n";
        warned_vacuous = true;
      }
      rec.loss.total += terms.loss.total;
      rec.loss.cls += terms.loss.cls;
      rec.loss.rank += terms.loss.rank;
      rec.loss.kl += terms.loss.kl;
      const ModelParams grads = backward(out.params, trace, y, cfg);
      adam_step(out.params, grads, state, cfg, epoch);
      if (b + 1 == batches.size()) last_z = trace.z;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(1, batches.size()));
    rec.loss.total /= nb;
    rec.loss.cls /= nb;
    rec.loss.rank /= nb;
    rec.loss.kl /= nb;
    if (cfg.log_singular_values > 0 && !last_z.empty())
      rec.singular_values = singular_spectrum(last_z, cfg.log_singular_values);
    if (val) {
      const double acc = evaluate(out.params, *val).overall;
      if (!out.result.best_validation_accuracy || acc > *out.result.best_validation_accuracy) {
        out.result.best_validation_accuracy = acc;
        out.result.best_epoch = epoch + 1;
        out.best_params = out.params;
      }
    }
    if (on_epoch) on_epoch(rec);
    out.result.epochs.push_back(std::move(rec));
  }
  out.result.source = evaluate(out.params, sources);
  return out;
}

/// Trains on the sources and scores the final model on the target.
inline TrainOutput train_and_score(const TrainConfig& cfg, const DomainDataset& sources,
                                   const DomainDataset& target) {
  TrainOutput out = train(cfg, sources);
  out.result.target_accuracy = evaluate(out.params, target).overall;
  return out;
}

/// Runs fn(0..n-1) on up to hardware_concurrency threads.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct SummaryRow {
  std::string setting;
  std::vector<double> per_seed;  // target accuracy per seed, in seed order
  double mean = 0.0;
  double stddev = 0.0;           // sample standard deviation
};

inline SummaryRow summarize(std::string setting, std::vector<double> values) {
  SummaryRow r{std::move(setting), std::move(values), 0.0, 0.0};
  const double n = static_cast<double>(r.per_seed.size());
  for (double v : r.per_seed) r.mean += v;
  if (!r.per_seed.empty()) r.mean /= n;
  if (r.per_seed.size() > 1) {
    double ss = 0.0;
    for (double v : r.per_seed) ss += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

enum class AblationCell { none, rank, kl, nuclear, nuclear_kl, rank_kl };

inline const std::vector<AblationCell>& all_ablation_cells() {
  static const std::vector<AblationCell> cells{AblationCell::none,       AblationCell::rank,
                                               AblationCell::kl,         AblationCell::nuclear,
                                               AblationCell::nuclear_kl, AblationCell::rank_kl};
  return cells;
}

inline std::string to_string(AblationCell c) {
  switch (c) {
    case AblationCell::none: return "none";
    case AblationCell::rank: return "rank";
    case AblationCell::kl: return "kl";
    case AblationCell::nuclear: return "nuclear";
    case AblationCell::nuclear_kl: return "nuclear+kl";
    case AblationCell::rank_kl: return "rank+kl";
  }
  return "?";
}

inline AblationCell parse_ablation_cell(std::string_view s) {
  for (AblationCell c : all_ablation_cells())
    if (to_string(c) == s) return c;
  throw Error("unknown ablation cell '" + std::string(s) +
              "' (expected none, rank, kl, nuclear, nuclear+kl, rank+kl)");
}

/// The base configuration with the terms of `cell` switched on or off.
inline TrainConfig cell_config(const TrainConfig& base, AblationCell cell) {
  TrainConfig c = base;
  const bool low_rank = cell == AblationCell::rank || cell == AblationCell::rank_kl ||
                        cell == AblationCell::nuclear || cell == AblationCell::nuclear_kl;
  const bool kl = cell == AblationCell::kl || cell == AblationCell::rank_kl ||
                  cell == AblationCell::nuclear_kl;
  const bool nuclear = cell == AblationCell::nuclear || cell == AblationCell::nuclear_kl;
  c.lambda1 = low_rank ? (nuclear ? base.lambda_nuclear : base.lambda1) : 0.0;
  c.lambda2 = kl ? base.lambda2 : 0.0;
  c.rank_penalty = nuclear ? RankPenalty::nuclear : RankPenalty::singular_value;
  return c;
}

/// Noisy, shifted benchmark used by the ablation and rank-sweep studies.
inline SyntheticConfig benchmark_data_config() {
  SyntheticConfig c;
  c.noise_std = 0.6;
  c.target_shift = 0.35;
  c.target_samples_per_class = 200;
  return c;
}

/// Penalty weights matched to the benchmark's loss scale.
inline TrainConfig benchmark_train_config() {
  TrainConfig c;
  c.lambda1 = 0.1;
  c.lambda2 = 0.01;
  c.lambda_nuclear = 0.01;
  return c;
}

/// Rank-dominated weights for singular-value tracking.
inline TrainConfig spectrum_train_config() {
  TrainConfig c = benchmark_train_config();
  c.lambda1 = 0.5;
  c.lambda2 = 0.001;
  c.log_singular_values = 8;
  return c;
}

/// One model per (cell, seed); rows summarize target accuracy per cell.
inline std::vector<SummaryRow> ablate_components(const TrainConfig& base,
                                                 const DomainDataset& sources,
                                                 const DomainDataset& target,
                                                 const std::vector<AblationCell>& cells,
                                                 const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 3) throw Error("ablate_components: needs at least 3 seeds");
  if (cells.empty()) throw Error("ablate_components: no cells requested");
  if (std::set<AblationCell>(cells.begin(), cells.end()).size() != cells.size())
    throw Error("ablate_components: duplicate cells");
  std::vector<double> acc(cells.size() * seeds.size());
  parallel_for(acc.size(), [&](std::size_t job) {
    TrainConfig cfg = cell_config(base, cells[job / seeds.size()]);
    cfg.seed = seeds[job % seeds.size()];
    acc[job] = *train_and_score(cfg, sources, target).result.target_accuracy;
  });
  std::vector<SummaryRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c)
    rows.push_back(summarize(to_string(cells[c]),
                             {acc.begin() + static_cast<std::ptrdiff_t>(c * seeds.size()),
                              acc.begin() + static_cast<std::ptrdiff_t>((c + 1) * seeds.size())}));
  return rows;
}

/// Target accuracy as a function of the rank target.
inline std::vector<SummaryRow> sweep_rank(const TrainConfig& base, const DomainDataset& sources,
                                          const DomainDataset& target,
                                          const std::vector<std::size_t>& ranks,
                                          const std::vector<std::uint64_t>& seeds) {
  if (ranks.empty()) throw Error("sweep_rank: no rank values");
  if (seeds.empty()) throw Error("sweep_rank: no seeds");
  if (std::set<std::size_t>(ranks.begin(), ranks.end()).size() != ranks.size())
    throw Error("sweep_rank: duplicate rank values");
  const std::size_t batch_total = base.batch_per_domain * sources.num_domains;
  const std::size_t hi = std::min(batch_total, base.latent_dim) - 1;
  for (std::size_t r : ranks)
    if (r < 1 || r > hi)
      throw Error("sweep_rank: rank " + std::to_string(r) + " outside [1, " + std::to_string(hi) +
                  "]");
  std::vector<double> acc(ranks.size() * seeds.size());
  parallel_for(acc.size(), [&](std::size_t job) {
    TrainConfig cfg = base;
    cfg.rank_target = ranks[job / seeds.size()];
    cfg.seed = seeds[job % seeds.size()];
    acc[job] = *train_and_score(cfg, sources, target).result.target_accuracy;
  });
  std::vector<SummaryRow> rows;
  for (std::size_t r = 0; r < ranks.size(); ++r)
    rows.push_back(summarize(std::to_string(ranks[r]),
                             {acc.begin() + static_cast<std::ptrdiff_t>(r * seeds.size()),
                              acc.begin() + static_cast<std::ptrdiff_t>((r + 1) * seeds.size())}));
  return rows;
}

/// Tab-separated table: header row, then setting, mean, std, n and the
/// comma-joined per-seed values.
inline std::string format_table(const std::string& key, const std::vector<SummaryRow>& rows) {
  std::string out = key + "\tmean\tstd\tn\tper_seed\n";
  for (const auto& r : rows) {
    out += r.setting + "\t" + detail::format_double(r.mean) + "\t" +
           detail::format_double(r.stddev) + "\t" + std::to_string(r.per_seed.size()) + "\t";
    for (std::size_t i = 0; i < r.per_seed.size(); ++i) {
      if (i) out += ",";
      out += detail::format_double(r.per_seed[i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace lddg

#endif  // LDDG_EXPERIMENTS_HPP_
