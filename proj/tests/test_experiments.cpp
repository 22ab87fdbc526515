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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lddg/experiments.hpp"

namespace lddg {
namespace {

SyntheticConfig small_data(std::size_t classes = 4) {
  SyntheticConfig c;
  c.num_classes = classes;
  c.samples_per_domain_class = 20;
  c.target_samples_per_class = 20;
  c.noise_std = 0.05;
  return c;
}

TrainConfig quick(std::size_t epochs = 3) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_per_domain = 8;
  c.encoder_widths = {16};
  c.head_hidden = 8;
  c.latent_dim = 8;
  return c;
}

TEST(Evaluate, SingleRecordMatchingPrediction) {
  const ModelParams p = init_params(quick().shape(3, 4), 1);
  DomainDataset d{1, 4, 3, {{0, 0, {0.2, -0.4, 1.0}}}};
  d.records[0].label = argmax_row(predict_logits(p, d.features(d.all_indices())).row(0));
  const EvalResult r = evaluate(p, d);
  EXPECT_EQ(r.overall, 1.0);
  EXPECT_EQ(r.records, 1u);
  d.records[0].label = (d.records[0].label + 1) % 4;
  EXPECT_EQ(evaluate(p, d).overall, 0.0);
}

TEST(Evaluate, ConstantLogitsGiveClassZeroFrequency) {
  ModelParams p = init_params(quick().shape(3, 3), 2);
  p.classifier.weight = Matrix(p.classifier.weight.rows(), 3);
  p.classifier.bias = Matrix(1, 3, std::vector<double>{1.0, 0.0, 0.0});
  DomainDataset d{2, 3, 3, {}};
  Rng rng(3);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < 37; ++i) {
    const std::size_t y = rng.index(3);
    zeros += y == 0;
    d.records.push_back({i % 2, y, {rng.normal(), rng.normal(), rng.normal()}});
  }
  EXPECT_DOUBLE_EQ(evaluate(p, d).overall, static_cast<double>(zeros) / 37.0);
}

TEST(Evaluate, MatchesPerRecordRecount) {
  const SyntheticData s = generate_synthetic(small_data());
  const ModelParams p = init_params(quick().shape(s.sources.feature_dim, 4), 4);
  const EvalResult r = evaluate(p, s.sources);
  std::vector<std::size_t> hits(3, 0), n(3, 0);
  for (std::size_t i = 0; i < s.sources.records.size(); ++i) {
    const Record& rec = s.sources.records[i];
    const Matrix x(1, rec.features.size(), rec.features);
    ++n[rec.domain];
    hits[rec.domain] += argmax_row(predict_logits(p, x).row(0)) == rec.label;
  }
  std::size_t total = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(r.per_domain_n[k], n[k]);
    EXPECT_DOUBLE_EQ(r.per_domain[k], static_cast<double>(hits[k]) / n[k]);
    total += hits[k];
  }
  EXPECT_DOUBLE_EQ(r.overall, static_cast<double>(total) / s.sources.records.size());
}

TEST(Evaluate, RejectsEmptyAndMismatchedData) {
  const ModelParams p = init_params(quick().shape(3, 2), 5);
  EXPECT_THROW(evaluate(p, DomainDataset{1, 2, 3, {}}), Error);
  EXPECT_THROW(evaluate(p, DomainDataset{1, 2, 4, {{0, 0, {1, 2, 3, 4}}}}), Error);
}

TEST(Train, ZeroEpochsKeepsInitialParameters) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig c = quick(0);
  c.seed = 6;
  const TrainOutput out = train(c, s.sources);
  EXPECT_TRUE(out.result.epochs.empty());
  EXPECT_EQ(serialize_model(out.params),
            serialize_model(init_params(c.shape(s.sources.feature_dim, 4), 6)));
}

TEST(Train, SeparableDataFitsWithoutRegularizers) {
  const SyntheticData s = generate_synthetic(small_data(2));
  TrainConfig c = quick(50);
  c.lambda1 = 0.0;
  c.lambda2 = 0.0;
  c.learning_rate = 1e-2;
  const TrainOutput out = train(c, s.sources);
  EXPECT_EQ(out.result.source.overall, 1.0);
  EXPECT_LT(out.result.epochs.back().loss.total, out.result.epochs.front().loss.total);
}

TEST(Train, EpochLossDecomposes) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig c = quick(4);
  c.lambda1 = 0.1;
  c.lambda2 = 0.01;
  c.log_singular_values = 5;
  std::size_t calls = 0;
  const TrainOutput out = train(c, s.sources, [&](const EpochRecord&) { ++calls; });
  EXPECT_EQ(calls, 4u);
  for (const auto& e : out.result.epochs) {
    const auto& l = e.loss;
    EXPECT_NEAR(l.total, l.cls + c.lambda1 * l.rank + c.lambda2 * l.kl, 1e-12 * (1 + l.total));
    EXPECT_GE(l.rank, 0.0);
    EXPECT_GE(l.kl, 0.0);
    EXPECT_EQ(e.singular_values.size(), 5u);
    EXPECT_TRUE(std::is_sorted(e.singular_values.rbegin(), e.singular_values.rend()));
  }
}

TEST(Train, LearningRateSchedule) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 0), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 79), 1e-3);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 80), 1e-4);
  EXPECT_DOUBLE_EQ(learning_rate_at(c, 160), 1e-5);
}

TEST(Train, DeterministicPerSeed) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig c = quick(2);
  c.seed = 8;
  EXPECT_EQ(serialize_model(train(c, s.sources).params), serialize_model(train(c, s.sources).params));
  TrainConfig d = c;
  d.seed = 9;
  EXPECT_NE(serialize_model(train(c, s.sources).params), serialize_model(train(d, s.sources).params));
}

TEST(Train, ValidationTracksBestEpoch) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig c = quick(3);
  c.validation_fraction = 0.25;
  const TrainOutput out = train(c, s.sources);
  ASSERT_TRUE(out.result.best_epoch.has_value());
  EXPECT_GE(*out.result.best_epoch, 1u);
  EXPECT_LE(*out.result.best_epoch, 3u);
  EXPECT_TRUE(out.best_params.has_value());
}

TEST(Train, RejectsDomainWithoutRecords) {
  DomainDataset d{2, 2, 2, {{0, 0, {1, 2}}, {0, 1, {2, 1}}}};
  EXPECT_THROW(train(quick(1), d), Error);
  EXPECT_THROW(train(quick(1), DomainDataset{1, 2, 2, {}}), Error);
}

TEST(Ablation, CellMapping) {
  TrainConfig b;
  b.lambda1 = 0.3;
  b.lambda2 = 0.2;
  b.lambda_nuclear = 0.1;
  auto check = [&](AblationCell cell, double l1, double l2, RankPenalty pen) {
    const TrainConfig c = cell_config(b, cell);
    EXPECT_EQ(c.lambda1, l1) << to_string(cell);
    EXPECT_EQ(c.lambda2, l2) << to_string(cell);
    EXPECT_EQ(c.rank_penalty, pen) << to_string(cell);
    EXPECT_EQ(parse_ablation_cell(to_string(cell)), cell);
  };
  check(AblationCell::none, 0.0, 0.0, RankPenalty::singular_value);
  check(AblationCell::rank, 0.3, 0.0, RankPenalty::singular_value);
  check(AblationCell::kl, 0.0, 0.2, RankPenalty::singular_value);
  check(AblationCell::nuclear, 0.1, 0.0, RankPenalty::nuclear);
  check(AblationCell::nuclear_kl, 0.1, 0.2, RankPenalty::nuclear);
  check(AblationCell::rank_kl, 0.3, 0.2, RankPenalty::singular_value);
  EXPECT_THROW(parse_ablation_cell("both"), Error);
}

TEST(Ablation, NoneCellIsPlainTraining) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig b = quick(2);
  const TrainConfig none = cell_config(b, AblationCell::none);
  b.lambda1 = 0.0;
  b.lambda2 = 0.0;
  EXPECT_EQ(serialize_model(train(none, s.sources).params), serialize_model(train(b, s.sources).params));
}

TEST(Ablation, TableShapeAndArguments) {
  const SyntheticData s = generate_synthetic(small_data());
  const TrainConfig b = quick(1);
  const auto rows = ablate_components(b, s.sources, s.target, all_ablation_cells(), {1, 2, 3});
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) {
    EXPECT_EQ(r.per_seed.size(), 3u);
    for (double a : r.per_seed) EXPECT_TRUE(a >= 0.0 && a <= 1.0);
  }
  const std::string table = format_table("cell", rows);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 7);
  EXPECT_EQ(table.rfind("cell\tmean\tstd\tn\tper_seed\n", 0), 0u);
  EXPECT_THROW(ablate_components(b, s.sources, s.target, all_ablation_cells(), {1, 2}), Error);
  EXPECT_THROW(ablate_components(b, s.sources, s.target, {AblationCell::kl, AblationCell::kl}, {1, 2, 3}),
               Error);
}

TEST(Sweep, SingleRankMatchesTrainAndScore) {
  const SyntheticData s = generate_synthetic(small_data());
  TrainConfig b = quick(2);
  b.lambda1 = 0.1;
  const auto rows = sweep_rank(b, s.sources, s.target, {3}, {4});
  ASSERT_EQ(rows.size(), 1u);
  b.rank_target = 3;
  b.seed = 4;
  EXPECT_EQ(rows[0].mean, *train_and_score(b, s.sources, s.target).result.target_accuracy);
  EXPECT_EQ(rows[0].setting, "3");
}

TEST(Sweep, RejectsBadRanks) {
  const SyntheticData s = generate_synthetic(small_data());
  const TrainConfig b = quick(1);
  EXPECT_THROW(sweep_rank(b, s.sources, s.target, {2, 2}, {1}), Error);
  EXPECT_THROW(sweep_rank(b, s.sources, s.target, {0}, {1}), Error);
  EXPECT_THROW(sweep_rank(b, s.sources, s.target, {8}, {1}), Error);
  EXPECT_THROW(sweep_rank(b, s.sources, s.target, {}, {1}), Error);
  EXPECT_THROW(sweep_rank(b, s.sources, s.target, {2}, {}), Error);
}

TEST(Summary, MeanAndSampleStddev) {
  const SummaryRow r = summarize("x", {1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(r.mean, 2.5);
  EXPECT_NEAR(r.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(summarize("y", {0.7}).stddev, 0.0);
}

}  // namespace
}  // namespace lddg
