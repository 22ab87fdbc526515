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
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lddg/data.hpp"
#include "oracles.hpp"

namespace lddg {
namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

TEST(Synthetic, CountsAndShapes) {
  SyntheticConfig c;
  const SyntheticData d = generate_synthetic(c);
  EXPECT_EQ(d.sources.records.size(), c.num_domains * c.num_classes * c.samples_per_domain_class);
  EXPECT_EQ(d.target.records.size(), c.num_classes * c.target_samples_per_class);
  EXPECT_EQ(d.target.num_domains, 1u);
  EXPECT_EQ(d.source_latents.rows(), d.sources.records.size());
  EXPECT_NO_THROW(d.sources.validate());
  for (const auto& idx : d.sources.indices_by_domain()) EXPECT_FALSE(idx.empty());
}

TEST(Synthetic, SameSeedSameData) {
  SyntheticConfig c;
  c.seed = 9;
  EXPECT_EQ(format_dataset(generate_synthetic(c).sources), format_dataset(generate_synthetic(c).sources));
  SyntheticConfig other = c;
  other.seed = 10;
  EXPECT_NE(generate_synthetic(c).sources, generate_synthetic(other).sources);
}

TEST(Synthetic, NoiselessLatentsOfTwoClassesHaveRankTwo) {
  SyntheticConfig c;
  c.num_classes = 2;
  c.noise_std = 0.0;
  c.samples_per_domain_class = 1;
  const auto s = singular_values(generate_synthetic(c).source_latents);
  EXPECT_GT(s[1], 0.1);
  EXPECT_LT(s[2], 1e-12);
}

TEST(Synthetic, NoiselessRankPropertyAcrossConfigs) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SyntheticConfig c;
    c.noise_std = 0.0;
    c.seed = seed;
    const auto s = singular_values(generate_synthetic(c).source_latents);
    EXPECT_LT(s[c.num_classes], 1e-10);
  }
}

TEST(Synthetic, DomainMapsAreWellConditioned) {
  const SyntheticWorld w = make_world(SyntheticConfig{});
  for (const Matrix& a : w.maps) {
    const auto s = singular_values(a);
    EXPECT_GE(s.back(), 0.5 - 1e-12);
    EXPECT_LE(s.front(), 2.0 + 1e-12);
  }
  EXPECT_LT((matmul_nt(w.directions, w.directions) - Matrix::identity(4)).max_abs(), 1e-12);
}

TEST(Synthetic, OneHotMixtureReproducesSourceDistribution) {
  SyntheticConfig c;
  c.target_mixture = {0.0, 1.0, 0.0};
  const SyntheticWorld w = make_world(c);
  Rng a(1), b(2);
  const double crit = std::sqrt(-std::log(0.01 / 2.0 / c.latent_dim_true) / 2.0) * std::sqrt(2.0 / 1000.0);
  for (std::size_t j = 0; j < c.latent_dim_true; ++j) {
    std::vector<double> src, tgt;
    Rng ra(1, "ks", j), rb(2, "ks", j);
    for (int s = 0; s < 1000; ++s) {
      src.push_back(w.sample_latent(1, 2, ra)[j]);
      tgt.push_back(w.sample_target_latent(2, rb)[j]);
    }
    EXPECT_LT(ks_statistic(src, tgt), crit) << "coordinate " << j;
  }
}

TEST(Synthetic, TargetMeanIsMixtureOfSourceMeans) {
  SyntheticConfig c;
  c.target_mixture = {0.5, 0.1, 0.2};
  const SyntheticWorld w = make_world(c);
  Rng rng(3);
  const std::size_t n = 10000, label = 1;
  std::vector<double> sum(c.latent_dim_true, 0.0), sq(c.latent_dim_true, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto z = w.sample_target_latent(label, rng);
    for (std::size_t j = 0; j < z.size(); ++j) {
      sum[j] += z[j];
      sq[j] += z[j] * z[j];
    }
  }
  double scale = 0.0;
  for (std::size_t k = 0; k < 3; ++k) scale += c.target_mixture[k] * c.domain_scales[k];
  scale /= c.mixture_norm();
  for (std::size_t j = 0; j < c.latent_dim_true; ++j) {
    const double mean = sum[j] / n;
    const double se = std::sqrt((sq[j] / n - mean * mean) / n);
    EXPECT_NEAR(mean, scale * w.directions(label, j), 4.0 * se + 1e-12);
  }
}

TEST(Synthetic, LinearProbeOnTrueLatentsIsPerfect) {
  SyntheticConfig c;
  c.noise_std = 0.0;
  const SyntheticData d = generate_synthetic(c);
  const Matrix& z = d.source_latents;
  Eigen::MatrixXd a(z.rows(), z.cols() + 1), y = Eigen::MatrixXd::Zero(z.rows(), c.num_classes);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    for (std::size_t j = 0; j < z.cols(); ++j) a(i, j) = z(i, j);
    a(i, z.cols()) = 1.0;
    y(i, d.sources.records[i].label) = 1.0;
  }
  const Eigen::MatrixXd w = a.completeOrthogonalDecomposition().solve(y);
  const Eigen::MatrixXd scores = a * w;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best;
    scores.row(i).maxCoeff(&best);
    hits += static_cast<std::size_t>(best) == d.sources.records[i].label;
  }
  EXPECT_EQ(hits, z.rows());
}

TEST(SyntheticConfigCheck, RejectsInfeasibleSettings) {
  SyntheticConfig c;
  c.latent_dim_true = 3;
  EXPECT_THROW(generate_synthetic(c), Error);
  c = SyntheticConfig{};
  c.target_mixture = {0.5, 0.5, 0.5};
  EXPECT_THROW(c.validate(), Error);
  c.norm_bound = 1.5;
  EXPECT_NO_THROW(c.validate());
  c = SyntheticConfig{};
  c.domain_scales = {1.0};
  EXPECT_THROW(c.validate(), Error);
  c = SyntheticConfig{};
  c.feature_dim = 4;
  EXPECT_THROW(c.validate(), Error);
}

TEST(DatasetFile, TwoRecordRoundTrip) {
  DomainDataset d{2, 3, 2, {{0, 2, {0.1, -1e-300}}, {1, 0, {3.0, 1.0 / 3.0}}}};
  EXPECT_EQ(parse_dataset(format_dataset(d)), d);
  const auto path = temp_path("lddg_two.txt");
  save_dataset(d, path);
  EXPECT_EQ(load_dataset(path), d);
}

TEST(DatasetFile, RandomRoundTripsAreExact) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    Rng rng(s, "file");
    DomainDataset d{1 + rng.index(4), 1 + rng.index(5), 1 + rng.index(6), {}};
    const std::size_t n = rng.index(20);
    for (std::size_t i = 0; i < n; ++i) {
      Record r{rng.index(d.num_domains), rng.index(d.num_classes), {}};
      for (std::size_t j = 0; j < d.feature_dim; ++j)
        r.features.push_back(rng.normal() * std::pow(10.0, rng.uniform(-20, 20)));
      d.records.push_back(r);
    }
    EXPECT_EQ(parse_dataset(format_dataset(d)), d);
  }
}

TEST(DatasetFile, EmptyBodyLoads) {
  const DomainDataset d = parse_dataset("LDDG-DS 1 2 3 4 0\n");
  EXPECT_TRUE(d.records.empty());
  EXPECT_EQ(d.feature_dim, 4u);
}

std::string error_of(const std::string& text) {
  try {
    parse_dataset(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST(DatasetFile, ErrorsNameTheLine) {
  const std::string four = "0 0 1\n0 1 2\n1 0 3\n1 1 4\n";
  EXPECT_NE(error_of("LDDG-DS 1 2 2 1 5\n" + four).find("count mismatch"), std::string::npos);
  EXPECT_NE(error_of("LDDG-DS 1 2 2 1 3\n" + four).find("line 5"), std::string::npos);
  EXPECT_NE(error_of("LDDG-DS 1 2 2 1 1\n2 0 1\n").find("line 2: domain id 2 out of range"),
            std::string::npos);
  EXPECT_NE(error_of("LDDG-DS 1 2 2 1 2\n0 0 1\n0 7 1\n").find("line 3: label 7"), std::string::npos);
  EXPECT_NE(error_of("LDDG-DS 1 2 2 1 1\n0 0 x\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("LDDG-DS 1 2 2 2 1\n0 0 1\n").find("line 2: expected 4 fields"), std::string::npos);
  EXPECT_NE(error_of("LDDG 1 2 2 1 1\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("").find("line 1"), std::string::npos);
  EXPECT_THROW(load_dataset(temp_path("lddg_does_not_exist.txt")), Error);
}

TEST(Batches, TwoDomainsOfFour) {
  DomainDataset d{2, 1, 1, {}};
  for (std::size_t i = 0; i < 8; ++i) d.records.push_back({i / 4, 0, {double(i)}});
  const auto b = sample_batches(d, 2, 0, 0);
  ASSERT_EQ(b.size(), 2u);
  std::vector<std::size_t> all;
  for (const auto& batch : b) {
    EXPECT_EQ(batch.size(), 4u);
    std::size_t from0 = 0;
    for (std::size_t i : batch) from0 += d.records[i].domain == 0;
    EXPECT_EQ(from0, 2u);
    all.insert(all.end(), batch.begin(), batch.end());
  }
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, d.all_indices());
}

TEST(Batches, EveryRecordOncePerEpochIncludingRaggedTail) {
  const SyntheticData s = generate_synthetic(SyntheticConfig{});
  for (std::size_t epoch = 0; epoch < 3; ++epoch) {
    const auto b = sample_batches(s.sources, 16, 7, epoch);
    EXPECT_EQ(b.size(), 13u);
    EXPECT_EQ(b.back().size(), 3u * (200 % 16));
    std::vector<std::size_t> all;
    for (const auto& batch : b) all.insert(all.end(), batch.begin(), batch.end());
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, s.sources.all_indices());
  }
}

TEST(Batches, DeterministicPerSeedAndEpoch) {
  const SyntheticData s = generate_synthetic(SyntheticConfig{});
  EXPECT_EQ(sample_batches(s.sources, 8, 1, 4), sample_batches(s.sources, 8, 1, 4));
  EXPECT_NE(sample_batches(s.sources, 8, 1, 4), sample_batches(s.sources, 8, 1, 5));
  EXPECT_NE(sample_batches(s.sources, 8, 1, 4), sample_batches(s.sources, 8, 2, 4));
  EXPECT_THROW(sample_batches(s.sources, 0, 1, 0), Error);
}

TEST(ValidationSplit, StratifiedAndDisjoint) {
  const SyntheticData s = generate_synthetic(SyntheticConfig{});
  const auto [train, val] = split_validation(s.sources, 0.2, 3);
  EXPECT_EQ(val.records.size(), 3u * 4u * 10u);
  EXPECT_EQ(train.records.size() + val.records.size(), s.sources.records.size());
  std::vector<std::size_t> per(12, 0);
  for (const auto& r : val.records) ++per[r.domain * 4 + r.label];
  for (std::size_t n : per) EXPECT_EQ(n, 10u);
}

}  // namespace
}  // namespace lddg
