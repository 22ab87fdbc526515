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

#include <cmath>
#include <vector>

#include "lddg/linalg.hpp"
#include "lddg/losses.hpp"
#include "lddg/rng.hpp"
#include "oracles.hpp"

namespace lddg {
namespace {

Matrix as_row(const std::vector<double>& v) { return Matrix(1, v.size(), v); }

TEST(LogSumExp, StableForHugeLogits) {
  const std::vector<double> a{1000.0, 1000.0};
  EXPECT_NEAR(log_sum_exp(a), 1000.0 + std::log(2.0), 1e-12);
  const std::vector<double> b{-1000.0, -1001.0};
  EXPECT_TRUE(std::isfinite(log_sum_exp(b)));
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  for (std::size_t c : {2u, 4u, 7u}) {
    const std::vector<double> flat(c, -3.5);
    EXPECT_NEAR(cross_entropy_softmax(flat, 0).value, std::log(static_cast<double>(c)), 1e-15);
  }
  EXPECT_NEAR(std::log(7.0), 1.9459, 5e-5);
}

TEST(CrossEntropy, MatchesExtendedPrecision) {
  Rng rng(21);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(2 + rng.index(8));
    for (double& v : z) v = rng.normal(0.0, 10.0);
    const std::size_t y = rng.index(z.size());
    EXPECT_NEAR(cross_entropy_softmax(z, y).value, static_cast<double>(oracle::cross_entropy(z, y)),
                1e-12 * std::max(1.0, std::abs(z[y])));
  }
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  const std::vector<double> z{0.3, -1.2, 2.0};
  const LossValue l = cross_entropy_softmax(z, 1);
  const auto p = softmax(z);
  for (std::size_t k = 0; k < z.size(); ++k) EXPECT_NEAR(l.grad[k], p[k] - (k == 1), 1e-15);
}

TEST(CrossEntropy, RejectsBadLabel) {
  const std::vector<double> z{0.0, 1.0};
  EXPECT_THROW(cross_entropy_softmax(z, 2), Error);
}

TEST(FocalAlternate, MatchesExtendedPrecision) {
  Rng rng(22);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> z(2 + rng.index(6));
    for (double& v : z) v = rng.normal(0.0, 5.0);
    const std::size_t y = rng.index(z.size());
    const double gamma = rng.uniform(0.5, 4.0), beta = rng.uniform(-2.0, 2.0);
    EXPECT_NEAR(focal_alternate(z, y, LossConfig{LossKind::focal_alternate, gamma, beta}).value,
                static_cast<double>(oracle::focal_alternate(z, y, gamma, beta)), 1e-11);
  }
}

TEST(FocalAlternate, GradientMatchesFiniteDifferences) {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> z(2 + rng.index(5));
    for (double& v : z) v = rng.normal(0.0, 2.0);
    const std::size_t y = rng.index(z.size());
    const LossConfig fc{LossKind::focal_alternate, 2.0, 1.0};
    const LossValue l = focal_alternate(z, y, fc);
    const Matrix fd = finite_diff_grad(
        [&](const Matrix& m) {
          return focal_alternate(m.data(), y, fc).value;
        },
        as_row(z), 1e-6);
    EXPECT_LT(max_relative_error(as_row(l.grad), fd, 1e-8), 1e-7);
  }
}

TEST(FocalAlternate, NeedsTwoClasses) {
  const std::vector<double> z{1.0};
  EXPECT_THROW(focal_alternate(z, 0, LossConfig{LossKind::focal_alternate, 2.0, 1.0}), Error);
}

TEST(FocalAlternate, MarginDefinition) {
  const std::vector<double> z{2.0, 0.0, 0.0};
  EXPECT_NEAR(one_vs_rest_margin(z, 0), 2.0 - std::log(2.0), 1e-15);
}

TEST(LossConfig, ParsesKindsAndValidates) {
  EXPECT_EQ(parse_loss_kind("cross_entropy"), LossKind::cross_entropy);
  EXPECT_EQ(parse_loss_kind("focal_alternate"), LossKind::focal_alternate);
  EXPECT_THROW(parse_loss_kind("focal"), Error);
  LossConfig c{LossKind::focal_alternate, 0.0, 1.0};
  EXPECT_THROW(c.validate(), Error);
  const std::vector<double> z{0.5, -0.5};
  EXPECT_DOUBLE_EQ(classification_loss(z, 0, LossConfig{}).value, cross_entropy_softmax(z, 0).value);
}

}  // namespace
}  // namespace lddg
