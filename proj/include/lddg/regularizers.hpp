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

#ifndef LDDG_REGULARIZERS_HPP_
#define LDDG_REGULARIZERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lddg/linalg.hpp"

namespace lddg {

/// Penalty value plus a sub-gradient with the shape of the latent batch.
struct RankLossResult {
  double value = 0.0;
  Matrix subgradient;
  /// True when the requested singular value does not exist for this shape;
  /// value and subgradient are then zero.
  bool vacuous = false;
};

/// (C+1)-th singular value of the mode-1 flattened latent batch (rows index
/// samples) with sub-gradient U[:, C] V[:, C]ᵀ.
inline RankLossResult rank_loss(const Matrix& z, std::size_t num_classes) {
  if (num_classes < 1) throw Error("rank_loss: num_classes must be >= 1");
  RankLossResult out;
  out.subgradient = Matrix(z.rows(), z.cols());
  if (std::min(z.rows(), z.cols()) <= num_classes) {
    out.vacuous = true;
    return out;
  }
  const SvdResult s = svd(z);
  const std::size_t k = num_classes;  // zero-based index of sigma_{C+1}
  out.value = s.sigma[k];
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) out.subgradient(i, j) = s.u(i, k) * s.v(j, k);
  return out;
}

/// Nuclear norm sum(sigma) with sub-gradient U Vᵀ; the conventional low-rank
/// surrogate used as an ablation baseline.
inline RankLossResult nuclear_norm_loss(const Matrix& z) {
  RankLossResult out;
  out.subgradient = Matrix(z.rows(), z.cols());
  if (z.rows() == 0 || z.cols() == 0) {
    out.vacuous = true;
    return out;
  }
  const SvdResult s = svd(z);
  for (double v : s.sigma) out.value += v;
  out.subgradient = matmul_nt(s.u, s.v);
  return out;
}

enum class RankMode { per_batch, per_class };

inline std::string_view to_string(RankMode m) {
  return m == RankMode::per_batch ? "per_batch" : "per_class";
}

inline RankMode parse_rank_mode(std::string_view s) {
  if (s == "per_batch") return RankMode::per_batch;
  if (s == "per_class") return RankMode::per_class;
  throw Error("unknown rank mode '" + std::string(s) + "'");
}

/// Per-class variant: each same-class block of rows is pushed towards rank
/// one (sigma_2 penalized), averaged over classes whose block has at least
/// two rows. Classes with fewer rows contribute nothing.
inline RankLossResult rank_loss_per_class(const Matrix& z, std::span<const std::size_t> labels) {
  if (labels.size() != z.rows()) throw Error("rank_loss_per_class: label count mismatch");
  RankLossResult out;
  out.subgradient = Matrix(z.rows(), z.cols());
  if (labels.empty()) {
    out.vacuous = true;
    return out;
  }
  const std::size_t num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::size_t used = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) rows.push_back(i);
    if (std::min(rows.size(), z.cols()) <= 1) continue;
    Matrix block(rows.size(), z.cols());
    for (std::size_t r = 0; r < rows.size(); ++r)
      std::copy(z.row(rows[r]).begin(), z.row(rows[r]).end(), block.row(r).begin());
    const RankLossResult part = rank_loss(block, 1);
    out.value += part.value;
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < z.cols(); ++j)
        out.subgradient(rows[r], j) += part.subgradient(r, j);
    ++used;
  }
  if (used == 0) {
    out.vacuous = true;
    return out;
  }
  out.value /= static_cast<double>(used);
  out.subgradient *= 1.0 / static_cast<double>(used);
  return out;
}

inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 30.0;

/// Diagonal Gaussian q(z|x) per sample: rows are samples, columns latent dims.
struct GaussianPosterior {
  Matrix mu;
  Matrix log_var;  // clamped to [kLogVarMin, kLogVarMax]

  /// Builds a posterior, clamping log-variances into the safe range.
  static GaussianPosterior make(Matrix mu, Matrix log_var) {
    if (!mu.same_shape(log_var))
      throw Error("GaussianPosterior: mu " + mu.shape_string() + " and log_var " +
                  log_var.shape_string() + " differ in shape");
    for (double& v : log_var.data()) v = std::clamp(v, kLogVarMin, kLogVarMax);
    return GaussianPosterior{std::move(mu), std::move(log_var)};
  }
};

struct KlResult {
  double value = 0.0;
  Matrix grad_mu;
  Matrix grad_log_var;
};

/// Closed-form KL(N(mu, var) || N(0, 1)) in one dimension.
inline double kl_normal_to_standard(double mu, double var) {
  return 0.5 * (mu * mu + var - std::log(var) - 1.0);
}

/// KL(q || N(0, I)) summed over latent dims and averaged over the batch.
inline KlResult kl_standard_normal(const GaussianPosterior& post) {
  const std::size_t n = post.mu.rows();
  KlResult out{0.0, Matrix(post.mu.rows(), post.mu.cols()),
               Matrix(post.mu.rows(), post.mu.cols())};
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  auto mu = post.mu.data();
  auto lv = post.log_var.data();
  auto gm = out.grad_mu.data();
  auto gl = out.grad_log_var.data();
  double total = 0.0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    const double ev = std::exp(lv[k]);
    // expm1 keeps the exact zero at the prior.
    total += 0.5 * (mu[k] * mu[k] + (std::expm1(lv[k]) - lv[k]));
    gm[k] = mu[k] * inv_n;
    gl[k] = 0.5 * (ev - 1.0) * inv_n;
  }
  out.value = total * inv_n;
  return out;
}

/// z = mu + exp(log_var / 2) * noise.
inline Matrix reparameterize(const GaussianPosterior& post, const Matrix& noise) {
  if (!noise.same_shape(post.mu))
    throw Error("reparameterize: noise " + noise.shape_string() + " does not match mu " +
                post.mu.shape_string());
  Matrix z = post.mu;
  auto zd = z.data();
  auto lv = post.log_var.data();
  auto nd = noise.data();
  for (std::size_t k = 0; k < zd.size(); ++k) zd[k] += std::exp(0.5 * lv[k]) * nd[k];
  return z;
}

}  // namespace lddg

#endif  // LDDG_REGULARIZERS_HPP_
