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

#ifndef LDDG_LOSSES_HPP_
#define LDDG_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lddg/linalg.hpp"

namespace lddg {

enum class LossKind { cross_entropy, focal_alternate };

inline std::string_view to_string(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "focal_alternate";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "cross_entropy") return LossKind::cross_entropy;
  if (s == "focal_alternate") return LossKind::focal_alternate;
  throw Error("unknown loss kind '" + std::string(s) + "'");
}

/// Classification loss selection. gamma and beta_shift parameterize the
/// focal alternate form -log(sigmoid(gamma * x_t + beta_shift)) / gamma.
struct LossConfig {
  LossKind kind = LossKind::cross_entropy;
  double gamma = 2.0;
  double beta_shift = 1.0;

  void validate() const {
    if (kind == LossKind::focal_alternate && !(gamma > 0.0))
      throw Error("LossConfig: gamma must be positive for focal_alternate");
    if (!std::isfinite(beta_shift)) throw Error("LossConfig: beta_shift must be finite");
  }
};

struct LossValue {
  double value = 0.0;
  std::vector<double> grad;  // d value / d logits
};

/// log(sum(exp(a))), shifted by max(a).
inline double log_sum_exp(std::span<const double> a) {
  if (a.empty()) throw Error("log_sum_exp: empty input");
  const double m = *std::max_element(a.begin(), a.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double x : a) s += std::exp(x - m);
  return m + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) p[k] = std::exp(logits[k] - lse);
  return p;
}

namespace detail {

inline void check_label(std::span<const double> logits, std::size_t label, const char* who) {
  if (logits.empty()) throw Error(std::string(who) + ": empty logits");
  if (label >= logits.size()) {
    throw Error(std::string(who) + ": label " + std::to_string(label) +
                " out of range for " + std::to_string(logits.size()) + " classes");
  }
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

/// -log softmax(logits)[label]; gradient softmax - one_hot.
inline LossValue cross_entropy_softmax(std::span<const double> logits, std::size_t label) {
  detail::check_label(logits, label, "cross_entropy_softmax");
  const double lse = log_sum_exp(logits);
  LossValue out;
  out.value = lse - logits[label];
  out.grad.resize(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) out.grad[k] = std::exp(logits[k] - lse);
  out.grad[label] -= 1.0;
  return out;
}

/// Signed one-vs-rest margin of the true class:
/// logits[label] - log_sum_exp(logits without label).
inline double one_vs_rest_margin(std::span<const double> logits, std::size_t label) {
  std::vector<double> others;
  others.reserve(logits.size() - 1);
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (k != label) others.push_back(logits[k]);
  return logits[label] - log_sum_exp(others);
}

/// Focal alternate form on the one-vs-rest margin x_t:
/// value = softplus(-(gamma * x_t + beta)) / gamma.
inline LossValue focal_alternate(std::span<const double> logits, std::size_t label,
                                 const LossConfig& cfg) {
  detail::check_label(logits, label, "focal_alternate");
  if (logits.size() < 2) throw Error("focal_alternate: needs at least two classes");
  if (!(cfg.gamma > 0.0)) throw Error("focal_alternate: gamma must be positive");

  std::vector<double> others;
  others.reserve(logits.size() - 1);
  for (std::size_t k = 0; k < logits.size(); ++k)
    if (k != label) others.push_back(logits[k]);
  const double lse_others = log_sum_exp(others);
  const double margin = logits[label] - lse_others;
  const double u = cfg.gamma * margin + cfg.beta_shift;

  LossValue out;
  out.value = detail::softplus(-u) / cfg.gamma;
  // d value / d margin = -sigmoid(-u)
  const double dm = -detail::sigmoid(-u);
  out.grad.assign(logits.size(), 0.0);
  out.grad[label] = dm;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (k == label) continue;
    out.grad[k] = -dm * std::exp(logits[k] - lse_others);
  }
  return out;
}

inline LossValue classification_loss(std::span<const double> logits, std::size_t label,
                                     const LossConfig& cfg) {
  return cfg.kind == LossKind::cross_entropy ? cross_entropy_softmax(logits, label)
                                             : focal_alternate(logits, label, cfg);
}

}  // namespace lddg

#endif  // LDDG_LOSSES_HPP_
