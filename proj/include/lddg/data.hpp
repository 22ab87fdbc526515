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

#ifndef LDDG_DATA_HPP_
#define LDDG_DATA_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lddg/linalg.hpp"
#include "lddg/rng.hpp"

namespace lddg {

struct Record {
  std::size_t domain = 0;
  std::size_t label = 0;
  std::vector<double> features;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Labeled samples tagged with their domain of origin.
struct DomainDataset {
  std::size_t num_domains = 1;
  std::size_t num_classes = 1;
  std::size_t feature_dim = 1;
  std::vector<Record> records;

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;

  std::size_t size() const { return records.size(); }

  void validate() const {
    if (num_domains == 0 || num_classes == 0 || feature_dim == 0)
      throw Error("DomainDataset: counts must be positive");
    for (std::size_t i = 0; i < records.size(); ++i) {
      const Record& r = records[i];
      if (r.domain >= num_domains || r.label >= num_classes || r.features.size() != feature_dim)
        throw Error("DomainDataset: record " + std::to_string(i) + " out of range");
    }
  }

  /// Record indices of each domain, in file order.
  std::vector<std::vector<std::size_t>> indices_by_domain() const {
    std::vector<std::vector<std::size_t>> out(num_domains);
    for (std::size_t i = 0; i < records.size(); ++i) out[records[i].domain].push_back(i);
    return out;
  }

  Matrix features(std::span<const std::size_t> idx) const {
    Matrix x(idx.size(), feature_dim);
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto& f = records[idx[r]].features;
      std::copy(f.begin(), f.end(), x.row(r).begin());
    }
    return x;
  }

  std::vector<std::size_t> labels(std::span<const std::size_t> idx) const {
    std::vector<std::size_t> y(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) y[r] = records[idx[r]].label;
    return y;
  }

  std::vector<std::size_t> all_indices() const {
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
};

/// Parameters of the synthetic multi-domain benchmark.
///
/// Class c in source domain k has latent alpha_k * d_c + N(0, noise_std^2 I)
/// with orthonormal class directions d_c; features are x = A_k z + b_k. The
/// target draws its latent from the beta-weighted mixture of the source
/// latent distributions and uses its own map A_T, b_T: the beta-weighted
/// average of the source maps, displaced by `target_shift`.
struct SyntheticConfig {
  std::size_t num_domains = 3;
  std::size_t num_classes = 4;
  std::size_t feature_dim = 16;
  std::size_t latent_dim_true = 8;
  std::size_t samples_per_domain_class = 50;
  std::vector<double> domain_scales{0.8, 1.0, 1.25};
  double noise_std = 0.05;
  std::vector<double> target_mixture{0.4, 0.3, 0.3};
  double norm_bound = 1.0;
  double offset_scale = 1.0;  // std of the per-domain offsets b_k
  double target_shift = 0.5;  // size of the target map's own displacement
  std::size_t target_samples_per_class = 50;
  std::uint64_t seed = 0;

  /// L1 norm of the mixture weights (they are non-negative).
  double mixture_norm() const {
    return std::accumulate(target_mixture.begin(), target_mixture.end(), 0.0);
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error("SyntheticConfig: " + m); };
    if (num_domains == 0 || num_classes == 0 || feature_dim == 0 || latent_dim_true == 0 ||
        samples_per_domain_class == 0)
      fail("counts must be positive");
    if (latent_dim_true < num_classes)
      fail("latent_dim_true (" + std::to_string(latent_dim_true) + ") must be >= num_classes (" +
           std::to_string(num_classes) + ")");
    if (feature_dim < latent_dim_true)
      fail("feature_dim (" + std::to_string(feature_dim) + ") must be >= latent_dim_true (" +
           std::to_string(latent_dim_true) + ")");
    if (domain_scales.size() != num_domains)
      fail("domain_scales needs " + std::to_string(num_domains) + " entries");
    for (double a : domain_scales)
      if (!(a > 0.0)) fail("domain_scales must be positive");
    if (target_mixture.size() != num_domains)
      fail("target_mixture needs " + std::to_string(num_domains) + " entries");
    for (double b : target_mixture)
      if (!(b >= 0.0)) fail("target_mixture must be non-negative");
    if (!(mixture_norm() > 0.0)) fail("target_mixture must not be all zero");
    if (!(norm_bound > 0.0)) fail("norm_bound must be positive");
    if (mixture_norm() > norm_bound * (1.0 + 1e-12)) fail("||target_mixture|| exceeds norm_bound");
    if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
    if (!(offset_scale >= 0.0) || !(target_shift >= 0.0)) fail("scales must be non-negative");
  }
};

/// Ground-truth generative structure shared by sources and target.
struct SyntheticWorld {
  SyntheticConfig cfg;
  Matrix directions;           // C x L, orthonormal rows
  std::vector<Matrix> maps;    // per source domain, F x L
  std::vector<Matrix> offsets; // per source domain, 1 x F
  Matrix target_map;           // F x L
  Matrix target_offset;        // 1 x F

  /// Latent row for class c of source domain k.
  std::vector<double> sample_latent(std::size_t domain, std::size_t label, Rng& rng) const {
    std::vector<double> z(cfg.latent_dim_true);
    const double a = cfg.domain_scales[domain];
    for (std::size_t j = 0; j < z.size(); ++j)
      z[j] = a * directions(label, j) + (cfg.noise_std > 0.0 ? rng.normal(0.0, cfg.noise_std) : 0.0);
    return z;
  }

  /// Latent row for class c of the target: pick a source component with
  /// probability beta_j / sum(beta), then sample it.
  std::vector<double> sample_target_latent(std::size_t label, Rng& rng) const {
    const double total = cfg.mixture_norm();
    double u = rng.uniform(0.0, total);
    std::size_t comp = cfg.num_domains - 1;
    for (std::size_t j = 0; j < cfg.num_domains; ++j) {
      if (u < cfg.target_mixture[j]) {
        comp = j;
        break;
      }
      u -= cfg.target_mixture[j];
    }
    return sample_latent(comp, label, rng);
  }

  static std::vector<double> apply(const Matrix& a, const Matrix& b, std::span<const double> z) {
    std::vector<double> x(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double s = b(0, i);
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * z[j];
      x[i] = s;
    }
    return x;
  }
};

struct SyntheticData {
  DomainDataset sources;
  DomainDataset target;  // single domain, id 0
  Matrix source_latents; // rows aligned with sources.records
  Matrix target_latents; // rows aligned with target.records
  SyntheticWorld world;
};

namespace detail {

// Rows of a (rows x n) Gaussian draw orthonormalized by modified Gram-Schmidt.
inline Matrix orthonormal_rows(std::size_t rows, std::size_t n, Rng& rng) {
  Matrix q(rows, n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 100) throw Error("orthonormal_rows: degenerate draw");
      std::vector<double> v(n);
      for (double& x : v) x = rng.normal();
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t p = 0; p < r; ++p) {
          double d = 0.0;
          for (std::size_t j = 0; j < n; ++j) d += q(p, j) * v[j];
          for (std::size_t j = 0; j < n; ++j) v[j] -= d * q(p, j);
        }
      }
      const double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (nrm < 1e-6) continue;
      for (std::size_t j = 0; j < n; ++j) q(r, j) = v[j] / nrm;
      break;
    }
  }
  return q;
}

// First L columns of a random rotation of R^F, each scaled by U[0.5, 2].
inline Matrix random_domain_map(std::size_t f, std::size_t l, Rng& rng) {
  const Matrix rot = orthonormal_rows(f, f, rng);
  Matrix a(f, l);
  for (std::size_t j = 0; j < l; ++j) {
    const double s = rng.uniform(0.5, 2.0);
    for (std::size_t i = 0; i < f; ++i) a(i, j) = rot(j, i) * s;
  }
  return a;
}

}  // namespace detail

inline SyntheticWorld make_world(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticWorld w;
  w.cfg = cfg;
  Rng dir_rng(cfg.seed, "directions");
  w.directions = detail::orthonormal_rows(cfg.num_classes, cfg.latent_dim_true, dir_rng);
  for (std::size_t k = 0; k < cfg.num_domains; ++k) {
    Rng map_rng(cfg.seed, "domain-map", k);
    w.maps.push_back(detail::random_domain_map(cfg.feature_dim, cfg.latent_dim_true, map_rng));
    Matrix b(1, cfg.feature_dim);
    for (double& v : b.data()) v = map_rng.normal(0.0, cfg.offset_scale);
    w.offsets.push_back(std::move(b));
  }
  const double total = cfg.mixture_norm();
  w.target_map = Matrix(cfg.feature_dim, cfg.latent_dim_true);
  w.target_offset = Matrix(1, cfg.feature_dim);
  for (std::size_t k = 0; k < cfg.num_domains; ++k) {
    w.target_map.add_scaled(w.maps[k], cfg.target_mixture[k] / total);
    w.target_offset.add_scaled(w.offsets[k], cfg.target_mixture[k] / total);
  }
  Rng t_rng(cfg.seed, "target-map");
  const double col_scale = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  for (double& v : w.target_map.data()) v += cfg.target_shift * t_rng.normal(0.0, col_scale);
  for (double& v : w.target_offset.data())
    v += cfg.target_shift * t_rng.normal(0.0, cfg.offset_scale);
  return w;
}

/// Source and target datasets realizing linear dependency across domains.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  SyntheticData out;
  out.world = make_world(cfg);
  const SyntheticWorld& w = out.world;

  out.sources = DomainDataset{cfg.num_domains, cfg.num_classes, cfg.feature_dim, {}};
  out.source_latents =
      Matrix(cfg.num_domains * cfg.num_classes * cfg.samples_per_domain_class, cfg.latent_dim_true);
  std::size_t row = 0;
  for (std::size_t k = 0; k < cfg.num_domains; ++k) {
    Rng rng(cfg.seed, "source-samples", k);
    for (std::size_t c = 0; c < cfg.num_classes; ++c) {
      for (std::size_t s = 0; s < cfg.samples_per_domain_class; ++s) {
        auto z = w.sample_latent(k, c, rng);
        std::copy(z.begin(), z.end(), out.source_latents.row(row++).begin());
        out.sources.records.push_back({k, c, SyntheticWorld::apply(w.maps[k], w.offsets[k], z)});
      }
    }
  }

  out.target = DomainDataset{1, cfg.num_classes, cfg.feature_dim, {}};
  out.target_latents =
      Matrix(cfg.num_classes * cfg.target_samples_per_class, cfg.latent_dim_true);
  Rng trng(cfg.seed, "target-samples");
  row = 0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    for (std::size_t s = 0; s < cfg.target_samples_per_class; ++s) {
      auto z = w.sample_target_latent(c, trng);
      std::copy(z.begin(), z.end(), out.target_latents.row(row++).begin());
      out.target.records.push_back({0, c, SyntheticWorld::apply(w.target_map, w.target_offset, z)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LDDG-DS v1 text format:
//   LDDG-DS 1 <K> <C> <feature_dim> <num_records>
//   <domain_id> <label> <f0> <f1> ...        (one line per record)
// Values are written in shortest round-trip decimal form.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t line_no, const char* what) {
  T v{};
  auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw Error("dataset line " + std::to_string(line_no) + ": invalid " + what + " '" +
                std::string(tok) + "'");
  return v;
}

}  // namespace detail

inline std::string format_dataset(const DomainDataset& d) {
  d.validate();
  std::string out = "LDDG-DS 1 " + std::to_string(d.num_domains) + " " +
                    std::to_string(d.num_classes) + " " + std::to_string(d.feature_dim) + " " +
                    std::to_string(d.records.size()) + "\n";
  for (const Record& r : d.records) {
    out += std::to_string(r.domain);
    out += ' ';
    out += std::to_string(r.label);
    for (double f : r.features) {
      out += ' ';
      out += detail::format_double(f);
    }
    out += '\n';
  }
  return out;
}

inline DomainDataset parse_dataset(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw Error("dataset line 1: missing header");
  auto head = detail::split_ws(line);
  if (head.size() != 6 || head[0] != "LDDG-DS")
    throw Error("dataset line 1: malformed header, expected 'LDDG-DS 1 <K> <C> <dim> <n>'");
  const auto version = detail::parse_number<unsigned>(head[1], 1, "version");
  if (version != 1) throw Error("dataset line 1: unsupported version " + std::to_string(version));
  DomainDataset d;
  d.num_domains = detail::parse_number<std::size_t>(head[2], 1, "domain count");
  d.num_classes = detail::parse_number<std::size_t>(head[3], 1, "class count");
  d.feature_dim = detail::parse_number<std::size_t>(head[4], 1, "feature dimension");
  const auto declared = detail::parse_number<std::size_t>(head[5], 1, "record count");
  if (d.num_domains == 0 || d.num_classes == 0 || d.feature_dim == 0)
    throw Error("dataset line 1: counts must be positive");

  d.records.reserve(declared);
  while (next_line(line)) {
    auto tok = detail::split_ws(line);
    if (tok.empty()) continue;
    if (d.records.size() == declared)
      throw Error("dataset line " + std::to_string(line_no) + ": more records than the " +
                  std::to_string(declared) + " declared in the header");
    if (tok.size() != 2 + d.feature_dim)
      throw Error("dataset line " + std::to_string(line_no) + ": expected " +
                  std::to_string(2 + d.feature_dim) + " fields, found " +
                  std::to_string(tok.size()));
    Record r;
    r.domain = detail::parse_number<std::size_t>(tok[0], line_no, "domain id");
    r.label = detail::parse_number<std::size_t>(tok[1], line_no, "label");
    if (r.domain >= d.num_domains)
      throw Error("dataset line " + std::to_string(line_no) + ": domain id " +
                  std::to_string(r.domain) + " out of range");
    if (r.label >= d.num_classes)
      throw Error("dataset line " + std::to_string(line_no) + ": label " +
                  std::to_string(r.label) + " out of range");
    r.features.resize(d.feature_dim);
    for (std::size_t j = 0; j < d.feature_dim; ++j) {
      r.features[j] = detail::parse_number<double>(tok[2 + j], line_no, "feature");
      if (!std::isfinite(r.features[j]))
        throw Error("dataset line " + std::to_string(line_no) + ": non-finite feature");
    }
    d.records.push_back(std::move(r));
  }
  if (d.records.size() != declared)
    throw Error("dataset line " + std::to_string(line_no) + ": record count mismatch, header " +
                "declares " + std::to_string(declared) + " but body has " +
                std::to_string(d.records.size()));
  return d;
}

inline void save_dataset(const DomainDataset& d, const std::string& path) {
  const std::string text = format_dataset(d);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw Error("write to '" + path + "' failed");
}

inline DomainDataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_dataset(ss.str());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// Mixed-domain batches for one epoch. Each domain's records are shuffled
/// with the (seed, epoch) stream; batch b takes the b-th run of
/// `batch_per_domain` records from every domain that still has some, so the
/// trailing batches may be ragged.
inline std::vector<std::vector<std::size_t>> sample_batches(const DomainDataset& d,
                                                            std::size_t batch_per_domain,
                                                            std::uint64_t seed, std::size_t epoch) {
  if (batch_per_domain == 0) throw Error("sample_batches: batch_per_domain must be positive");
  auto by_domain = d.indices_by_domain();
  Rng rng(seed, "batches", epoch);
  std::size_t longest = 0;
  for (auto& idx : by_domain) {
    std::shuffle(idx.begin(), idx.end(), rng.engine());
    longest = std::max(longest, idx.size());
  }
  const std::size_t n_batches = (longest + batch_per_domain - 1) / batch_per_domain;
  std::vector<std::vector<std::size_t>> batches(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    for (const auto& idx : by_domain) {
      const std::size_t lo = b * batch_per_domain;
      const std::size_t hi = std::min(idx.size(), lo + batch_per_domain);
      for (std::size_t i = lo; i < hi; ++i) batches[b].push_back(idx[i]);
    }
  }
  return batches;
}

/// Stratified hold-out: the first round(fraction * n) records of every
/// (domain, class) group after a seeded shuffle go to validation.
inline std::pair<DomainDataset, DomainDataset> split_validation(const DomainDataset& d,
                                                                double fraction,
                                                                std::uint64_t seed) {
  DomainDataset train{d.num_domains, d.num_classes, d.feature_dim, {}};
  DomainDataset val = train;
  std::vector<std::vector<std::size_t>> groups(d.num_domains * d.num_classes);
  for (std::size_t i = 0; i < d.records.size(); ++i)
    groups[d.records[i].domain * d.num_classes + d.records[i].label].push_back(i);
  Rng rng(seed, "validation-split");
  std::vector<bool> is_val(d.records.size(), false);
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng.engine());
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(g.size())));
    for (std::size_t i = 0; i < n_val && i < g.size(); ++i) is_val[g[i]] = true;
  }
  for (std::size_t i = 0; i < d.records.size(); ++i)
    (is_val[i] ? val : train).records.push_back(d.records[i]);
  return {std::move(train), std::move(val)};
}

}  // namespace lddg

#endif  // LDDG_DATA_HPP_
