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

// Variational classifier: encoder MLP -> Gaussian heads -> reparameterized
// latent -> affine classifier, with hand-written reverse mode and Adam.

#ifndef LDDG_MODEL_HPP_
#define LDDG_MODEL_HPP_

#include <array>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "lddg/linalg.hpp"
#include "lddg/losses.hpp"
#include "lddg/regularizers.hpp"
#include "lddg/rng.hpp"

namespace lddg {

enum class Activation : std::uint8_t { identity = 0, leaky_relu = 1, relu = 2 };

inline constexpr double kLeakySlope = 0.01;

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return x;
}

inline double activation_slope(Activation a, double x) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::leaky_relu: return x > 0.0 ? 1.0 : kLeakySlope;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

/// y = act(x W + b); weight is in x out, bias 1 x out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;
  Activation activation = Activation::leaky_relu;
};

/// y = x W + b. Deliberately has no activation field: the classifier must
/// stay affine for the target-risk bound to apply.
struct AffineLayer {
  Matrix weight;
  Matrix bias;
};

/// One Gaussian-parameter branch: optional rectified hidden layer, then an
/// affine output. The mean and log-variance branches are separate networks.
struct HeadNet {
  std::optional<DenseLayer> hidden;
  AffineLayer out;
};

struct ModelParams {
  std::vector<DenseLayer> encoder;  // feature extractor
  HeadNet mu_head;                  // variational encoder, mean branch
  HeadNet log_var_head;             // variational encoder, log-variance branch
  AffineLayer classifier;

  std::size_t input_dim() const {
    if (!encoder.empty()) return encoder.front().weight.rows();
    return mu_head.hidden ? mu_head.hidden->weight.rows() : mu_head.out.weight.rows();
  }
  std::size_t feature_dim() const {
    return encoder.empty() ? input_dim() : encoder.back().weight.cols();
  }
  std::size_t latent_dim() const { return classifier.weight.rows(); }
  std::size_t num_classes() const { return classifier.weight.cols(); }

  /// Throws unless consecutive layer dimensions compose.
  void validate() const {
    auto check_layer = [](const Matrix& w, const Matrix& b, std::size_t in, const char* what) {
      if (w.rows() != in || b.rows() != 1 || b.cols() != w.cols())
        throw Error(std::string("ModelParams: ") + what + " has inconsistent shape (weight " +
                    w.shape_string() + ", bias " + b.shape_string() + ", expected input " +
                    std::to_string(in) + ")");
    };
    std::size_t dim = input_dim();
    for (const auto& l : encoder) {
      check_layer(l.weight, l.bias, dim, "encoder layer");
      dim = l.weight.cols();
    }
    for (const HeadNet* h : {&mu_head, &log_var_head}) {
      std::size_t hd = dim;
      if (h->hidden) {
        check_layer(h->hidden->weight, h->hidden->bias, hd, "head hidden layer");
        hd = h->hidden->weight.cols();
      }
      check_layer(h->out.weight, h->out.bias, hd, "head output layer");
    }
    if (mu_head.out.weight.cols() != log_var_head.out.weight.cols())
      throw Error("ModelParams: mean and log-variance heads disagree on latent width");
    check_layer(classifier.weight, classifier.bias, mu_head.out.weight.cols(), "classifier");
  }
};

/// Visits every parameter tensor in declaration order: encoder layers
/// (weight, bias), mean head, log-variance head (hidden then output), then
/// the classifier. Checkpoints and optimizer state use this order.
template <class Params, class F>
  requires std::same_as<std::remove_const_t<Params>, ModelParams>
void for_each_tensor(Params& p, F&& f) {
  for (auto& l : p.encoder) {
    f(l.weight);
    f(l.bias);
  }
  for (auto* h : {&p.mu_head, &p.log_var_head}) {
    if (h->hidden) {
      f(h->hidden->weight);
      f(h->hidden->bias);
    }
    f(h->out.weight);
    f(h->out.bias);
  }
  f(p.classifier.weight);
  f(p.classifier.bias);
}

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const Matrix& m) { n += m.size(); });
  return n;
}

/// Zero tensors with the same layout as `p`.
inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for_each_tensor(z, [](Matrix& m) { m = Matrix(m.rows(), m.cols()); });
  return z;
}

struct ModelShape {
  std::size_t input_dim = 16;
  std::vector<std::size_t> encoder_widths{32, 32};
  std::size_t head_hidden = 32;  // 0 = no hidden layer in the heads
  std::size_t latent_dim = 16;
  std::size_t num_classes = 4;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) from the "init" stream of
/// `seed`; biases start at zero.
inline ModelParams init_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.input_dim == 0 || shape.latent_dim == 0 || shape.num_classes == 0)
    throw Error("init_params: dimensions must be positive");
  Rng rng(seed, "init");
  auto weight = [&](std::size_t in, std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    return rng.uniform_matrix(in, out, -bound, bound);
  };
  ModelParams p;
  std::size_t dim = shape.input_dim;
  for (std::size_t w : shape.encoder_widths) {
    if (w == 0) throw Error("init_params: zero encoder width");
    p.encoder.push_back({weight(dim, w), Matrix(1, w), Activation::leaky_relu});
    dim = w;
  }
  for (HeadNet* h : {&p.mu_head, &p.log_var_head}) {
    std::size_t hd = dim;
    if (shape.head_hidden > 0) {
      h->hidden = DenseLayer{weight(dim, shape.head_hidden), Matrix(1, shape.head_hidden),
                             Activation::relu};
      hd = shape.head_hidden;
    }
    h->out = {weight(hd, shape.latent_dim), Matrix(1, shape.latent_dim)};
  }
  p.classifier = {weight(shape.latent_dim, shape.num_classes), Matrix(1, shape.num_classes)};
  return p;
}

enum class RankPenalty { singular_value, nuclear };

inline std::string_view to_string(RankPenalty r) {
  return r == RankPenalty::singular_value ? "singular_value" : "nuclear";
}

inline RankPenalty parse_rank_penalty(std::string_view s) {
  if (s == "singular_value") return RankPenalty::singular_value;
  if (s == "nuclear") return RankPenalty::nuclear;
  throw Error("unknown rank penalty '" + std::string(s) + "'");
}

struct TrainConfig {
  double lambda1 = 0.001;  // rank weight
  double lambda2 = 0.4;    // KL weight
  double lambda_nuclear = 0.01;  // weight of the nuclear-norm ablation cells
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::size_t epochs = 200;
  std::size_t batch_per_domain = 16;
  std::size_t lr_decay_every = 80;
  double lr_decay_factor = 10.0;
  std::size_t latent_dim = 16;
  std::uint64_t seed = 0;
  std::size_t rank_target = 4;
  LossConfig loss{};
  RankMode rank_mode = RankMode::per_batch;
  RankPenalty rank_penalty = RankPenalty::singular_value;
  std::vector<std::size_t> encoder_widths{32, 32};
  std::size_t head_hidden = 32;
  std::size_t log_singular_values = 0;  // top-k spectrum per epoch, 0 = off
  double validation_fraction = 0.0;

  void validate() const {
    auto fail = [](const std::string& m) { throw Error("TrainConfig: " + m); };
    if (!(lambda1 >= 0.0)) fail("lambda1 must be non-negative");
    if (!(lambda2 >= 0.0)) fail("lambda2 must be non-negative");
    if (!(lambda_nuclear >= 0.0)) fail("lambda_nuclear must be non-negative");
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
    if (batch_per_domain == 0) fail("batch_per_domain must be positive");
    if (lr_decay_every == 0) fail("lr_decay_every must be positive");
    if (!(lr_decay_factor > 0.0)) fail("lr_decay_factor must be positive");
    if (latent_dim == 0) fail("latent_dim must be positive");
    if (rank_target == 0) fail("rank_target must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      fail("validation_fraction must lie in [0, 1)");
    loss.validate();
  }

  ModelShape shape(std::size_t input_dim, std::size_t num_classes) const {
    return ModelShape{input_dim, encoder_widths, head_hidden, latent_dim, num_classes};
  }
};

struct LayerTrace {
  Matrix input;
  Matrix pre;  // input W + b
  Matrix out;  // activation(pre)
};

struct HeadTrace {
  std::optional<LayerTrace> hidden;
  Matrix out_input;
  Matrix raw;  // affine output before clamping
};

struct ForwardTrace {
  std::vector<LayerTrace> encoder;
  Matrix features;  // Q(x)
  HeadTrace mu;
  HeadTrace log_var;
  GaussianPosterior posterior;
  Matrix noise;
  Matrix z;
  Matrix logits;
};

namespace detail {

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto yi = y.row(i);
    for (std::size_t j = 0; j < y.cols(); ++j) yi[j] += b(0, j);
  }
  return y;
}

inline LayerTrace dense_forward(const DenseLayer& l, const Matrix& x) {
  LayerTrace t{x, affine(x, l.weight, l.bias), {}};
  t.out = t.pre;
  for (double& v : t.out.data()) v = activate(l.activation, v);
  return t;
}

inline HeadTrace head_forward(const HeadNet& h, const Matrix& features) {
  HeadTrace t;
  if (h.hidden) {
    t.hidden = dense_forward(*h.hidden, features);
    t.out_input = t.hidden->out;
  } else {
    t.out_input = features;
  }
  t.raw = affine(t.out_input, h.out.weight, h.out.bias);
  return t;
}

}  // namespace detail

/// Runs x through encoder, heads, reparameterization (with the supplied
/// standard-normal noise) and classifier, retaining intermediates.
inline ForwardTrace forward(const ModelParams& params, const Matrix& x, const Matrix& noise) {
  if (x.cols() != params.input_dim())
    throw Error("forward: input has " + std::to_string(x.cols()) + " features, model expects " +
                std::to_string(params.input_dim()));
  if (noise.rows() != x.rows() || noise.cols() != params.latent_dim())
    throw Error("forward: noise " + noise.shape_string() + " does not match batch " +
                std::to_string(x.rows()) + " x latent " + std::to_string(params.latent_dim()));
  ForwardTrace t;
  Matrix h = x;
  for (const auto& layer : params.encoder) {
    t.encoder.push_back(detail::dense_forward(layer, h));
    h = t.encoder.back().out;
  }
  t.features = h;
  t.mu = detail::head_forward(params.mu_head, t.features);
  t.log_var = detail::head_forward(params.log_var_head, t.features);
  t.posterior = GaussianPosterior::make(t.mu.raw, t.log_var.raw);
  t.noise = noise;
  t.z = reparameterize(t.posterior, noise);
  t.logits = detail::affine(t.z, params.classifier.weight, params.classifier.bias);
  return t;
}

/// Deterministic inference through the posterior mean.
inline Matrix predict_logits(const ModelParams& params, const Matrix& x) {
  return forward(params, x, Matrix(x.rows(), params.latent_dim())).logits;
}

struct LossBreakdown {
  double total = 0.0;
  double cls = 0.0;   // mean classification loss
  double rank = 0.0;  // low-rank penalty before weighting
  double kl = 0.0;    // batch-mean KL before weighting
};

/// Every ingredient of the objective that the backward pass needs.
struct ObjectiveTerms {
  LossBreakdown loss;
  Matrix grad_logits;  // d cls / d logits (already divided by batch size)
  RankLossResult rank;
  KlResult kl;
};

inline ObjectiveTerms evaluate_objective(const ForwardTrace& trace,
                                         std::span<const std::size_t> labels,
                                         const TrainConfig& cfg) {
  const std::size_t n = trace.logits.rows();
  if (labels.size() != n)
    throw Error("objective: " + std::to_string(labels.size()) + " labels for batch of " +
                std::to_string(n));
  ObjectiveTerms t;
  t.grad_logits = Matrix(n, trace.logits.cols());
  if (n > 0) {
    const double inv_n = 1.0 / static_cast<double>(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      LossValue lv = classification_loss(trace.logits.row(i), labels[i], cfg.loss);
      sum += lv.value;
      for (std::size_t k = 0; k < lv.grad.size(); ++k) t.grad_logits(i, k) = lv.grad[k] * inv_n;
    }
    t.loss.cls = sum * inv_n;
  }
  if (cfg.rank_penalty == RankPenalty::nuclear) {
    t.rank = nuclear_norm_loss(trace.z);
  } else if (cfg.rank_mode == RankMode::per_class) {
    t.rank = rank_loss_per_class(trace.z, labels);
  } else {
    t.rank = rank_loss(trace.z, cfg.rank_target);
  }
  t.kl = kl_standard_normal(trace.posterior);
  t.loss.rank = t.rank.value;
  t.loss.kl = t.kl.value;
  t.loss.total = t.loss.cls + cfg.lambda1 * t.loss.rank + cfg.lambda2 * t.loss.kl;
  return t;
}

/// mean classification loss + lambda1 * rank penalty + lambda2 * KL.
inline LossBreakdown total_loss(const ForwardTrace& trace, std::span<const std::size_t> labels,
                                const TrainConfig& cfg) {
  return evaluate_objective(trace, labels, cfg).loss;
}

namespace detail {

// Accumulates weight/bias gradients of y = x W + b and returns dL/dx.
inline Matrix affine_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw,
                              Matrix& db) {
  dw = matmul_tn(x, dy);
  db = column_sums(dy);
  return matmul_nt(dy, w);
}

inline Matrix dense_backward(const DenseLayer& l, const LayerTrace& t, Matrix dy,
                             DenseLayer& grad) {
  auto d = dy.data();
  auto pre = t.pre.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] *= activation_slope(l.activation, pre[k]);
  return affine_backward(t.input, l.weight, dy, grad.weight, grad.bias);
}

inline Matrix head_backward(const HeadNet& h, const HeadTrace& t, const Matrix& dout,
                            HeadNet& grad) {
  Matrix din = affine_backward(t.out_input, h.out.weight, dout, grad.out.weight, grad.out.bias);
  if (h.hidden) din = dense_backward(*h.hidden, *t.hidden, std::move(din), *grad.hidden);
  return din;
}

}  // namespace detail

/// Exact reverse-mode gradient of the objective given a retained trace.
/// The low-rank term enters through its sub-gradient at z; the KL term flows
/// into both heads and on into the encoder.
inline ModelParams backward(const ModelParams& params, const ForwardTrace& trace,
                            std::span<const std::size_t> labels, const TrainConfig& cfg) {
  const ObjectiveTerms terms = evaluate_objective(trace, labels, cfg);
  ModelParams g = zeros_like(params);

  Matrix dz = detail::affine_backward(trace.z, params.classifier.weight, terms.grad_logits,
                                      g.classifier.weight, g.classifier.bias);
  if (cfg.lambda1 != 0.0) dz.add_scaled(terms.rank.subgradient, cfg.lambda1);

  Matrix dmu = dz;
  dmu.add_scaled(terms.kl.grad_mu, cfg.lambda2);

  Matrix dlv(dz.rows(), dz.cols());
  {
    auto d = dlv.data();
    auto dzd = dz.data();
    auto nd = trace.noise.data();
    auto lv = trace.posterior.log_var.data();
    auto raw = trace.log_var.raw.data();
    auto gk = terms.kl.grad_log_var.data();
    for (std::size_t k = 0; k < d.size(); ++k) {
      if (raw[k] < kLogVarMin || raw[k] > kLogVarMax) continue;  // clamped: no gradient
      d[k] = dzd[k] * nd[k] * 0.5 * std::exp(0.5 * lv[k]) + cfg.lambda2 * gk[k];
    }
  }

  Matrix dfeat = detail::head_backward(params.mu_head, trace.mu, dmu, g.mu_head);
  dfeat += detail::head_backward(params.log_var_head, trace.log_var, dlv, g.log_var_head);

  for (std::size_t l = params.encoder.size(); l-- > 0;)
    dfeat = detail::dense_backward(params.encoder[l], trace.encoder[l], std::move(dfeat),
                                   g.encoder[l]);
  return g;
}

struct AdamState {
  std::size_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// Step-decayed rate: learning_rate / lr_decay_factor^floor(epoch / lr_decay_every).
inline double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.learning_rate /
         std::pow(cfg.lr_decay_factor, static_cast<double>(epoch / cfg.lr_decay_every));
}

/// Adam with decoupled weight decay. `epoch` is zero-based and only selects
/// the scheduled learning rate.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const TrainConfig& cfg, std::size_t epoch) {
  std::vector<Matrix*> ps;
  std::vector<const Matrix*> gs;
  for_each_tensor(params, [&](Matrix& m) { ps.push_back(&m); });
  for_each_tensor(grads, [&](const Matrix& m) { gs.push_back(&m); });
  if (ps.size() != gs.size()) throw Error("adam_step: gradient layout differs from params");
  if (state.m.empty()) {
    for (const Matrix* p : ps) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != ps.size()) throw Error("adam_step: optimizer state layout differs");

  ++state.step;
  const double lr = learning_rate_at(cfg, epoch);
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < ps.size(); ++t) {
    if (!ps[t]->same_shape(*gs[t])) throw Error("adam_step: gradient shape mismatch");
    auto p = ps[t]->data();
    auto g = gs[t]->data();
    auto m = state.m[t].data();
    auto v = state.v[t].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
      v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * (mhat / (std::sqrt(vhat) + kAdamEps) + cfg.weight_decay * p[k]);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format (all integers little-endian):
//   "LDDG-MODEL" | u32 version | u32 input_dim | u32 n_encoder
//   | n_encoder x (u32 width, u8 activation) | u32 head_hidden | u32 latent
//   | u32 classes | parameters as f64 in for_each_tensor order.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "LDDG-MODEL";
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * b);
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * b);
    double d;
    std::memcpy(&d, &bits, sizeof d);
    return d;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error("checkpoint: truncated file");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_model(const ModelParams& p) {
  p.validate();
  std::string out(kModelMagic);
  detail::put_u32(out, kModelFormatVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(p.input_dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(p.encoder.size()));
  for (const auto& l : p.encoder) {
    detail::put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
    out.push_back(static_cast<char>(l.activation));
  }
  const std::size_t head_hidden = p.mu_head.hidden ? p.mu_head.hidden->weight.cols() : 0;
  const std::size_t lv_hidden = p.log_var_head.hidden ? p.log_var_head.hidden->weight.cols() : 0;
  if (head_hidden != lv_hidden) throw Error("checkpoint: heads must share hidden width");
  detail::put_u32(out, static_cast<std::uint32_t>(head_hidden));
  detail::put_u32(out, static_cast<std::uint32_t>(p.latent_dim()));
  detail::put_u32(out, static_cast<std::uint32_t>(p.num_classes()));
  for_each_tensor(p, [&](const Matrix& m) {
    for (double v : m.data()) detail::put_f64(out, v);
  });
  return out;
}

inline ModelParams deserialize_model(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  if (r.take(kModelMagic.size()) != kModelMagic) throw Error("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion)
    throw Error("checkpoint: unsupported format version " + std::to_string(version));
  ModelShape shape;
  shape.input_dim = r.u32();
  const std::uint32_t n_enc = r.u32();
  shape.encoder_widths.clear();
  std::vector<Activation> acts;
  for (std::uint32_t i = 0; i < n_enc; ++i) {
    shape.encoder_widths.push_back(r.u32());
    const std::uint8_t a = r.u8();
    if (a > 2) throw Error("checkpoint: unknown activation code " + std::to_string(a));
    acts.push_back(static_cast<Activation>(a));
  }
  shape.head_hidden = r.u32();
  shape.latent_dim = r.u32();
  shape.num_classes = r.u32();
  ModelParams p = init_params(shape, 0);
  for (std::size_t i = 0; i < acts.size(); ++i) p.encoder[i].activation = acts[i];
  for_each_tensor(p, [&](Matrix& m) {
    std::vector<double> vals(m.size());
    for (double& v : vals) v = r.f64();
    m = Matrix(m.rows(), m.cols(), std::move(vals));
  });
  if (!r.at_end()) throw Error("checkpoint: trailing bytes after parameters");
  return p;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path) {
  const std::string bytes = serialize_model(p);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("checkpoint: cannot open '" + path + "' for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error("checkpoint: write to '" + path + "' failed");
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("checkpoint: cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_model(std::move(bytes));
}

}  // namespace lddg

#endif  // LDDG_MODEL_HPP_
