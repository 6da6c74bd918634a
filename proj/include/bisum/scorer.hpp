#pragma once

// Gated self-attention saliency encoder and per-clip score regressor.
//
// Each encoder layer maps V (clips x model_dim) to
//
//     Vbar = V + MultiHeadAttention(V)
//     s    = sigmoid(FFN(Vbar))
//     V'   = s * Vbar            (elementwise)
//
// so every layer preserves the feature dimension. The regressor applies two
// affine maps with a tanh between them to each clip (by default to the last
// layer's gates s, optionally to its hidden states V') followed by a sigmoid.
// A plain linear scorer (one affine map, no squashing) is available for
// least-squares sanity checks.
//
// Weights follow the y = x W^T + b convention with W shaped (out, in).
// Gradients are written by hand; backward() accumulates into a parameter-shaped buffer.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bisum/error.hpp"
#include "bisum/rng.hpp"

namespace bisum {

enum class ScorerKind { encoder, linear };
enum class RegressorInput { gates, hidden };

struct EncoderConfig {
  std::size_t num_layers = 2;
  std::size_t model_dim = 16;
  std::size_t num_heads = 2;
  std::size_t ffn_dim = 32;
  std::size_t regressor_dim = 16;
  std::uint64_t seed = 0;
  ScorerKind kind = ScorerKind::encoder;
  RegressorInput regressor_input = RegressorInput::gates;
  bool positional_encoding = false;

  void validate() const {
    if (model_dim < 1 || num_heads < 1 || ffn_dim < 1 || regressor_dim < 1)
      throw InvalidInput("encoder dimensions must be at least 1");
    if (kind == ScorerKind::encoder && model_dim % num_heads != 0) throw InvalidInput("model_dim must be divisible by num_heads");
    if (kind == ScorerKind::encoder && num_layers < 1) throw InvalidInput("encoder needs at least one layer");
  }

  std::size_t head_dim() const { return model_dim / num_heads; }
};

struct LayerParams {
  Eigen::MatrixXd wq, wk, wv, wo;
  Eigen::VectorXd bq, bk, bv, bo;
  Eigen::MatrixXd w1;  // ffn_dim x model_dim
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // model_dim x ffn_dim
  Eigen::VectorXd b2;
};

struct ScorerParams {
  EncoderConfig config;
  std::vector<LayerParams> layers;
  Eigen::MatrixXd r1;  // regressor_dim x model_dim
  Eigen::VectorXd c1;
  Eigen::VectorXd r2;  // regressor_dim
  Eigen::VectorXd c2;  // size 1
  Eigen::VectorXd linear_w;  // model_dim (linear scorer)
  Eigen::VectorXd linear_b;  // size 1

  /// All-zero parameters with shapes from `cfg`.
  static ScorerParams zeros(const EncoderConfig& cfg) {
    cfg.validate();
    const auto d = static_cast<Eigen::Index>(cfg.model_dim);
    const auto f = static_cast<Eigen::Index>(cfg.ffn_dim);
    const auto h = static_cast<Eigen::Index>(cfg.regressor_dim);
    ScorerParams p;
    p.config = cfg;
    if (cfg.kind == ScorerKind::encoder) {
      p.layers.resize(cfg.num_layers);
      for (auto& l : p.layers) {
        l.wq = l.wk = l.wv = l.wo = Eigen::MatrixXd::Zero(d, d);
        l.bq = l.bk = l.bv = l.bo = Eigen::VectorXd::Zero(d);
        l.w1 = Eigen::MatrixXd::Zero(f, d);
        l.b1 = Eigen::VectorXd::Zero(f);
        l.w2 = Eigen::MatrixXd::Zero(d, f);
        l.b2 = Eigen::VectorXd::Zero(d);
      }
      p.r1 = Eigen::MatrixXd::Zero(h, d);
      p.c1 = Eigen::VectorXd::Zero(h);
      p.r2 = Eigen::VectorXd::Zero(h);
      p.c2 = Eigen::VectorXd::Zero(1);
    } else {
      p.linear_w = Eigen::VectorXd::Zero(d);
      p.linear_b = Eigen::VectorXd::Zero(1);
    }
    return p;
  }

  /// Gaussian weights scaled by 1/sqrt(fan_in), zero biases; deterministic in cfg.seed.
  static ScorerParams init(const EncoderConfig& cfg) {
    ScorerParams p = zeros(cfg);
    Rng rng(cfg.seed);
    auto fill = [&](Eigen::MatrixXd& m) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(m.cols()));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
    };
    for (auto& l : p.layers) {
      fill(l.wq), fill(l.wk), fill(l.wv), fill(l.wo), fill(l.w1), fill(l.w2);
    }
    if (cfg.kind == ScorerKind::encoder) {
      fill(p.r1);
      const double scale = 1.0 / std::sqrt(static_cast<double>(p.r2.size()));
      for (Eigen::Index i = 0; i < p.r2.size(); ++i) p.r2(i) = scale * rng.normal();
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(p.linear_w.size()));
      for (Eigen::Index i = 0; i < p.linear_w.size(); ++i) p.linear_w(i) = scale * rng.normal();
    }
    return p;
  }

  // Visits every tensor as (name, contiguous storage) in a fixed order.
  template <typename F>
  void for_each_tensor(F&& fn) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      const std::string pre = "layer" + std::to_string(i) + ".";
      fn(pre + "wq", l.wq), fn(pre + "bq", l.bq), fn(pre + "wk", l.wk), fn(pre + "bk", l.bk);
      fn(pre + "wv", l.wv), fn(pre + "bv", l.bv), fn(pre + "wo", l.wo), fn(pre + "bo", l.bo);
      fn(pre + "w1", l.w1), fn(pre + "b1", l.b1), fn(pre + "w2", l.w2), fn(pre + "b2", l.b2);
    }
    if (config.kind == ScorerKind::encoder) {
      fn(std::string("regressor.r1"), r1), fn(std::string("regressor.c1"), c1);
      fn(std::string("regressor.r2"), r2), fn(std::string("regressor.c2"), c2);
    } else {
      fn(std::string("linear.w"), linear_w), fn(std::string("linear.b"), linear_b);
    }
  }

  template <typename F>
  void for_each_tensor(F&& fn) const {
    const_cast<ScorerParams*>(this)->for_each_tensor(
        [&](const std::string& name, auto& t) { fn(name, std::as_const(t)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  // Flat views in for_each_tensor order, used by the optimizer and gradient checks.
  std::vector<double*> flat_pointers() {
    std::vector<double*> out;
    for_each_tensor([&](const std::string&, auto& t) {
      for (Eigen::Index i = 0; i < t.size(); ++i) out.push_back(t.data() + i);
    });
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    for_each_tensor([&](const std::string&, const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

inline Eigen::MatrixXd sinusoidal_encoding(Eigen::Index clips, Eigen::Index dim) {
  Eigen::MatrixXd pe(clips, dim);
  for (Eigen::Index pos = 0; pos < clips; ++pos)
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(static_cast<double>(pos) * rate) : std::cos(static_cast<double>(pos) * rate);
    }
  return pe;
}

struct LayerCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd q, k, v;
  std::vector<Eigen::MatrixXd> attention;  // one clips x clips matrix per head
  Eigen::MatrixXd heads;                   // concatenated head outputs
  Eigen::MatrixXd residual;                // Vbar
  Eigen::MatrixXd ffn_pre, ffn_hidden;
  Eigen::MatrixXd gate;                    // s
  Eigen::MatrixXd output;                  // s * Vbar
};

struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd regressor_input;
  Eigen::MatrixXd reg_hidden;  // tanh activations
  Eigen::VectorXd prediction;
};

namespace detail {

inline Eigen::MatrixXd affine(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  return (x * w.transpose()).rowwise() + b.transpose();
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

inline void check_features(const Eigen::MatrixXd& features, const EncoderConfig& cfg) {
  if (features.rows() < 1) throw InvalidInput("scorer: at least one clip is required");
  if (static_cast<std::size_t>(features.cols()) != cfg.model_dim)
    throw InvalidInput("scorer: feature dimension " + std::to_string(features.cols()) + " != model_dim " +
                       std::to_string(cfg.model_dim));
}

inline LayerCache layer_forward(const Eigen::MatrixXd& x, const LayerParams& p, const EncoderConfig& cfg) {
  LayerCache c;
  c.input = x;
  c.q = affine(x, p.wq, p.bq);
  c.k = affine(x, p.wk, p.bk);
  c.v = affine(x, p.wv, p.bv);
  const auto n = x.rows();
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.heads.resize(n, x.cols());
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    Eigen::MatrixXd scores = c.q.middleCols(off, dh) * c.k.middleCols(off, dh).transpose() * scale;
    for (Eigen::Index r = 0; r < n; ++r) {
      const double mx = scores.row(r).maxCoeff();
      scores.row(r) = (scores.row(r).array() - mx).exp();
      scores.row(r) /= scores.row(r).sum();
    }
    c.heads.middleCols(off, dh) = scores * c.v.middleCols(off, dh);
    c.attention.push_back(std::move(scores));
  }
  c.residual = x + affine(c.heads, p.wo, p.bo);
  c.ffn_pre = affine(c.residual, p.w1, p.b1);
  c.ffn_hidden = c.ffn_pre.cwiseMax(0.0);
  c.gate = sigmoid(affine(c.ffn_hidden, p.w2, p.b2));
  c.output = c.gate.cwiseProduct(c.residual);
  return c;
}

// Returns d(loss)/d(layer input); accumulates parameter gradients into g.
inline Eigen::MatrixXd layer_backward(const LayerCache& c, const LayerParams& p, const EncoderConfig& cfg,
                                      const Eigen::MatrixXd& d_output, const Eigen::MatrixXd& d_gate_extra,
                                      LayerParams& g) {
  Eigen::MatrixXd d_gate = d_output.cwiseProduct(c.residual) + d_gate_extra;
  Eigen::MatrixXd d_residual = d_output.cwiseProduct(c.gate);

  const Eigen::MatrixXd d_ffn_out = d_gate.array() * c.gate.array() * (1.0 - c.gate.array());
  g.w2 += d_ffn_out.transpose() * c.ffn_hidden;
  g.b2 += d_ffn_out.colwise().sum().transpose();
  const Eigen::MatrixXd d_pre = (d_ffn_out * p.w2).array() * (c.ffn_pre.array() > 0.0).cast<double>();
  g.w1 += d_pre.transpose() * c.residual;
  g.b1 += d_pre.colwise().sum().transpose();
  d_residual += d_pre * p.w1;

  Eigen::MatrixXd d_input = d_residual;
  g.wo += d_residual.transpose() * c.heads;
  g.bo += d_residual.colwise().sum().transpose();
  const Eigen::MatrixXd d_heads = d_residual * p.wo;

  const auto n = c.input.rows();
  const auto dh = static_cast<Eigen::Index>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Eigen::MatrixXd dq(n, c.q.cols()), dk(n, c.k.cols()), dv(n, c.v.cols());
  for (std::size_t h = 0; h < cfg.num_heads; ++h) {
    const auto off = static_cast<Eigen::Index>(h) * dh;
    const Eigen::MatrixXd& a = c.attention[h];
    const auto d_head = d_heads.middleCols(off, dh);
    const Eigen::MatrixXd d_attn = d_head * c.v.middleCols(off, dh).transpose();
    dv.middleCols(off, dh) = a.transpose() * d_head;
    const Eigen::VectorXd inner = (d_attn.array() * a.array()).rowwise().sum();
    const Eigen::MatrixXd d_scores = a.array() * (d_attn.colwise() - inner).array();
    dq.middleCols(off, dh) = d_scores * c.k.middleCols(off, dh) * scale;
    dk.middleCols(off, dh) = d_scores.transpose() * c.q.middleCols(off, dh) * scale;
  }
  g.wq += dq.transpose() * c.input;
  g.bq += dq.colwise().sum().transpose();
  g.wk += dk.transpose() * c.input;
  g.bk += dk.colwise().sum().transpose();
  g.wv += dv.transpose() * c.input;
  g.bv += dv.colwise().sum().transpose();
  d_input += dq * p.wq + dk * p.wk + dv * p.wv;
  return d_input;
}

}  // namespace detail

struct EncoderOutput {
  Eigen::MatrixXd hidden;  // V^N
  Eigen::MatrixXd gates;   // s^N
};

/// Runs the full model and keeps every intermediate needed by backward().
inline ForwardCache forward(const Eigen::MatrixXd& features, const ScorerParams& params) {
  const auto& cfg = params.config;
  detail::check_features(features, cfg);
  ForwardCache cache;
  cache.input = features;
  if (cfg.kind == ScorerKind::linear) {
    cache.prediction = (features * params.linear_w).array() + params.linear_b(0);
    return cache;
  }
  if (cfg.positional_encoding) cache.input += sinusoidal_encoding(features.rows(), features.cols());
  const Eigen::MatrixXd* x = &cache.input;
  for (const auto& layer : params.layers) {
    cache.layers.push_back(detail::layer_forward(*x, layer, cfg));
    x = &cache.layers.back().output;
  }
  const auto& last = cache.layers.back();
  cache.regressor_input = cfg.regressor_input == RegressorInput::gates ? last.gate : last.output;
  cache.reg_hidden = detail::affine(cache.regressor_input, params.r1, params.c1).array().tanh();
  const Eigen::VectorXd logits = (cache.reg_hidden * params.r2).array() + params.c2(0);
  cache.prediction = detail::sigmoid(logits);
  return cache;
}

inline EncoderOutput encoder_forward(const Eigen::MatrixXd& features, const ScorerParams& params) {
  if (params.config.kind != ScorerKind::encoder) throw InvalidInput("encoder_forward: scorer has no encoder");
  const auto cache = forward(features, params);
  return {cache.layers.back().output, cache.layers.back().gate};
}

/// Two affine layers with tanh between, then sigmoid: one score per clip.
inline std::vector<double> regress_scores(const Eigen::MatrixXd& input, const ScorerParams& params) {
  if (params.config.kind != ScorerKind::encoder) throw InvalidInput("regress_scores: scorer has no regressor");
  if (input.cols() != params.r1.cols()) throw InvalidInput("regress_scores: input dimension mismatch");
  const Eigen::MatrixXd hidden = detail::affine(input, params.r1, params.c1).array().tanh();
  const Eigen::VectorXd out = detail::sigmoid((hidden * params.r2).array() + params.c2(0));
  return {out.data(), out.data() + out.size()};
}

inline std::vector<double> predict(const Eigen::MatrixXd& features, const ScorerParams& params) {
  const auto cache = forward(features, params);
  return {cache.prediction.data(), cache.prediction.data() + cache.prediction.size()};
}

/// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(prediction).
inline void backward(const ForwardCache& cache, std::span<const double> d_prediction, const ScorerParams& params,
                     ScorerParams& grad) {
  const auto& cfg = params.config;
  const auto n = static_cast<Eigen::Index>(d_prediction.size());
  if (n != cache.prediction.size()) throw InvalidInput("backward: gradient length mismatch");
  const Eigen::Map<const Eigen::VectorXd> dy(d_prediction.data(), n);

  if (cfg.kind == ScorerKind::linear) {
    grad.linear_w += cache.input.transpose() * dy;
    grad.linear_b(0) += dy.sum();
    return;
  }

  const Eigen::VectorXd dz = dy.array() * cache.prediction.array() * (1.0 - cache.prediction.array());
  grad.r2 += cache.reg_hidden.transpose() * dz;
  grad.c2(0) += dz.sum();
  const Eigen::MatrixXd d_hidden = (dz * params.r2.transpose()).array() * (1.0 - cache.reg_hidden.array().square());
  grad.r1 += d_hidden.transpose() * cache.regressor_input;
  grad.c1 += d_hidden.colwise().sum().transpose();
  const Eigen::MatrixXd d_reg_input = d_hidden * params.r1;

  const auto d = static_cast<Eigen::Index>(cfg.model_dim);
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n, d);
  Eigen::MatrixXd d_gate_extra = Eigen::MatrixXd::Zero(n, d);
  if (cfg.regressor_input == RegressorInput::gates)
    d_gate_extra = d_reg_input;
  else
    d_out = d_reg_input;

  for (std::size_t li = params.layers.size(); li-- > 0;) {
    d_out = detail::layer_backward(cache.layers[li], params.layers[li], cfg, d_out, d_gate_extra, grad.layers[li]);
    d_gate_extra.setZero();
  }
}

}  // namespace bisum
