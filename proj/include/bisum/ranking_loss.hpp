#pragma once

// Differentiable list-wise NDCG loss over a relaxed sort.
//
// The soft permutation follows the NeuralSort construction: row r (0-based) of
// the matrix is
//
//     softmax_i( ((n - 1 - 2r) * s_i - sum_k |s_i - s_k|) / temperature )
//
// which tends to the one-hot row selecting the (r+1)-th largest score as the
// temperature goes to zero. Sinkhorn scaling then makes it doubly stochastic,
// the relaxed permutation is applied to the gains 2^g - 1, and the result is
// scored with the usual log2 discount. Gradients are exact reverse-mode
// derivatives of that unrolled computation.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bisum/error.hpp"
#include "bisum/metrics.hpp"

namespace bisum {

struct SoftPermutation {
  Eigen::MatrixXd matrix;
  double temperature = 1.0;

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
};

struct LossValue {
  double value = 0.0;
  std::vector<double> gradient;
};

namespace detail {

inline double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

// Relaxed-sort logits (already divided by the temperature).
inline Eigen::MatrixXd sort_logits(std::span<const double> s, double temperature) {
  const auto n = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd abs_sum = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < n; ++k) abs_sum(i) += std::abs(s[i] - s[k]);
  Eigen::MatrixXd logits(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto coeff = static_cast<double>(n - 1 - 2 * r);
    for (Eigen::Index i = 0; i < n; ++i) logits(r, i) = (coeff * s[i] - abs_sum(i)) / temperature;
  }
  return logits;
}

inline Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

inline Eigen::VectorXd gains(std::span<const double> gt) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(gt.size()));
  for (std::size_t i = 0; i < gt.size(); ++i) g(static_cast<Eigen::Index>(i)) = std::exp2(gt[i]) - 1.0;
  return g;
}

inline Eigen::VectorXd discounts(std::size_t n, std::size_t k) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < k; ++j) w(static_cast<Eigen::Index>(j)) = 1.0 / std::log2(static_cast<double>(j) + 2.0);
  return w;
}

}  // namespace detail

inline SoftPermutation soft_permutation(std::span<const double> pred_scores, double temperature) {
  if (pred_scores.empty()) throw InvalidInput("soft_permutation: empty score sequence");
  if (!(temperature > 0.0)) throw InvalidInput("soft_permutation: temperature must be positive");
  return {detail::row_softmax(detail::sort_logits(pred_scores, temperature)), temperature};
}

/// Exact descending-sort permutation; row r selects the r-th ranked index
/// (equal scores ordered by ascending index).
inline Eigen::MatrixXd hard_permutation(std::span<const double> pred_scores) {
  const auto order = descending_order(pred_scores);
  const auto n = static_cast<Eigen::Index>(pred_scores.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) p(r, static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)])) = 1.0;
  return p;
}

namespace detail {

// Row then column normalization, `iterations` times. When `trace` is given,
// the matrix after every half-step is recorded (trace[0] is the input).
inline Eigen::MatrixXd sinkhorn_impl(Eigen::MatrixXd m, std::size_t iterations,
                                     std::vector<Eigen::MatrixXd>* trace) {
  if ((m.array() < 0.0).any()) throw InvalidInput("sinkhorn: negative entry");
  if ((m.rowwise().sum().array() <= 0.0).any() || (m.colwise().sum().array() <= 0.0).any())
    throw InvalidInput("sinkhorn: all-zero row or column");
  if (trace) trace->push_back(m);
  for (std::size_t it = 0; it < iterations; ++it) {
    m.array().colwise() /= m.rowwise().sum().array();
    if (trace) trace->push_back(m);
    m.array().rowwise() /= m.colwise().sum().array();
    if (trace) trace->push_back(m);
  }
  return m;
}

}  // namespace detail

inline SoftPermutation sinkhorn(const SoftPermutation& p, std::size_t iterations) {
  return {detail::sinkhorn_impl(p.matrix, iterations, nullptr), p.temperature};
}

/// NDCG@k of the gains reordered by an arbitrary (relaxed or hard) permutation matrix.
inline double smoothed_ndcg(const Eigen::MatrixXd& permutation, std::span<const double> gt_scores, std::size_t k) {
  const double ideal = max_dcg_at_k(gt_scores, k);
  if (ideal == 0.0) return 1.0;
  const Eigen::VectorXd ranked = permutation * detail::gains(gt_scores);
  return detail::discounts(gt_scores.size(), k).dot(ranked) / ideal;
}

struct NeuralNdcgConfig {
  std::optional<std::size_t> k;  // defaults to the sequence length
  double temperature = 1.0;
  std::size_t sinkhorn_iterations = 30;
};

/// 1 - relaxed NDCG@k, with d(loss)/d(pred_scores).
inline LossValue neural_ndcg_loss(std::span<const double> pred_scores, std::span<const double> gt_scores,
                                  const NeuralNdcgConfig& cfg = {}) {
  const std::size_t n = pred_scores.size();
  if (n != gt_scores.size()) throw InvalidInput("neural_ndcg_loss: length mismatch");
  if (n == 0) throw InvalidInput("neural_ndcg_loss: empty sequences");
  const std::size_t k = cfg.k.value_or(n);
  if (k < 1 || k > n) throw InvalidInput("neural_ndcg_loss: k out of range");

  LossValue out{0.0, std::vector<double>(n, 0.0)};
  const double ideal = max_dcg_at_k(gt_scores, k);
  if (ideal == 0.0) return out;

  const Eigen::MatrixXd soft = soft_permutation(pred_scores, cfg.temperature).matrix;
  std::vector<Eigen::MatrixXd> trace;
  trace.reserve(2 * cfg.sinkhorn_iterations + 1);
  const Eigen::MatrixXd p = detail::sinkhorn_impl(soft, cfg.sinkhorn_iterations, &trace);

  const Eigen::VectorXd g = detail::gains(gt_scores);
  const Eigen::VectorXd w = detail::discounts(n, k);
  out.value = 1.0 - w.dot(p * g) / ideal;

  // dL/dP = -(w g^T) / ideal
  Eigen::MatrixXd grad = -(w * g.transpose()) / ideal;

  // Unwind Sinkhorn: trace[2t+1] = row-normalized trace[2t], trace[2t+2] = column-normalized trace[2t+1].
  for (std::size_t step = trace.size() - 1; step > 0; --step) {
    const Eigen::MatrixXd& y = trace[step];
    const Eigen::MatrixXd& x = trace[step - 1];
    if (step % 2 == 0) {
      const Eigen::RowVectorXd colsum = x.colwise().sum();
      const Eigen::RowVectorXd inner = (grad.array() * y.array()).colwise().sum();
      grad = (grad.rowwise() - inner).array().rowwise() / colsum.array();
    } else {
      const Eigen::VectorXd rowsum = x.rowwise().sum();
      const Eigen::VectorXd inner = (grad.array() * y.array()).rowwise().sum();
      grad = (grad.colwise() - inner).array().colwise() / rowsum.array();
    }
  }

  // Softmax rows.
  const Eigen::VectorXd inner = (grad.array() * soft.array()).rowwise().sum();
  const Eigen::MatrixXd dlogits = soft.array() * (grad.colwise() - inner).array();

  // logits(r, i) = ((n-1-2r) s_i - sum_k |s_i - s_k|) / T
  const auto ni = static_cast<Eigen::Index>(n);
  const Eigen::RowVectorXd col_total = dlogits.colwise().sum();
  for (Eigen::Index i = 0; i < ni; ++i) {
    double acc = 0.0;
    for (Eigen::Index r = 0; r < ni; ++r) acc += dlogits(r, i) * static_cast<double>(ni - 1 - 2 * r);
    for (Eigen::Index k2 = 0; k2 < ni; ++k2) {
      // |s_i - s_k2| appears in column i and in column k2, with opposite-signed derivatives.
      const double sg = detail::sign(pred_scores[i] - pred_scores[k2]);
      acc -= (col_total(i) + col_total(k2)) * sg;
    }
    out.gradient[static_cast<std::size_t>(i)] = acc / cfg.temperature;
  }
  return out;
}

inline LossValue mse_loss(std::span<const double> pred_scores, std::span<const double> gt_scores) {
  if (pred_scores.size() != gt_scores.size()) throw InvalidInput("mse_loss: length mismatch");
  if (pred_scores.empty()) throw InvalidInput("mse_loss: empty sequences");
  const auto n = static_cast<double>(pred_scores.size());
  LossValue out{0.0, std::vector<double>(pred_scores.size())};
  for (std::size_t i = 0; i < pred_scores.size(); ++i) {
    const double d = pred_scores[i] - gt_scores[i];
    out.value += d * d / n;
    out.gradient[i] = 2.0 * d / n;
  }
  return out;
}

}  // namespace bisum
