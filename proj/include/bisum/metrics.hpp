#pragma once

// Ranking and selection metrics for saliency predictions.
//
// NDCG uses exponential gains 2^g - 1 with a log2(rank + 1) discount; ranks come
// from the predicted scores (ties resolved by ascending index) and gains from
// the ground truth. Kendall's tau is the tau-b variant; Spearman's rho is the
// Pearson correlation of mid-ranks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "bisum/error.hpp"
#include "bisum/timeline.hpp"

namespace bisum {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

/// k used for "@15%": max(1, ceil(0.15 n)), computed in integers.
inline std::size_t top15_k(std::size_t n) { return std::max<std::size_t>(1, (15 * n + 99) / 100); }

inline double dcg_at_k(std::span<const double> gains_in_predicted_order, std::size_t k) {
  if (k < 1 || k > gains_in_predicted_order.size()) throw InvalidInput("dcg_at_k: k out of range");
  double dcg = 0.0;
  for (std::size_t j = 0; j < k; ++j)
    dcg += (std::exp2(gains_in_predicted_order[j]) - 1.0) / std::log2(static_cast<double>(j) + 2.0);
  return dcg;
}

/// Indices sorted by score descending; equal scores keep ascending index order.
inline std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

inline double max_dcg_at_k(std::span<const double> gt_scores, std::size_t k) {
  std::vector<double> ideal(gt_scores.begin(), gt_scores.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  return dcg_at_k(ideal, k);
}

inline double ndcg_at_k(std::span<const double> pred_scores, std::span<const double> gt_scores, std::size_t k) {
  if (pred_scores.size() != gt_scores.size()) throw InvalidInput("ndcg_at_k: length mismatch");
  if (pred_scores.empty()) throw InvalidInput("ndcg_at_k: empty sequences");
  if (k < 1 || k > gt_scores.size()) throw InvalidInput("ndcg_at_k: k out of range");
  const double ideal = max_dcg_at_k(gt_scores, k);
  if (ideal == 0.0) return 1.0;
  std::vector<double> ranked_gains;
  ranked_gains.reserve(gt_scores.size());
  for (std::size_t idx : descending_order(pred_scores)) ranked_gains.push_back(gt_scores[idx]);
  return dcg_at_k(ranked_gains, k) / ideal;
}

struct NdcgPair {
  double at_15 = 0.0;
  double at_all = 0.0;
};

/// NDCG@15% and NDCG@all between predicted and ground-truth saliency.
/// Inputs are expected already normalized (see normalize_scores).
inline NdcgPair ndcg_vm(std::span<const double> pred_saliency, std::span<const double> gt_saliency) {
  if (pred_saliency.size() != gt_saliency.size()) throw InvalidInput("ndcg_vm: length mismatch");
  const std::size_t n = gt_saliency.size();
  return {ndcg_at_k(pred_saliency, gt_saliency, top15_k(n)), ndcg_at_k(pred_saliency, gt_saliency, n)};
}

/// Same as ndcg_vm with the text/clip similarity sequence acting as the prediction.
/// Similarities must already be pooled to clip granularity.
inline NdcgPair ndcg_tm(std::span<const double> similarity, std::span<const double> gt_saliency) {
  if (similarity.size() != gt_saliency.size())
    throw InvalidInput("ndcg_tm: similarity length differs from ground truth");
  return ndcg_vm(similarity, gt_saliency);
}

inline NdcgPair ndcg_ms(const NdcgPair& vm, const NdcgPair& tm) {
  return {(vm.at_15 + tm.at_15) / 2.0, (vm.at_all + tm.at_all) / 2.0};
}

inline double kendall_tau(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("kendall_tau: length mismatch");
  if (a.size() < 2) throw InvalidInput("kendall_tau: need at least two observations");
  const std::size_t n = a.size();
  long long concordant = 0, discordant = 0, ties_a = 0, ties_b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double da = a[i] - a[j];
      const double db = b[i] - b[j];
      if (da == 0.0) ++ties_a;
      if (db == 0.0) ++ties_b;
      if (da == 0.0 || db == 0.0) continue;
      if ((da > 0.0) == (db > 0.0))
        ++concordant;
      else
        ++discordant;
    }
  }
  const auto pairs = static_cast<long long>(n * (n - 1) / 2);
  const double denom = std::sqrt(static_cast<double>(pairs - ties_a) * static_cast<double>(pairs - ties_b));
  if (denom == 0.0) return kNaN;
  return static_cast<double>(concordant - discordant) / denom;
}

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return values[x] < values[y]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("spearman_rho: length mismatch");
  if (a.size() < 2) throw InvalidInput("spearman_rho: need at least two observations");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

/// Frame-overlap F-score; 0 when either selection is empty.
inline double interval_fscore(const FrameSelection& pred, const FrameSelection& gt) {
  if (pred.size() != gt.size()) throw InvalidInput("interval_fscore: length mismatch");
  std::size_t overlap = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) overlap += (pred.bits[i] & gt.bits[i]);
  const std::size_t np = pred.count_ones();
  const std::size_t ng = gt.count_ones();
  if (np == 0 || ng == 0 || overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(np);
  const double recall = static_cast<double>(overlap) / static_cast<double>(ng);
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace bisum
