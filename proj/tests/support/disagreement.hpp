#pragma once

// Exhaustive search for a pair of predictions over one ground truth where
// rank correlation prefers A but top-weighted NDCG prefers B.
//
// Items are indexed by ground-truth rank (item 0 has the highest gain). A
// prediction is an ordering of the items; its score for item i is n minus the
// item's position. A misranks only items {0, 1}: both are displaced and every
// other item keeps its relative order. B misranks only items {n-2, n-1} in the
// same sense. Among pairs with tau(A) > tau(B), rho(A) >= rho(B) and
// NDCG@15%(B) > NDCG@15%(A), the search keeps the pair whose items move the
// least (summed |position - true position| over both predictions), then the
// largest tau margin, then the first found (n ascending, orderings in
// lexicographic order).

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "oracles.hpp"

namespace disagreement {

struct Case {
  std::vector<double> gt;
  std::vector<double> pred_a;
  std::vector<double> pred_b;
  double tau_a, tau_b, rho_a, rho_b, ndcg_a, ndcg_b;
  std::size_t displacement;
};

inline bool relative_order_kept(const std::vector<std::size_t>& order, std::size_t skip_lo, std::size_t skip_hi) {
  std::size_t last = 0;
  bool first = true;
  for (std::size_t item : order) {
    if (item >= skip_lo && item <= skip_hi) continue;
    if (!first && item < last) return false;
    last = item;
    first = false;
  }
  return true;
}

inline std::size_t displacement(const std::vector<std::size_t>& order) {
  std::size_t total = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) total += pos > order[pos] ? pos - order[pos] : order[pos] - pos;
  return total;
}

inline std::vector<double> scores_from_order(const std::vector<std::size_t>& order) {
  std::vector<double> s(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) s[order[pos]] = static_cast<double>(order.size() - pos);
  return s;
}

inline std::optional<Case> search(std::size_t max_n = 8) {
  std::optional<Case> best;
  for (std::size_t n = 4; n <= max_n; ++n) {
    std::vector<double> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = static_cast<double>(n - 1 - i);
    const auto gt = oracle::normalize(raw);
    const std::size_t k = oracle::k15(n);

    std::vector<std::vector<std::size_t>> as, bs;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    do {
      auto pos = [&](std::size_t item) {
        return static_cast<std::size_t>(std::find(order.begin(), order.end(), item) - order.begin());
      };
      if (pos(0) != 0 && pos(1) != 1 && relative_order_kept(order, 0, 1)) as.push_back(order);
      if (pos(n - 2) != n - 2 && pos(n - 1) != n - 1 && relative_order_kept(order, n - 2, n - 1)) bs.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));

    for (const auto& a : as)
      for (const auto& b : bs) {
        const auto pa = scores_from_order(a), pb = scores_from_order(b);
        Case c{gt, pa, pb, oracle::kendall_tau_b(pa, gt), oracle::kendall_tau_b(pb, gt), oracle::spearman(pa, gt),
               oracle::spearman(pb, gt), oracle::ndcg(pa, gt, k), oracle::ndcg(pb, gt, k),
               displacement(a) + displacement(b)};
        if (!(c.tau_a > c.tau_b && c.rho_a >= c.rho_b && c.ndcg_b > c.ndcg_a)) continue;
        if (!best) {
          best = c;
          continue;
        }
        const double dt = (c.tau_a - c.tau_b) - (best->tau_a - best->tau_b);
        if (c.displacement < best->displacement || (c.displacement == best->displacement && dt > 1e-12)) best = c;
      }
  }
  return best;
}

}  // namespace disagreement
