#pragma once

// Saliency-ranked VM-Summary extraction and the 0/1 knapsack baseline.
//
// extract_vm_summary() walks score levels from the highest down. A level whose
// segments all fit the remaining budget is appended whole. The first level that
// does not fit is scaled proportionally, each segment keeping the part nearest
// its higher-scored neighbours (or its centre), and every lower level is rejected.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bisum/error.hpp"
#include "bisum/timeline.hpp"

namespace bisum {

/// Keeps `allotted_length` seconds of `seg`.
///
/// A neighbour counts as higher only when its score strictly exceeds the
/// segment's. Missing neighbours (video edges) are passed as std::nullopt and
/// never count as higher.
inline std::vector<Interval> scale_segment(const Segment& seg, std::optional<double> left_neighbor_score,
                                           std::optional<double> right_neighbor_score, double allotted_length) {
  if (!(allotted_length > 0.0)) throw InvalidInput("scale_segment: allotted length must be positive");
  if (allotted_length > seg.length() + kTimeEpsilon)
    throw InvalidInput("scale_segment: allotted length exceeds segment duration");
  allotted_length = std::min(allotted_length, seg.length());

  const bool left_higher = left_neighbor_score && *left_neighbor_score > seg.score;
  const bool right_higher = right_neighbor_score && *right_neighbor_score > seg.score;

  if (left_higher && right_higher) {
    const double half = allotted_length / 2.0;
    return {{seg.start_s, seg.start_s + half}, {seg.end_s - half, seg.end_s}};
  }
  if (left_higher) return {{seg.start_s, seg.start_s + allotted_length}};
  if (right_higher) return {{seg.end_s - allotted_length, seg.end_s}};
  const double mid = (seg.start_s + seg.end_s) / 2.0;
  return {{mid - allotted_length / 2.0, mid + allotted_length / 2.0}};
}

/// Trace of one extraction run; the selected intervals plus where the walk stopped.
struct ExtractionTrace {
  VMSummary summary;
  // Score levels appended whole, in processing order.
  std::vector<double> full_levels;
  // Level that was scaled (the walk stops right after it), if any.
  std::optional<double> scaled_level;
};

inline ExtractionTrace extract_vm_summary_traced(const ClipTimeline& timeline,
                                                 double budget_ratio = kDefaultBudgetRatio) {
  if (!(budget_ratio > 0.0 && budget_ratio <= 1.0))
    throw InvalidInput("budget ratio must lie in (0, 1]");

  const auto segments = merge_clips(timeline);
  const double budget = budget_ratio * timeline.video_duration_s();

  // Levels in descending score order, each holding its segment indices in temporal order.
  std::map<double, std::vector<std::size_t>, std::greater<>> levels;
  for (std::size_t i = 0; i < segments.size(); ++i) levels[segments[i].score].push_back(i);

  ExtractionTrace trace;
  trace.summary.budget_ratio = budget_ratio;
  auto& out = trace.summary.intervals;
  double used = 0.0;

  for (const auto& [score, members] : levels) {
    const double remaining = budget - used;
    if (remaining <= kTimeEpsilon) break;

    double level_duration = 0.0;
    for (std::size_t idx : members) level_duration += segments[idx].length();

    if (level_duration <= remaining) {
      for (std::size_t idx : members) out.push_back(segments[idx].interval());
      used += level_duration;
      trace.full_levels.push_back(score);
      continue;
    }

    for (std::size_t idx : members) {
      const auto& seg = segments[idx];
      const double allotted = remaining * seg.length() / level_duration;
      const std::optional<double> left =
          idx > 0 ? std::optional<double>(segments[idx - 1].score) : std::nullopt;
      const std::optional<double> right =
          idx + 1 < segments.size() ? std::optional<double>(segments[idx + 1].score) : std::nullopt;
      for (const auto& iv : scale_segment(seg, left, right, allotted)) out.push_back(iv);
    }
    trace.scaled_level = score;
    break;
  }

  std::sort(out.begin(), out.end(), [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  return trace;
}

/// Ranking-and-scaling VM-Summary extraction.
inline VMSummary extract_vm_summary(const ClipTimeline& timeline, double budget_ratio = kDefaultBudgetRatio) {
  return extract_vm_summary_traced(timeline, budget_ratio).summary;
}

/// 0/1 knapsack over whole segments: maximize sum(score * duration) with
/// sum(duration) <= budget_s. Durations are discretized to clip units (rounded
/// up, so the continuous budget is never exceeded). Among equal-value
/// solutions the one taking earlier segments wins.
inline VMSummary knapsack_summary(std::span<const Segment> segments, double budget_s,
                                  double clip_duration_s = kDefaultClipDuration) {
  if (budget_s < 0.0) throw InvalidInput("knapsack budget must be non-negative");
  if (!(clip_duration_s > 0.0)) throw InvalidInput("clip duration must be positive");

  VMSummary summary;
  double span_end = 0.0;
  for (const auto& s : segments) span_end = std::max(span_end, s.end_s);
  summary.budget_ratio = span_end > 0.0 ? budget_s / span_end : 0.0;
  if (segments.empty()) return summary;

  const auto capacity = static_cast<std::size_t>(std::floor(budget_s / clip_duration_s + kTimeEpsilon));
  const std::size_t m = segments.size();
  std::vector<std::size_t> weight(m);
  std::vector<double> value(m);
  for (std::size_t i = 0; i < m; ++i) {
    weight[i] = static_cast<std::size_t>(std::ceil(segments[i].length() / clip_duration_s - kTimeEpsilon));
    value[i] = segments[i].score * segments[i].length();
  }

  // best[i][c]: optimum over segments i..m-1 with capacity c. Filled back to front so that
  // reconstruction from the front can prefer taking the earlier segment on ties.
  std::vector<std::vector<double>> best(m + 1, std::vector<double>(capacity + 1, 0.0));
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t c = 0; c <= capacity; ++c) {
      double skip = best[i + 1][c];
      double take = weight[i] <= c ? value[i] + best[i + 1][c - weight[i]] : -1.0;
      best[i][c] = std::max(skip, take);
    }
  }

  std::size_t c = capacity;
  for (std::size_t i = 0; i < m; ++i) {
    if (weight[i] > c) continue;
    const double take = value[i] + best[i + 1][c - weight[i]];
    const double tol = 1e-12 * std::max(1.0, std::abs(best[i][c]));
    if (take >= best[i][c] - tol && value[i] > 0.0) {
      summary.intervals.push_back(segments[i].interval());
      c -= weight[i];
    }
  }
  std::sort(summary.intervals.begin(), summary.intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  return summary;
}

struct CleanResult {
  VMSummary summary;
  bool rejected = false;
  double coverage = 0.0;  // surviving duration / video duration
};

/// Drops summary intervals shorter than `min_segment_s`; rejects the video when the
/// surviving duration covers less than `min_coverage` of it.
inline CleanResult clean_summary(const VMSummary& summary, const ClipTimeline& timeline,
                                 double min_segment_s = 2.0, double min_coverage = 0.05) {
  CleanResult result;
  result.summary.budget_ratio = summary.budget_ratio;
  for (const auto& iv : summary.intervals)
    if (iv.length() >= min_segment_s - kTimeEpsilon) result.summary.intervals.push_back(iv);
  result.coverage = result.summary.total_duration() / timeline.video_duration_s();
  result.rejected = result.coverage < min_coverage - kTimeEpsilon;
  return result;
}

}  // namespace bisum
