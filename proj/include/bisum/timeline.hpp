#pragma once

// Clip grids, segments, frame selections and score normalization.
//
// Time is measured in seconds throughout. A video is covered by a grid of
// fixed-duration clips (2 s by default); the last clip may be shorter when
// the duration is not a multiple of the clip duration.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bisum/error.hpp"

namespace bisum {

inline constexpr double kDefaultClipDuration = 2.0;
inline constexpr double kDefaultFps = 8.0;
inline constexpr double kDefaultBudgetRatio = 0.15;

// Slack for comparisons of accumulated boundary arithmetic.
inline constexpr double kTimeEpsilon = 1e-9;

struct Interval {
  double start_s = 0.0;
  double end_s = 0.0;

  double length() const { return end_s - start_s; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct Segment {
  double start_s = 0.0;
  double end_s = 0.0;
  double score = 0.0;

  double length() const { return end_s - start_s; }
  Interval interval() const { return {start_s, end_s}; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

inline std::size_t clip_count(double video_duration_s, double clip_duration_s) {
  return static_cast<std::size_t>(std::ceil(video_duration_s / clip_duration_s - kTimeEpsilon));
}

/// Per-clip saliency over one video.
class ClipTimeline {
 public:
  ClipTimeline(std::vector<double> scores, double video_duration_s,
               double clip_duration_s = kDefaultClipDuration)
      : scores_(std::move(scores)), video_duration_s_(video_duration_s), clip_duration_s_(clip_duration_s) {
    if (!(clip_duration_s_ > 0.0) || !std::isfinite(clip_duration_s_))
      throw InvalidInput("clip duration must be positive");
    if (!(video_duration_s_ > 0.0) || !std::isfinite(video_duration_s_))
      throw InvalidInput("video duration must be positive");
    if (scores_.empty()) throw InvalidInput("score sequence is empty");
    const std::size_t expected = clip_count(video_duration_s_, clip_duration_s_);
    if (scores_.size() != expected)
      throw InvalidInput("expected " + std::to_string(expected) + " clip scores, got " +
                         std::to_string(scores_.size()));
    for (double s : scores_)
      if (!std::isfinite(s)) throw InvalidInput("clip scores must be finite");
  }

  // Video whose duration is an exact multiple of the clip duration.
  static ClipTimeline from_scores(std::vector<double> scores, double clip_duration_s = kDefaultClipDuration) {
    const double duration = static_cast<double>(scores.size()) * clip_duration_s;
    return ClipTimeline(std::move(scores), duration > 0 ? duration : 0.0, clip_duration_s);
  }

  const std::vector<double>& scores() const { return scores_; }
  std::size_t size() const { return scores_.size(); }
  double video_duration_s() const { return video_duration_s_; }
  double clip_duration_s() const { return clip_duration_s_; }

  double clip_start(std::size_t i) const { return static_cast<double>(i) * clip_duration_s_; }
  double clip_end(std::size_t i) const {
    return std::min(static_cast<double>(i + 1) * clip_duration_s_, video_duration_s_);
  }

 private:
  std::vector<double> scores_;
  double video_duration_s_;
  double clip_duration_s_;
};

/// Binary per-frame membership sequence.
struct FrameSelection {
  double fps = kDefaultFps;
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count_ones() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
};

struct VMSummary {
  std::vector<Interval> intervals;
  double budget_ratio = kDefaultBudgetRatio;

  double total_duration() const {
    double total = 0.0;
    for (const auto& iv : intervals) total += iv.length();
    return total;
  }
};

inline std::size_t frame_count(double video_duration_s, double fps) {
  return static_cast<std::size_t>(std::llround(video_duration_s * fps));
}

// Time at the centre of frame i.
inline double frame_center(std::size_t i, double fps) { return (static_cast<double>(i) + 0.5) / fps; }

/// Merges runs of adjacent clips that carry identical scores.
inline std::vector<Segment> merge_clips(const ClipTimeline& timeline) {
  const auto& scores = timeline.scores();
  if (scores.empty()) throw InvalidInput("merge_clips: empty score sequence");
  std::vector<Segment> segments;
  std::size_t run_begin = 0;
  for (std::size_t i = 1; i <= scores.size(); ++i) {
    if (i == scores.size() || scores[i] != scores[run_begin]) {
      segments.push_back({timeline.clip_start(run_begin), timeline.clip_end(i - 1), scores[run_begin]});
      run_begin = i;
    }
  }
  return segments;
}

// Sorted copy of intervals; throws when two intervals overlap or one lies outside [0, duration].
inline std::vector<Interval> sorted_disjoint(std::span<const Interval> intervals, double video_duration_s) {
  std::vector<Interval> sorted(intervals.begin(), intervals.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& iv = sorted[i];
    if (!(iv.end_s >= iv.start_s)) throw InvalidInput("interval end precedes start");
    if (iv.start_s < -kTimeEpsilon || iv.end_s > video_duration_s + kTimeEpsilon)
      throw InvalidInput("interval lies outside the video");
    if (i > 0 && iv.start_s < sorted[i - 1].end_s - kTimeEpsilon)
      throw InvalidInput("intervals overlap");
  }
  return sorted;
}

/// Frame i is selected iff its centre time (i + 0.5) / fps lies in some [start, end).
inline FrameSelection rasterize(std::span<const Interval> intervals, double fps, double video_duration_s) {
  if (!(fps > 0.0)) throw InvalidInput("fps must be positive");
  if (!(video_duration_s > 0.0)) throw InvalidInput("video duration must be positive");
  const auto sorted = sorted_disjoint(intervals, video_duration_s);
  FrameSelection sel{fps, std::vector<std::uint8_t>(frame_count(video_duration_s, fps), 0)};
  const auto n = static_cast<std::ptrdiff_t>(sel.bits.size());
  for (const auto& iv : sorted) {
    const auto first = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(iv.start_s * fps)) - 1);
    const auto last = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(std::ceil(iv.end_s * fps)) + 1);
    for (auto i = first; i <= last; ++i) {
      const double t = frame_center(static_cast<std::size_t>(i), fps);
      if (t >= iv.start_s && t < iv.end_s) sel.bits[static_cast<std::size_t>(i)] = 1;
    }
  }
  return sel;
}

/// Min-max normalization to [0, 1]. Constant sequences map to all zeros.
inline std::vector<double> normalize_scores(std::span<const double> scores) {
  if (scores.empty()) throw InvalidInput("normalize_scores: empty sequence");
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(scores.size(), 0.0);
  if (range > 0.0) {
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - min) / range;
  }
  return out;
}

// Repeats each clip score for every frame whose centre falls inside that clip.
inline std::vector<double> expand_to_frames(const ClipTimeline& timeline, double fps) {
  const std::size_t n = frame_count(timeline.video_duration_s(), fps);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto clip = static_cast<std::size_t>(frame_center(i, fps) / timeline.clip_duration_s());
    out[i] = timeline.scores()[std::min(clip, timeline.size() - 1)];
  }
  return out;
}

}  // namespace bisum
