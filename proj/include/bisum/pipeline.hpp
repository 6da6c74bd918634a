#pragma once

// Builds (video, VM-Summary, TM-Summary) triplets from query-level
// highlight annotations, with split assignment and dataset statistics.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bisum/error.hpp"
#include "bisum/io.hpp"
#include "bisum/metrics.hpp"
#include "bisum/summarizer.hpp"
#include "bisum/timeline.hpp"

namespace bisum {

inline constexpr int kMaxAnnotatorScore = 4;

/// One annotated query over a source video. `clip_scores` holds one row of
/// annotator scores per clip covered by the relevant windows, in ascending
/// source-time order; overlapping windows share their clips.
struct AnnotationRecord {
  std::int64_t qid = 0;
  std::string query;
  std::string vid;
  double source_duration_s = 0.0;
  std::vector<Interval> relevant_windows;
  std::vector<std::vector<int>> clip_scores;
};

// Merged-time span [merged_start_s, merged_start_s + length_s) comes from
// source-time span [source_start_s, source_start_s + length_s).
struct WindowMapping {
  double merged_start_s = 0.0;
  double source_start_s = 0.0;
  double length_s = 0.0;

  friend bool operator==(const WindowMapping&, const WindowMapping&) = default;
};

namespace detail {

inline bool on_grid(double t, double clip) {
  const double q = t / clip;
  return std::abs(q - std::round(q)) < 1e-6;
}

// Sorted, with overlapping or touching windows coalesced.
inline std::vector<Interval> coalesce(std::vector<Interval> windows) {
  std::sort(windows.begin(), windows.end(),
            [](const Interval& a, const Interval& b) { return a.start_s < b.start_s; });
  std::vector<Interval> out;
  for (const auto& w : windows) {
    if (!out.empty() && w.start_s <= out.back().end_s + kTimeEpsilon)
      out.back().end_s = std::max(out.back().end_s, w.end_s);
    else
      out.push_back(w);
  }
  return out;
}

inline std::size_t covered_clips(std::span<const Interval> coalesced, double clip) {
  std::size_t n = 0;
  for (const auto& w : coalesced) n += clip_count(w.length(), clip);
  return n;
}

}  // namespace detail

inline AnnotationRecord parse_annotation(const nlohmann::json& j, const std::string& source, std::size_t line) {
  auto fail = [&](const std::string& field, const std::string& what) -> ParseError {
    return ParseError(source, line, field, what);
  };
  if (!j.is_object()) throw fail("", "expected a JSON object");
  for (const char* key : {"qid", "query", "vid", "duration", "relevant_windows", "saliency_scores"})
    if (!j.contains(key)) throw fail(key, "missing");

  AnnotationRecord r;
  const auto& qid = j["qid"];
  if (!qid.is_number_integer()) throw fail("qid", "expected an integer");
  r.qid = qid.get<std::int64_t>();
  const std::string tag = "qid " + std::to_string(r.qid);

  if (!j["query"].is_string()) throw fail("query", tag + ": expected a string");
  r.query = j["query"].get<std::string>();
  if (!j["vid"].is_string()) throw fail("vid", tag + ": expected a string");
  r.vid = j["vid"].get<std::string>();
  if (r.vid.empty()) throw fail("vid", tag + ": empty");
  const auto& dur = j["duration"];
  if (!dur.is_number() || !(dur.get<double>() > 0.0) || !std::isfinite(dur.get<double>()))
    throw fail("duration", tag + ": expected a positive number");
  r.source_duration_s = dur.get<double>();

  const auto& windows = j["relevant_windows"];
  if (!windows.is_array() || windows.empty()) throw fail("relevant_windows", tag + ": expected a non-empty array");
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const std::string path = fmt::format("relevant_windows[{}]", w);
    const auto& pair = windows[w];
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number())
      throw fail(path, tag + ": expected [start, end]");
    const double s = pair[0].get<double>(), e = pair[1].get<double>();
    if (!std::isfinite(s) || !std::isfinite(e) || s < 0.0 || !(s < e))
      throw fail(path, tag + fmt::format(": invalid window [{}, {}]", s, e));
    if (e > r.source_duration_s + kTimeEpsilon)
      throw fail(path + "[1]", tag + fmt::format(": window end {} exceeds duration {}", e, r.source_duration_s));
    if (!detail::on_grid(s, kDefaultClipDuration))
      throw fail(path + "[0]", tag + fmt::format(": start {} is not on the {} s clip grid", s, kDefaultClipDuration));
    if (!detail::on_grid(e, kDefaultClipDuration) && std::abs(e - r.source_duration_s) > kTimeEpsilon)
      throw fail(path + "[1]", tag + fmt::format(": end {} is not on the {} s clip grid", e, kDefaultClipDuration));
    r.relevant_windows.push_back({s, e});
  }

  const auto& scores = j["saliency_scores"];
  if (!scores.is_array()) throw fail("saliency_scores", tag + ": expected an array");
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const std::string path = fmt::format("saliency_scores[{}]", c);
    const auto& row = scores[c];
    if (!row.is_array() || row.empty()) throw fail(path, tag + ": expected a non-empty array of scores");
    std::vector<int> values;
    for (std::size_t a = 0; a < row.size(); ++a) {
      if (!row[a].is_number_integer()) throw fail(fmt::format("{}[{}]", path, a), tag + ": expected an integer");
      const auto v = row[a].get<std::int64_t>();
      if (v < 0 || v > kMaxAnnotatorScore)
        throw fail(fmt::format("{}[{}]", path, a), tag + fmt::format(": score {} outside 0..{}", v, kMaxAnnotatorScore));
      values.push_back(static_cast<int>(v));
    }
    r.clip_scores.push_back(std::move(values));
  }
  const auto expected = detail::covered_clips(detail::coalesce(r.relevant_windows), kDefaultClipDuration);
  if (r.clip_scores.size() != expected)
    throw fail("saliency_scores",
               tag + fmt::format(": {} score rows for {} covered clips", r.clip_scores.size(), expected));
  return r;
}

/// Parses line-delimited annotation records; blank lines are skipped.
inline std::vector<AnnotationRecord> ingest(std::istream& in, const std::string& source) {
  std::vector<AnnotationRecord> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source, line, "", fmt::format("invalid JSON at byte {}", e.byte));
    }
    out.push_back(parse_annotation(j, source, line));
  }
  return out;
}

inline std::vector<AnnotationRecord> ingest(const std::string& path) {
  std::istringstream in(read_file(path));
  return ingest(in, path);
}

struct MergedVideo {
  ClipTimeline timeline;
  std::vector<WindowMapping> window_map;
};

/// Concatenates the coalesced relevant windows into one contiguous video whose
/// clip saliency is the mean annotator score.
inline MergedVideo merge_windows(const AnnotationRecord& record) {
  const auto windows = detail::coalesce(record.relevant_windows);
  if (windows.empty()) throw InvalidInput("qid " + std::to_string(record.qid) + ": no relevant windows");
  const std::size_t expected = detail::covered_clips(windows, kDefaultClipDuration);
  if (record.clip_scores.size() != expected)
    throw InvalidInput("qid " + std::to_string(record.qid) + ": score rows do not match covered clips");

  std::vector<WindowMapping> map;
  double merged = 0.0;
  for (const auto& w : windows) {
    map.push_back({merged, w.start_s, w.length()});
    merged += w.length();
  }
  std::vector<double> saliency;
  saliency.reserve(record.clip_scores.size());
  for (const auto& row : record.clip_scores) {
    double sum = 0.0;
    for (int v : row) sum += v;
    saliency.push_back(sum / static_cast<double>(row.size()));
  }
  return {ClipTimeline(std::move(saliency), merged, kDefaultClipDuration), std::move(map)};
}

/// Source time of a merged-time instant.
inline double source_time(std::span<const WindowMapping> map, double merged_t) {
  for (const auto& m : map)
    if (merged_t < m.merged_start_s + m.length_s - kTimeEpsilon || &m == &map.back())
      return m.source_start_s + (merged_t - m.merged_start_s);
  throw InvalidInput("source_time: empty window map");
}

/// Source clip index of every merged clip.
inline std::vector<std::size_t> source_clip_ids(std::span<const WindowMapping> map, double clip_duration_s) {
  std::vector<std::size_t> out;
  for (const auto& m : map) {
    const auto first = static_cast<std::size_t>(std::llround(m.source_start_s / clip_duration_s));
    const std::size_t n = clip_count(m.length_s, clip_duration_s);
    for (std::size_t i = 0; i < n; ++i) out.push_back(first + i);
  }
  return out;
}

enum class Split { train, validation, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::validation: return "validation";
    case Split::test: return "test";
  }
  return "test";
}

inline constexpr std::array<Split, 3> kSplits{Split::train, Split::validation, Split::test};

struct SplitSpec {
  double train = 0.72;
  double validation = 0.08;
  double test = 0.20;

  void validate() const {
    if (train < 0.0 || validation < 0.0 || test < 0.0) throw InvalidInput("split fractions must be non-negative");
    if (std::abs(train + validation + test - 1.0) > 1e-9) throw InvalidInput("split fractions must sum to 1");
  }
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Split of a source video. Depends only on the video id, the seed and the
/// fractions, so every query over one source video lands in the same split.
inline Split assign_split(std::string_view vid, const SplitSpec& spec, std::uint64_t seed) {
  const double u = static_cast<double>(mix64(fnv1a64(vid) ^ mix64(seed)) >> 11) * 0x1.0p-53;
  if (u < spec.train) return Split::train;
  if (u < spec.train + spec.validation) return Split::validation;
  return Split::test;
}

struct BidsTriplet {
  std::string video_id;
  std::string tm_summary;
  ClipTimeline timeline;
  VMSummary vm_summary;
  Split split = Split::train;
  std::int64_t qid = 0;
  std::string source_vid;
  double source_duration_s = 0.0;
  std::vector<WindowMapping> window_map;
};

struct Rejection {
  std::int64_t qid = 0;
  std::string vid;
  std::string reason;  // duplicate_qid | low_coverage
  std::string detail;
};

struct BuildOptions {
  double budget_ratio = kDefaultBudgetRatio;
  SplitSpec splits{};
  std::uint64_t seed = 0;
  double min_segment_s = 2.0;
  double min_coverage = 0.05;
};

struct Dataset {
  std::vector<BidsTriplet> triplets;
  std::vector<Rejection> rejections;
};

inline std::string video_id_for(std::int64_t qid) { return "q" + std::to_string(qid); }

inline Dataset build_dataset(std::span<const AnnotationRecord> records, const BuildOptions& opt = {}) {
  if (!(opt.budget_ratio > 0.0 && opt.budget_ratio <= 1.0)) throw InvalidInput("budget ratio must be in (0, 1]");
  opt.splits.validate();
  Dataset out;
  std::set<std::int64_t> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.qid).second) {
      out.rejections.push_back({r.qid, r.vid, "duplicate_qid", "qid already used by an earlier record"});
      continue;
    }
    auto merged = merge_windows(r);
    const auto summary = extract_vm_summary(merged.timeline, opt.budget_ratio);
    const auto cleaned = clean_summary(summary, merged.timeline, opt.min_segment_s, opt.min_coverage);
    if (cleaned.rejected) {
      out.rejections.push_back({r.qid, r.vid, "low_coverage",
                                fmt::format("summary covers {:.4f} of the video", cleaned.coverage)});
      continue;
    }
    out.triplets.push_back(BidsTriplet{video_id_for(r.qid), r.query, std::move(merged.timeline), cleaned.summary,
                                       assign_split(r.vid, opt.splits, opt.seed), r.qid, r.vid,
                                       r.source_duration_s, std::move(merged.window_map)});
  }
  return out;
}

inline std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

struct SplitStats {
  std::size_t video_count = 0;
  double avg_video_length_s = 0.0;
  double total_length_h = 0.0;
  double avg_vm_length_s = 0.0;
  double avg_vm_proportion_pct = 0.0;
  double avg_tm_words = 0.0;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  std::size_t out_of_range = 0;

  double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
  double bin_start(std::size_t i) const { return lo + bin_width() * static_cast<double>(i); }
  double bin_end(std::size_t i) const { return lo + bin_width() * static_cast<double>(i + 1); }

  // Bins are half-open except the last, which also takes `hi`.
  void add(double x) {
    if (x < lo - kTimeEpsilon || x > hi + kTimeEpsilon || counts.empty()) {
      ++out_of_range;
      return;
    }
    auto i = static_cast<std::size_t>(std::floor((x - lo) / bin_width() + 1e-9));
    counts[std::min(i, counts.size() - 1)]++;
  }
};

struct DatasetStats {
  std::map<Split, SplitStats> per_split;
  SplitStats overall;
  Histogram proportion{5.0, 15.0, std::vector<std::size_t>(10, 0), 0};  // VM proportion, %
  Histogram position{0.0, 100.0, std::vector<std::size_t>(20, 0), 0};   // interval midpoint, % of duration
};

inline DatasetStats compute_stats(std::span<const BidsTriplet> triplets) {
  if (triplets.empty()) throw InvalidInput("compute_stats: empty dataset");
  DatasetStats stats;
  struct Acc {
    std::size_t n = 0;
    double length = 0, vm = 0, proportion = 0, words = 0;
  };
  std::map<Split, Acc> acc;
  Acc all;
  for (const auto& t : triplets) {
    const double length = t.timeline.video_duration_s();
    const double vm = t.vm_summary.total_duration();
    const double proportion = 100.0 * vm / length;
    const auto words = static_cast<double>(word_count(t.tm_summary));
    for (Acc* a : {&acc[t.split], &all}) {
      ++a->n;
      a->length += length;
      a->vm += vm;
      a->proportion += proportion;
      a->words += words;
    }
    stats.proportion.add(proportion);
    for (const auto& iv : t.vm_summary.intervals) stats.position.add(100.0 * 0.5 * (iv.start_s + iv.end_s) / length);
  }
  auto finish = [](const Acc& a) {
    SplitStats s;
    s.video_count = a.n;
    if (a.n == 0) return s;
    const auto n = static_cast<double>(a.n);
    s.avg_video_length_s = a.length / n;
    s.total_length_h = a.length / 3600.0;
    s.avg_vm_length_s = a.vm / n;
    s.avg_vm_proportion_pct = a.proportion / n;
    s.avg_tm_words = a.words / n;
    return s;
  };
  for (Split s : kSplits) stats.per_split[s] = finish(acc[s]);
  stats.overall = finish(all);
  return stats;
}

struct PreservationResult {
  std::vector<std::pair<std::string, double>> per_video;  // NaN when excluded
  std::vector<double> p_values;                           // per video, NaN when excluded
  std::size_t excluded = 0;                               // constant saliency or constant selection
  double mean_rho = kNaN;
  double mean_p_value = kNaN;
  bool significant = false;
};

namespace detail {

inline double two_sided_t_p(double t, double df) {
  if (!(df > 0.0)) return kNaN;
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace detail

/// Spearman correlation between each video's frame-level saliency and its
/// rasterized summary. Per-video p-values use t = r sqrt((n-2)/(1-r^2)); the
/// mean is tested against zero with a one-sample t-test over videos (with a
/// single video, that video's own p-value is used).
inline PreservationResult validate_saliency_preservation(std::span<const BidsTriplet> triplets,
                                                         double fps = kDefaultFps) {
  if (triplets.empty()) throw InvalidInput("validate_saliency_preservation: empty dataset");
  PreservationResult out;
  std::vector<double> valid;
  double last_p = kNaN;
  for (const auto& t : triplets) {
    const auto s = expand_to_frames(t.timeline, fps);
    const auto bits = rasterize(t.vm_summary.intervals, fps, t.timeline.video_duration_s()).bits;
    std::vector<double> f(bits.begin(), bits.end());
    const double rho = s.size() >= 2 ? spearman_rho(s, f) : kNaN;
    double p = kNaN;
    if (std::isnan(rho)) {
      ++out.excluded;
    } else {
      const double df = static_cast<double>(s.size()) - 2.0;
      const double denom = 1.0 - rho * rho;
      p = denom <= 0.0 ? 0.0 : detail::two_sided_t_p(rho * std::sqrt(df / denom), df);
      valid.push_back(rho);
      last_p = p;
    }
    out.per_video.emplace_back(t.video_id, rho);
    out.p_values.push_back(p);
  }
  if (valid.empty()) return out;
  double mean = 0.0;
  for (double r : valid) mean += r;
  mean /= static_cast<double>(valid.size());
  out.mean_rho = mean;
  if (valid.size() == 1) {
    out.mean_p_value = last_p;
  } else {
    double ss = 0.0;
    for (double r : valid) ss += (r - mean) * (r - mean);
    const double n = static_cast<double>(valid.size());
    const double se = std::sqrt(ss / (n - 1.0) / n);
    out.mean_p_value = se == 0.0 ? (mean == 0.0 ? 1.0 : 0.0) : detail::two_sided_t_p(mean / se, n - 1.0);
  }
  out.significant = !std::isnan(out.mean_p_value) && out.mean_p_value < 0.05;
  return out;
}

// Serialization.

inline nlohmann::ordered_json triplet_json(const BidsTriplet& t) {
  nlohmann::ordered_json j;
  j["video_id"] = t.video_id;
  j["tm_summary"] = t.tm_summary;
  j["clip_duration_s"] = t.timeline.clip_duration_s();
  j["duration_s"] = t.timeline.video_duration_s();
  j["saliency"] = t.timeline.scores();
  auto& iv = j["vm_intervals"] = nlohmann::ordered_json::array();
  for (const auto& i : t.vm_summary.intervals) iv.push_back({i.start_s, i.end_s});
  j["split"] = to_string(t.split);
  auto& prov = j["provenance"];
  prov["qid"] = t.qid;
  prov["vid"] = t.source_vid;
  prov["source_duration_s"] = t.source_duration_s;
  auto& windows = prov["window_map"] = nlohmann::ordered_json::array();
  for (const auto& m : t.window_map)
    windows.push_back({{"merged_start_s", m.merged_start_s}, {"source_start_s", m.source_start_s}, {"length_s", m.length_s}});
  return j;
}

inline std::string triplets_jsonl(std::span<const BidsTriplet> triplets) {
  std::string out;
  for (const auto& t : triplets) out += triplet_json(t).dump() + "\n";
  return out;
}

inline std::string rejections_jsonl(std::span<const Rejection> rejections) {
  std::string out;
  for (const auto& r : rejections) {
    nlohmann::ordered_json j;
    j["qid"] = r.qid;
    j["vid"] = r.vid;
    j["reason"] = r.reason;
    j["detail"] = r.detail;
    out += j.dump() + "\n";
  }
  return out;
}

namespace detail {

inline nlohmann::ordered_json split_stats_json(const SplitStats& s) {
  return {{"video_count", s.video_count},
          {"avg_video_length_s", s.avg_video_length_s},
          {"total_length_h", s.total_length_h},
          {"avg_vm_length_s", s.avg_vm_length_s},
          {"avg_vm_proportion_pct", s.avg_vm_proportion_pct},
          {"avg_tm_words", s.avg_tm_words}};
}

inline nlohmann::ordered_json histogram_json(const Histogram& h) {
  nlohmann::ordered_json j;
  j["lo"] = h.lo;
  j["hi"] = h.hi;
  j["counts"] = h.counts;
  j["out_of_range"] = h.out_of_range;
  return j;
}

}  // namespace detail

inline nlohmann::ordered_json stats_json(const DatasetStats& stats) {
  nlohmann::ordered_json j;
  j["kind"] = "dataset-stats";
  auto& splits = j["splits"] = nlohmann::ordered_json::object();
  for (const auto& [split, s] : stats.per_split) splits[to_string(split)] = detail::split_stats_json(s);
  j["overall"] = detail::split_stats_json(stats.overall);
  j["vm_proportion_histogram"] = detail::histogram_json(stats.proportion);
  j["vm_position_histogram"] = detail::histogram_json(stats.position);
  return j;
}

inline DatasetStats stats_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("kind", "") != "dataset-stats") throw InvalidInput("not a dataset-stats document");
  auto split_stats = [](const nlohmann::json& s) {
    SplitStats out;
    out.video_count = s.at("video_count").get<std::size_t>();
    out.avg_video_length_s = s.at("avg_video_length_s").get<double>();
    out.total_length_h = s.at("total_length_h").get<double>();
    out.avg_vm_length_s = s.at("avg_vm_length_s").get<double>();
    out.avg_vm_proportion_pct = s.at("avg_vm_proportion_pct").get<double>();
    out.avg_tm_words = s.at("avg_tm_words").get<double>();
    return out;
  };
  auto histogram = [](const nlohmann::json& h) {
    Histogram out;
    out.lo = h.at("lo").get<double>();
    out.hi = h.at("hi").get<double>();
    out.counts = h.at("counts").get<std::vector<std::size_t>>();
    out.out_of_range = h.value("out_of_range", std::size_t{0});
    if (!(out.hi > out.lo)) throw InvalidInput("histogram range is empty");
    return out;
  };
  DatasetStats stats;
  try {
    for (Split s : kSplits)
      if (j.at("splits").contains(to_string(s))) stats.per_split[s] = split_stats(j.at("splits").at(to_string(s)));
    stats.overall = split_stats(j.at("overall"));
    stats.proportion = histogram(j.at("vm_proportion_histogram"));
    stats.position = histogram(j.at("vm_position_histogram"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed dataset-stats document: ") + e.what());
  }
  return stats;
}

inline std::string stats_csv(const DatasetStats& stats) {
  std::string out =
      "split,video_count,avg_video_length_s,total_length_h,avg_vm_length_s,avg_vm_proportion_pct,avg_tm_words\n";
  auto row = [&](const std::string& name, const SplitStats& s) {
    out += fmt::format("{},{},{},{},{},{},{}\n", name, s.video_count, s.avg_video_length_s, s.total_length_h,
                       s.avg_vm_length_s, s.avg_vm_proportion_pct, s.avg_tm_words);
  };
  for (const auto& [split, s] : stats.per_split) row(to_string(split), s);
  row("all", stats.overall);
  return out;
}

inline std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_start,bin_end,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    out += fmt::format("{},{},{}\n", h.bin_start(i), h.bin_end(i), h.counts[i]);
  return out;
}

}  // namespace bisum
