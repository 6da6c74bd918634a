#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bisum/metrics.hpp"
#include "bisum/summarizer.hpp"
#include "bisum/timeline.hpp"

namespace bisum {

struct VideoMetrics {
  NdcgPair vm;
  std::optional<NdcgPair> tm;
  std::optional<NdcgPair> ms;
  double kendall_tau = kNaN;
  double spearman_rho = kNaN;
  double f_score = 0.0;
};

struct EvalInput {
  std::vector<double> pred;  // per-clip predicted saliency
  std::vector<double> gt;    // per-clip ground-truth saliency (raw; normalized here)
  std::optional<std::vector<double>> tm_similarity;
  // Ground-truth summary; extracted from `gt` when absent.
  std::optional<std::vector<Interval>> gt_intervals;
  double clip_duration_s = kDefaultClipDuration;
  std::optional<double> video_duration_s;  // defaults to clips * clip duration
};

struct EvalOptions {
  double budget_ratio = kDefaultBudgetRatio;
  double fps = kDefaultFps;
};

inline VideoMetrics evaluate_video(const EvalInput& in, const EvalOptions& opt = {}) {
  if (in.pred.size() != in.gt.size()) throw InvalidInput("prediction and ground truth differ in length");
  if (in.gt.empty()) throw InvalidInput("empty saliency sequence");
  const double duration =
      in.video_duration_s.value_or(static_cast<double>(in.gt.size()) * in.clip_duration_s);

  const auto gt_norm = normalize_scores(in.gt);
  const auto pred_norm = normalize_scores(in.pred);

  VideoMetrics m;
  m.vm = ndcg_vm(pred_norm, gt_norm);
  if (in.tm_similarity) {
    m.tm = ndcg_tm(normalize_scores(*in.tm_similarity), gt_norm);
    m.ms = ndcg_ms(m.vm, *m.tm);
  }
  if (in.gt.size() >= 2) {
    m.kendall_tau = kendall_tau(in.pred, in.gt);
    m.spearman_rho = spearman_rho(in.pred, in.gt);
  }

  const ClipTimeline pred_timeline(in.pred, duration, in.clip_duration_s);
  const auto pred_summary = extract_vm_summary(pred_timeline, opt.budget_ratio);
  std::vector<Interval> gt_intervals;
  if (in.gt_intervals)
    gt_intervals = *in.gt_intervals;
  else
    gt_intervals = extract_vm_summary(ClipTimeline(in.gt, duration, in.clip_duration_s), opt.budget_ratio).intervals;
  m.f_score = interval_fscore(rasterize(pred_summary.intervals, opt.fps, duration),
                              rasterize(gt_intervals, opt.fps, duration));
  return m;
}

struct MetricReport {
  std::map<std::string, VideoMetrics> per_video;

  bool has_tm() const {
    return !per_video.empty() && std::all_of(per_video.begin(), per_video.end(),
                                             [](const auto& kv) { return kv.second.tm.has_value(); });
  }

  std::vector<std::string> columns() const {
    std::vector<std::string> cols{"ndcg_vm@15", "ndcg_vm@all"};
    if (has_tm()) cols.insert(cols.end(), {"ndcg_tm@15", "ndcg_tm@all", "ndcg_ms@15", "ndcg_ms@all"});
    cols.insert(cols.end(), {"kendall_tau", "spearman_rho", "f_score"});
    return cols;
  }

  std::vector<double> row(const VideoMetrics& m) const {
    std::vector<double> r{m.vm.at_15, m.vm.at_all};
    if (has_tm()) r.insert(r.end(), {m.tm->at_15, m.tm->at_all, m.ms->at_15, m.ms->at_all});
    r.insert(r.end(), {m.kendall_tau, m.spearman_rho, m.f_score});
    return r;
  }

  // Unweighted per-video mean of each column; undefined (NaN) entries are skipped.
  std::vector<double> corpus() const {
    const auto cols = columns();
    std::vector<double> sum(cols.size(), 0.0);
    std::vector<std::size_t> count(cols.size(), 0);
    for (const auto& [id, m] : per_video) {
      const auto r = row(m);
      for (std::size_t c = 0; c < r.size(); ++c)
        if (!std::isnan(r[c])) {
          sum[c] += r[c];
          ++count[c];
        }
    }
    std::vector<double> mean(cols.size(), kNaN);
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (count[c] > 0) mean[c] = sum[c] / static_cast<double>(count[c]);
    return mean;
  }
};

namespace detail {
inline nlohmann::ordered_json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}
inline std::string csv_number(double v) { return std::isnan(v) ? std::string("NaN") : fmt::format("{}", v); }
}  // namespace detail

inline nlohmann::ordered_json to_json(const MetricReport& report) {
  const auto cols = report.columns();
  nlohmann::ordered_json doc;
  doc["columns"] = cols;
  doc["video_count"] = report.per_video.size();
  auto& corpus = doc["corpus"] = nlohmann::ordered_json::object();
  const auto means = report.corpus();
  for (std::size_t c = 0; c < cols.size(); ++c) corpus[cols[c]] = detail::number_or_null(means[c]);
  auto& videos = doc["per_video"] = nlohmann::ordered_json::object();
  for (const auto& [id, m] : report.per_video) {
    auto& entry = videos[id] = nlohmann::ordered_json::object();
    const auto r = report.row(m);
    for (std::size_t c = 0; c < cols.size(); ++c) entry[cols[c]] = detail::number_or_null(r[c]);
  }
  return doc;
}

/// One row per video (sorted by id) followed by a "corpus" row.
inline std::string to_csv(const MetricReport& report) {
  const auto cols = report.columns();
  std::string out = "video_id";
  for (const auto& c : cols) out += "," + c;
  out += "\n";
  auto emit = [&](const std::string& id, const std::vector<double>& r) {
    out += id;
    for (double v : r) out += "," + detail::csv_number(v);
    out += "\n";
  };
  for (const auto& [id, m] : report.per_video) emit(id, report.row(m));
  emit("corpus", report.corpus());
  return out;
}

}  // namespace bisum
