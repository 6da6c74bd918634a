#pragma once

// The `bisum` command line: build-dataset, extract, evaluate, train-toy, plot.
//
// Exit codes: 0 success, 1 usage, 2 input validation, 3 runtime failure.
// `--config FILE` reads `key=value` lines (long option names without dashes);
// flags given on the command line take precedence.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "bisum/error.hpp"
#include "bisum/io.hpp"
#include "bisum/pipeline.hpp"
#include "bisum/report.hpp"
#include "bisum/summarizer.hpp"
#include "bisum/svg_plot.hpp"
#include "bisum/training.hpp"

namespace bisum::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kInputError = 2, kRuntimeError = 3 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-video score sequence read from a prediction, ground-truth or similarity file.
struct ScoreItem {
  std::string id;
  std::vector<double> scores;
  std::optional<double> duration_s;
  double clip_duration_s = kDefaultClipDuration;
  std::optional<std::vector<Interval>> intervals;
};

namespace detail {

inline std::size_t line_of_byte(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline std::vector<double> number_array(const nlohmann::json& j, const std::string& source, std::size_t line,
                                        const std::string& field) {
  if (!j.is_array()) throw ParseError(source, line, field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number() || !std::isfinite(j[i].get<double>()))
      throw ParseError(source, line, fmt::format("{}[{}]", field, i), "expected a finite number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

inline double number_field(const nlohmann::json& j, const std::string& source, std::size_t line, const char* key) {
  if (!j[key].is_number()) throw ParseError(source, line, key, "expected a number");
  return j[key].get<double>();
}

inline ScoreItem item_from_object(const nlohmann::json& j, const std::string& source, std::size_t line) {
  if (!j.is_object()) throw ParseError(source, line, "", "expected a JSON object");
  if (!j.contains("video_id") || !j["video_id"].is_string())
    throw ParseError(source, line, "video_id", "missing or not a string");
  ScoreItem item;
  item.id = j["video_id"].get<std::string>();
  const char* key = nullptr;
  for (const char* k : {"saliency", "scores", "similarity"})
    if (j.contains(k)) {
      key = k;
      break;
    }
  if (!key) throw ParseError(source, line, "saliency", "missing score array (saliency, scores or similarity)");
  item.scores = number_array(j[key], source, line, key);
  if (j.contains("duration_s")) item.duration_s = number_field(j, source, line, "duration_s");
  if (j.contains("clip_duration_s"))
    item.clip_duration_s = number_field(j, source, line, "clip_duration_s");
  if (j.contains("vm_intervals")) {
    const auto& iv = j["vm_intervals"];
    if (!iv.is_array()) throw ParseError(source, line, "vm_intervals", "expected an array of [start, end]");
    std::vector<Interval> intervals;
    for (std::size_t i = 0; i < iv.size(); ++i) {
      const auto pair = number_array(iv[i], source, line, fmt::format("vm_intervals[{}]", i));
      if (pair.size() != 2) throw ParseError(source, line, fmt::format("vm_intervals[{}]", i), "expected [start, end]");
      intervals.push_back({pair[0], pair[1]});
    }
    item.intervals = std::move(intervals);
  }
  return item;
}

}  // namespace detail

/// Accepted layouts: a JSON array of numbers (one timeline, id "0"); a JSON
/// array of number arrays (ids "0", "1", ...); a JSON object mapping id to
/// scores; or line-delimited objects with `video_id` and `saliency` (or
/// `scores` / `similarity`), optionally `duration_s`, `clip_duration_s` and
/// `vm_intervals`. Triplet files written by build-dataset use the last form.
inline std::vector<ScoreItem> parse_score_items(const std::string& text, const std::string& source) {
  std::vector<ScoreItem> items;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return items;

  nlohmann::json whole;
  bool parsed = false;
  try {
    whole = nlohmann::json::parse(text);
    parsed = true;
  } catch (const nlohmann::json::parse_error& e) {
    if (text[first] == '[')
      throw ParseError(source, detail::line_of_byte(text, e.byte == 0 ? 0 : e.byte - 1), "", "invalid JSON");
  }

  if (parsed && whole.is_array()) {
    if (!whole.empty() && whole[0].is_array()) {
      for (std::size_t i = 0; i < whole.size(); ++i)
        items.push_back({std::to_string(i), detail::number_array(whole[i], source, 0, fmt::format("[{}]", i)), {}, kDefaultClipDuration, {}});
    } else {
      items.push_back({"0", detail::number_array(whole, source, 0, ""), {}, kDefaultClipDuration, {}});
    }
  } else if (parsed && whole.is_object() && !whole.contains("video_id")) {
    for (const auto& [id, scores] : whole.items())
      items.push_back({id, detail::number_array(scores, source, 0, id), {}, kDefaultClipDuration, {}});
  } else {
    std::istringstream in(text);
    std::string line_text;
    std::size_t line = 0;
    while (std::getline(in, line_text)) {
      ++line;
      if (line_text.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line_text);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(source, line, "", fmt::format("invalid JSON at byte {}", e.byte));
      }
      items.push_back(detail::item_from_object(j, source, line));
    }
  }
  std::set<std::string> seen;
  for (const auto& it : items)
    if (!seen.insert(it.id).second) throw ParseError(source, 0, "video_id", "duplicate id '" + it.id + "'");
  return items;
}

inline std::vector<ScoreItem> read_score_items(const std::string& path) {
  return parse_score_items(read_file(path), path);
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in(read_file(path));
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto t = trim(text);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || trim(t.substr(0, eq)).empty())
      throw ParseError(path, line, "", "expected key=value");
    out.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return out;
}

// Moves --config out of `args` and splices its entries in right after the
// subcommand name, ahead of the user's own flags (the last occurrence wins).
inline std::vector<std::string> apply_config(std::vector<std::string> args, const std::set<std::string>& subcommands) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config requires a file argument");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  const auto entries = read_config(*path);
  const auto sub = std::find_if(args.begin(), args.end(), [&](const std::string& a) { return subcommands.count(a) > 0; });
  if (sub == args.end()) return args;
  std::vector<std::string> injected;
  for (const auto& [k, v] : entries) {
    injected.push_back("--" + k);
    if (v != "true") injected.push_back(v);
  }
  args.insert(sub + 1, injected.begin(), injected.end());
  return args;
}

inline void check_budget(double budget) {
  if (!(budget > 0.0 && budget <= 1.0)) throw UsageError(fmt::format("--budget must be in (0, 1], got {}", budget));
}

inline SplitSpec parse_splits(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(trim(tok), &used));
      if (used != trim(tok).size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError("--splits expects three comma-separated fractions, got '" + s + "'");
    }
  }
  if (parts.size() != 3) throw UsageError("--splits expects three comma-separated fractions, got '" + s + "'");
  SplitSpec spec{parts[0], parts[1], parts[2]};
  try {
    spec.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(std::string("--splits: ") + e.what());
  }
  return spec;
}

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError(dir, IoError::Op::write, ec ? ec.message() : "not a directory");
}

inline std::string frames_string(const FrameSelection& f) {
  std::string s(f.bits.size(), '0');
  for (std::size_t i = 0; i < f.bits.size(); ++i)
    if (f.bits[i]) s[i] = '1';
  return s;
}

inline std::string extension(const std::string& path) { return std::filesystem::path(path).extension().string(); }

}  // namespace detail

struct BuildDatasetArgs {
  std::string annotations;
  std::string out_dir;
  double budget = kDefaultBudgetRatio;
  std::uint64_t seed = 0;
  std::string splits = "0.72,0.08,0.20";
};

inline int cmd_build_dataset(const BuildDatasetArgs& a, std::ostream& out) {
  detail::check_budget(a.budget);
  BuildOptions opt;
  opt.budget_ratio = a.budget;
  opt.seed = a.seed;
  opt.splits = detail::parse_splits(a.splits);
  const auto records = ingest(a.annotations);
  const auto dataset = build_dataset(records, opt);

  detail::ensure_directory(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_file_atomic(dir / "triplets.jsonl", triplets_jsonl(dataset.triplets));
  write_file_atomic(dir / "rejections.jsonl", rejections_jsonl(dataset.rejections));
  if (!dataset.triplets.empty()) {
    const auto stats = compute_stats(dataset.triplets);
    write_file_atomic(dir / "stats.json", stats_json(stats).dump(2) + "\n");
    write_file_atomic(dir / "stats.csv", stats_csv(stats));
    write_file_atomic(dir / "vm_proportion_histogram.csv", histogram_csv(stats.proportion));
    write_file_atomic(dir / "vm_position_histogram.csv", histogram_csv(stats.position));

    const auto pres = validate_saliency_preservation(dataset.triplets);
    nlohmann::ordered_json pj;
    pj["mean_rho"] = bisum::detail::number_or_null(pres.mean_rho);
    pj["p_value"] = bisum::detail::number_or_null(pres.mean_p_value);
    pj["significant"] = pres.significant;
    pj["excluded"] = pres.excluded;
    auto& per = pj["per_video"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < pres.per_video.size(); ++i)
      per[pres.per_video[i].first] = {{"rho", bisum::detail::number_or_null(pres.per_video[i].second)},
                                      {"p_value", bisum::detail::number_or_null(pres.p_values[i])}};
    write_file_atomic(dir / "preservation.json", pj.dump(2) + "\n");
  }
  std::map<Split, std::size_t> counts;
  for (const auto& t : dataset.triplets) ++counts[t.split];
  out << fmt::format("{} records, {} triplets (train {}, validation {}, test {}), {} rejected\n", records.size(),
                     dataset.triplets.size(), counts[Split::train], counts[Split::validation], counts[Split::test],
                     dataset.rejections.size());
  return kOk;
}

struct ExtractArgs {
  std::string scores;
  std::string out_path;
  double budget = kDefaultBudgetRatio;
  double fps = kDefaultFps;
};

inline int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  detail::check_budget(a.budget);
  if (!(a.fps > 0.0)) throw UsageError("--fps must be positive");
  const auto items = read_score_items(a.scores);
  if (items.empty()) throw InvalidInput(a.scores + ": no score sequences");
  std::string text;
  for (const auto& it : items) {
    if (it.scores.empty()) throw InvalidInput(a.scores + ": video '" + it.id + "' has an empty score array");
    const double duration = it.duration_s.value_or(static_cast<double>(it.scores.size()) * it.clip_duration_s);
    const ClipTimeline timeline(it.scores, duration, it.clip_duration_s);
    const auto summary = extract_vm_summary(timeline, a.budget);
    nlohmann::ordered_json j;
    j["video_id"] = it.id;
    j["duration_s"] = duration;
    j["budget_ratio"] = a.budget;
    auto& iv = j["intervals"] = nlohmann::ordered_json::array();
    for (const auto& i : summary.intervals) iv.push_back({i.start_s, i.end_s});
    j["total_s"] = summary.total_duration();
    j["fps"] = a.fps;
    j["frames"] = detail::frames_string(rasterize(summary.intervals, a.fps, duration));
    text += j.dump() + "\n";
  }
  write_file_atomic(a.out_path, text);
  out << fmt::format("extracted {} summaries\n", items.size());
  return kOk;
}

struct EvaluateArgs {
  std::string pred;
  std::string gt;
  std::optional<std::string> tm_similarity;
  std::string out_path;
  std::string format = "json";
  double budget = kDefaultBudgetRatio;
  double fps = kDefaultFps;
};

inline MetricReport evaluate_files(const EvaluateArgs& a) {
  const auto pred = read_score_items(a.pred);
  const auto gt = read_score_items(a.gt);
  std::map<std::string, const ScoreItem*> pred_by_id, tm_by_id;
  for (const auto& p : pred) pred_by_id[p.id] = &p;
  std::vector<ScoreItem> tm;
  if (a.tm_similarity) {
    tm = read_score_items(*a.tm_similarity);
    for (const auto& t : tm) tm_by_id[t.id] = &t;
  }

  std::set<std::string> gt_ids;
  for (const auto& g : gt) gt_ids.insert(g.id);
  std::vector<std::string> problems;
  auto missing = [&](const std::string& what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    std::string list;
    for (const auto& id : ids) list += (list.empty() ? "" : ", ") + id;
    problems.push_back(what + ": " + list);
  };
  std::vector<std::string> no_pred, no_gt, no_tm;
  for (const auto& g : gt) {
    if (!pred_by_id.count(g.id)) no_pred.push_back(g.id);
    if (a.tm_similarity && !tm_by_id.count(g.id)) no_tm.push_back(g.id);
  }
  for (const auto& p : pred)
    if (!gt_ids.count(p.id)) no_gt.push_back(p.id);
  missing("missing from predictions", no_pred);
  missing("missing from ground truth", no_gt);
  missing("missing from similarity", no_tm);
  if (!problems.empty()) {
    std::string msg = "video ids do not match";
    for (const auto& p : problems) msg += "; " + p;
    throw InvalidInput(msg);
  }
  if (gt.empty()) throw InvalidInput(a.gt + ": no videos");

  MetricReport report;
  EvalOptions opt{a.budget, a.fps};
  for (const auto& g : gt) {
    EvalInput in;
    in.pred = pred_by_id.at(g.id)->scores;
    in.gt = g.scores;
    in.clip_duration_s = g.clip_duration_s;
    in.video_duration_s = g.duration_s;
    in.gt_intervals = g.intervals;
    if (a.tm_similarity) in.tm_similarity = tm_by_id.at(g.id)->scores;
    try {
      report.per_video[g.id] = evaluate_video(in, opt);
    } catch (const InvalidInput& e) {
      throw InvalidInput("video '" + g.id + "': " + e.what());
    }
  }
  return report;
}

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  detail::check_budget(a.budget);
  if (!(a.fps > 0.0)) throw UsageError("--fps must be positive");
  const auto report = evaluate_files(a);
  write_file_atomic(a.out_path, a.format == "csv" ? to_csv(report) : to_json(report).dump(2) + "\n");
  const auto cols = report.columns();
  const auto means = report.corpus();
  std::string line = fmt::format("{} videos", report.per_video.size());
  for (std::size_t c = 0; c < cols.size(); ++c) line += fmt::format(" {}={:.4f}", cols[c], means[c]);
  out << line << "\n";
  return kOk;
}

struct TrainToyArgs {
  std::string loss = "neuralndcg";
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
  std::string benchmark = "distorted";
  std::string out_dir;
  std::size_t videos = 100;
  std::size_t clips = 24;
  double learning_rate = 5e-3;
  std::size_t batch_size = 8;
  double temperature = 1.0;
};

inline int cmd_train_toy(const TrainToyArgs& a, std::ostream& out) {
  if (a.epochs < 1) throw UsageError("--epochs must be at least 1");
  if (a.videos < 2) throw UsageError("--videos must be at least 2");
  if (a.clips < 2) throw UsageError("--clips must be at least 2");
  if (a.batch_size < 1) throw UsageError("--batch-size must be at least 1");
  if (!(a.temperature > 0.0)) throw UsageError("--temperature must be positive");

  BenchmarkOptions bopt;
  bopt.distorted = a.benchmark == "distorted";
  const auto bench = make_distorted_benchmark(a.videos, a.clips, a.seed, bopt);
  EncoderConfig model;
  model.seed = a.seed;
  TrainConfig cfg;
  cfg.loss = a.loss == "mse" ? LossKind::mse : LossKind::neural_ndcg;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.learning_rate = a.learning_rate;
  cfg.batch_size = a.batch_size;
  cfg.ranking.temperature = a.temperature;
  const auto result = train(model, bench.train, bench.validation, cfg);
  const auto v = evaluate_scorer(result.params, bench.validation);
  const double smoothed = smoothed_fraction(result.params, bench.validation);

  detail::ensure_directory(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  write_file_atomic(dir / "checkpoint.json", checkpoint_json(result.params).dump() + "\n");
  write_file_atomic(dir / "history.csv", history_csv(result.history));
  nlohmann::ordered_json s;
  s["loss"] = to_string(cfg.loss);
  s["benchmark"] = a.benchmark;
  s["seed"] = a.seed;
  s["epochs"] = a.epochs;
  s["val_ndcg@15"] = bisum::detail::number_or_null(v.ndcg15);
  s["val_ndcg@all"] = bisum::detail::number_or_null(v.ndcg_all);
  s["val_kendall_tau"] = bisum::detail::number_or_null(v.kendall_tau);
  s["val_spearman_rho"] = bisum::detail::number_or_null(v.spearman_rho);
  s["val_smoothed_fraction"] = bisum::detail::number_or_null(smoothed);
  write_file_atomic(dir / "summary.json", s.dump(2) + "\n");
  out << fmt::format("loss={} seed={} val_ndcg@15={:.4f} val_ndcg@all={:.4f} tau={:.4f} rho={:.4f}\n",
                     to_string(cfg.loss), a.seed, v.ndcg15, v.ndcg_all, v.kendall_tau, v.spearman_rho);
  return kOk;
}

struct PlotArgs {
  std::optional<std::string> stats;
  std::optional<std::string> history;
  std::string out_path;
  std::string histogram = "proportion";
};

inline std::vector<svg::Series> read_history_series(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "epoch,train_loss,val_ndcg@15,val_ndcg@all")
    throw UsageError(path + ": not a training history file");
  std::vector<svg::Series> series{{"train_loss", {}, {}}, {"val_ndcg@15", {}, {}}, {"val_ndcg@all", {}, {}}};
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(detail::trim(tok), &used));
      } catch (const std::exception&) {
        throw ParseError(path, n, "", "expected a number, got '" + tok + "'");
      }
    }
    if (v.size() != 4) throw ParseError(path, n, "", "expected 4 columns");
    for (std::size_t k = 0; k < 3; ++k) {
      series[k].x.push_back(v[0]);
      series[k].y.push_back(v[k + 1]);
    }
  }
  return series;
}

inline int cmd_plot(const PlotArgs& a, std::ostream& out) {
  if (a.stats.has_value() == a.history.has_value()) throw UsageError("plot needs exactly one of --stats or --history");
  const auto ext = detail::extension(a.out_path);
  if (ext != ".svg" && ext != ".csv") throw UsageError("--out must end in .svg or .csv");

  std::string text;
  if (a.stats) {
    nlohmann::json doc;
    const auto raw = read_file(*a.stats);
    try {
      doc = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(*a.stats, detail::line_of_byte(raw, e.byte == 0 ? 0 : e.byte - 1), "", "invalid JSON");
    }
    DatasetStats stats;
    try {
      stats = stats_from_json(doc);
    } catch (const InvalidInput& e) {
      throw UsageError(*a.stats + ": " + e.what());
    }
    const bool position = a.histogram == "position";
    const Histogram& h = position ? stats.position : stats.proportion;
    if (ext == ".csv") {
      text = histogram_csv(h);
    } else {
      std::vector<svg::Bar> bars;
      std::size_t total = 0;
      for (auto c : h.counts) total += c;
      if (total > 0)
        for (std::size_t i = 0; i < h.counts.size(); ++i)
          bars.push_back({h.bin_start(i), h.bin_end(i), static_cast<double>(h.counts[i])});
      text = position ? svg::bar_chart("VM segment position", "position in video (%)", "segments", bars)
                      : svg::bar_chart("VM-Summary duration ratio", "VM proportion (%)", "videos", bars);
    }
  } else {
    const auto series = read_history_series(*a.history);
    if (ext == ".csv") {
      text = "series,x,y\n";
      for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) text += fmt::format("{},{},{}\n", s.name, s.x[i], s.y[i]);
    } else {
      text = svg::line_chart("Training history", "epoch", "value", series);
    }
  }
  write_file_atomic(a.out_path, text);
  out << "wrote " << a.out_path << "\n";
  return kOk;
}

namespace detail {

inline void report(std::ostream& err, bool color, const std::string& msg) {
  err << (color ? "\033[31merror\033[0m: " : "error: ") << msg << "\n";
}

}  // namespace detail

/// Runs one invocation. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool color = false) {
  CLI::App app{"Bimodal video summarization toolkit", "bisum"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", "bisum 0.1.0");
  app.add_option("--config", "key=value file providing defaults for the subcommand's flags");

  BuildDatasetArgs bd;
  auto* build = app.add_subcommand("build-dataset", "Build triplets, rejections and statistics from annotations");
  build->add_option("--annotations", bd.annotations, "Line-delimited JSON annotation file")->required();
  build->add_option("--out", bd.out_dir, "Output directory")->required();
  build->add_option("--budget", bd.budget, "Summary budget as a fraction of duration")->capture_default_str();
  build->add_option("--seed", bd.seed, "Split seed")->capture_default_str();
  build->add_option("--splits", bd.splits, "train,validation,test fractions")->capture_default_str();

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "Extract VM-Summaries from per-clip scores");
  extract->add_option("--scores", ex.scores, "Score file")->required();
  extract->add_option("--out", ex.out_path, "Output JSONL file")->required();
  extract->add_option("--budget", ex.budget, "Summary budget as a fraction of duration")->capture_default_str();
  extract->add_option("--fps", ex.fps, "Frame rate of the frame selection")->capture_default_str();

  EvaluateArgs ev;
  std::string tm_path;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against ground truth");
  evaluate->add_option("--pred", ev.pred, "Predicted saliency file")->required();
  evaluate->add_option("--gt", ev.gt, "Ground-truth saliency file")->required();
  auto* tm_opt = evaluate->add_option("--tm-similarity", tm_path, "Text-to-clip similarity file");
  evaluate->add_option("--out", ev.out_path, "Report file")->required();
  evaluate->add_option("--format", ev.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  evaluate->add_option("--budget", ev.budget, "Summary budget used for the F-score")->capture_default_str();
  evaluate->add_option("--fps", ev.fps, "Frame rate used for the F-score")->capture_default_str();

  TrainToyArgs tt;
  auto* train_toy = app.add_subcommand("train-toy", "Train the toy scorer on a synthetic benchmark");
  train_toy->add_option("--loss", tt.loss, "mse or neuralndcg")->check(CLI::IsMember({"mse", "neuralndcg"}))->capture_default_str();
  train_toy->add_option("--epochs", tt.epochs, "Training epochs")->capture_default_str();
  train_toy->add_option("--seed", tt.seed, "Seed for data, initialization and batching")->capture_default_str();
  train_toy->add_option("--benchmark", tt.benchmark, "distorted or control")
      ->check(CLI::IsMember({"distorted", "control"}))
      ->capture_default_str();
  train_toy->add_option("--out", tt.out_dir, "Output directory")->required();
  train_toy->add_option("--videos", tt.videos, "Number of synthetic videos")->capture_default_str();
  train_toy->add_option("--clips", tt.clips, "Clips per video")->capture_default_str();
  train_toy->add_option("--learning-rate", tt.learning_rate, "Adam step size")->capture_default_str();
  train_toy->add_option("--batch-size", tt.batch_size, "Videos per batch")->capture_default_str();
  train_toy->add_option("--temperature", tt.temperature, "Relaxed-sort temperature")->capture_default_str();

  PlotArgs pl;
  std::string stats_path, history_path;
  auto* plot = app.add_subcommand("plot", "Render dataset statistics or a training history");
  auto* stats_opt = plot->add_option("--stats", stats_path, "stats.json from build-dataset");
  auto* history_opt = plot->add_option("--history", history_path, "history.csv from train-toy");
  plot->add_option("--out", pl.out_path, "Output .svg or .csv")->required();
  plot->add_option("--histogram", pl.histogram, "proportion or position")
      ->check(CLI::IsMember({"proportion", "position"}))
      ->capture_default_str();

  try {
    auto argv = detail::apply_config(args, {"build-dataset", "extract", "evaluate", "train-toy", "plot"});
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
    if (build->parsed()) return cmd_build_dataset(bd, out);
    if (extract->parsed()) return cmd_extract(ex, out);
    if (evaluate->parsed()) {
      if (tm_opt->count() > 0) ev.tm_similarity = tm_path;
      return cmd_evaluate(ev, out);
    }
    if (train_toy->parsed()) return cmd_train_toy(tt, out);
    if (plot->parsed()) {
      if (stats_opt->count() > 0) pl.stats = stats_path;
      if (history_opt->count() > 0) pl.history = history_path;
      return cmd_plot(pl, out);
    }
    return kUsage;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kOk;
    }
    detail::report(err, color, e.what());
    err << "run 'bisum --help' for usage\n";
    return kUsage;
  } catch (const UsageError& e) {
    detail::report(err, color, e.what());
    return kUsage;
  } catch (const ParseError& e) {
    detail::report(err, color, e.what());
    return kInputError;
  } catch (const InvalidInput& e) {
    detail::report(err, color, e.what());
    return kInputError;
  } catch (const IoError& e) {
    detail::report(err, color, e.what());
    return e.op() == IoError::Op::read ? kInputError : kRuntimeError;
  } catch (const TrainingFailure& e) {
    detail::report(err, color, e.what());
    return kRuntimeError;
  } catch (const std::exception& e) {
    detail::report(err, color, e.what());
    return kRuntimeError;
  }
}

}  // namespace bisum::cli
