#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "bisum/io.hpp"
#include "bisum/pipeline.hpp"

using namespace bisum;

namespace {

const std::string kData = BISUM_TEST_DATA;

std::vector<AnnotationRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return ingest(in, "mem.jsonl");
}

std::string expect_parse_error(const std::string& text, std::size_t line, const std::string& field) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line);
    EXPECT_EQ(e.field(), field);
    return e.what();
  }
  ADD_FAILURE() << "no ParseError for: " << text;
  return {};
}

AnnotationRecord record(std::int64_t qid, std::string vid, std::vector<Interval> windows,
                        std::vector<std::vector<int>> scores, double duration = 150) {
  AnnotationRecord r;
  r.qid = qid;
  r.query = "query " + std::to_string(qid);
  r.vid = std::move(vid);
  r.source_duration_s = duration;
  r.relevant_windows = std::move(windows);
  r.clip_scores = std::move(scores);
  return r;
}

std::vector<std::vector<int>> rows(const std::vector<int>& s) {
  std::vector<std::vector<int>> out;
  for (int v : s) out.push_back({v, v});
  return out;
}

BidsTriplet triplet_for(std::vector<double> scores, std::vector<Interval> summary, std::string id = "v") {
  ClipTimeline t = ClipTimeline::from_scores(std::move(scores));
  const double d = t.video_duration_s();
  return BidsTriplet{id, "text", std::move(t), VMSummary{std::move(summary), 0.15}, Split::train, 1, id, d,
                     {WindowMapping{0, 0, d}}};
}

const char* kGood =
    R"({"qid": 7, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[0, 4]], "saliency_scores": [[1, 2], [3, 4]]})";

}  // namespace

TEST(Ingest, ParsesValidRecordAndSkipsBlankLines) {
  const auto r = parse(std::string("\n") + kGood + "\n\n");
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].qid, 7);
  EXPECT_EQ(r[0].clip_scores, (std::vector<std::vector<int>>{{1, 2}, {3, 4}}));
  EXPECT_TRUE(parse("").empty());
}

TEST(Ingest, ErrorsNameLineFieldAndQid) {
  const std::string prefix = std::string(kGood) + "\n";
  auto msg = expect_parse_error(prefix + "{not json", 2, "");
  EXPECT_NE(msg.find("mem.jsonl:2"), std::string::npos);
  EXPECT_NE(msg.find("invalid JSON"), std::string::npos);

  msg = expect_parse_error(
      prefix + R"({"qid": 8, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[0, 4], [6, 30]], "saliency_scores": []})",
      2, "relevant_windows[1][1]");
  EXPECT_NE(msg.find("qid 8"), std::string::npos);

  expect_parse_error(R"({"qid": 9, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[1, 4]], "saliency_scores": [[1]]})",
                     1, "relevant_windows[0][0]");
  expect_parse_error(R"({"qid": 9, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[0, 4]], "saliency_scores": [[1], [5]]})",
                     1, "saliency_scores[1][0]");
  expect_parse_error(R"({"qid": 9, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[0, 4]], "saliency_scores": [[1]]})",
                     1, "saliency_scores");
  expect_parse_error(R"({"qid": 9, "query": "q", "vid": "v", "relevant_windows": [[0, 4]], "saliency_scores": [[1], [2]]})", 1,
                     "duration");
  expect_parse_error(R"({"qid": "9", "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[0, 4]], "saliency_scores": [[1], [2]]})",
                     1, "qid");
  expect_parse_error(R"({"qid": 9, "query": "q", "vid": "v", "duration": 20, "relevant_windows": [[4, 4]], "saliency_scores": []})",
                     1, "relevant_windows[0]");
}

TEST(Ingest, WindowMayEndAtOffGridDuration) {
  const auto r = parse(
      R"({"qid": 1, "query": "q", "vid": "v", "duration": 125, "relevant_windows": [[120, 125]], "saliency_scores": [[1], [2], [3]]})");
  const auto m = merge_windows(r[0]);
  EXPECT_DOUBLE_EQ(m.timeline.video_duration_s(), 5.0);
  EXPECT_EQ(m.timeline.size(), 3u);
}

TEST(Ingest, MissingFileIsIoError) {
  try {
    ingest(kData + "/fixtures/annotations/does_not_exist.jsonl");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_EQ(e.op(), IoError::Op::read);
    EXPECT_NE(std::string(e.what()).find("does_not_exist.jsonl"), std::string::npos);
  }
}

TEST(MergeWindows, ConcatenatesAndMapsBack) {
  const auto m = merge_windows(record(1, "v", {{4, 8}, {12, 16}}, rows({1, 2, 3, 4})));
  EXPECT_DOUBLE_EQ(m.timeline.video_duration_s(), 8.0);
  EXPECT_EQ(m.timeline.scores(), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(source_time(m.window_map, 4.0), 12.0);
  EXPECT_DOUBLE_EQ(source_time(m.window_map, 1.0), 5.0);
  EXPECT_EQ(source_clip_ids(m.window_map, 2.0), (std::vector<std::size_t>{2, 3, 6, 7}));
}

TEST(MergeWindows, OverlappingAndTouchingWindowsCoalesce) {
  const auto m = merge_windows(record(1, "v", {{20, 40}, {30, 50}}, rows(std::vector<int>(15, 1))));
  EXPECT_DOUBLE_EQ(m.timeline.video_duration_s(), 30.0);
  ASSERT_EQ(m.window_map.size(), 1u);
  const auto t = merge_windows(record(2, "v", {{0, 4}, {4, 8}}, rows({1, 2, 3, 4})));
  EXPECT_EQ(t.window_map.size(), 1u);
}

TEST(MergeWindows, AveragesAnnotators) {
  const auto m = merge_windows(record(1, "v", {{0, 4}}, {{1, 2, 4}, {0, 0, 1}}));
  EXPECT_NEAR(m.timeline.scores()[0], 7.0 / 3.0, 1e-12);
  EXPECT_NEAR(m.timeline.scores()[1], 1.0 / 3.0, 1e-12);
}

TEST(BuildDataset, ShortFragmentIsDroppedButVideoKept) {
  const auto ds = build_dataset(std::vector{record(1, "v", {{0, 20}}, rows({1, 1, 3, 2, 2, 2, 2, 1, 1, 1}))});
  ASSERT_EQ(ds.triplets.size(), 1u);
  ASSERT_EQ(ds.triplets[0].vm_summary.intervals.size(), 1u);
  EXPECT_DOUBLE_EQ(ds.triplets[0].vm_summary.intervals[0].start_s, 4.0);
  EXPECT_DOUBLE_EQ(ds.triplets[0].vm_summary.intervals[0].end_s, 6.0);
}

TEST(BuildDataset, LowCoverageAndDuplicatesAreRejectedWithReasons) {
  const std::vector recs{record(1, "v", {{0, 20}}, rows({3, 1, 1, 1, 3, 1, 1, 1, 1, 1})),
                         record(2, "w", {{0, 20}}, rows({1, 1, 3, 2, 2, 2, 2, 1, 1, 1})),
                         record(2, "w", {{0, 20}}, rows({1, 1, 3, 2, 2, 2, 2, 1, 1, 1}))};
  const auto ds = build_dataset(recs);
  EXPECT_EQ(ds.triplets.size(), 1u);
  ASSERT_EQ(ds.rejections.size(), 2u);
  EXPECT_EQ(ds.rejections[0].qid, 1);
  EXPECT_EQ(ds.rejections[0].reason, "low_coverage");
  EXPECT_EQ(ds.rejections[1].reason, "duplicate_qid");
  for (const auto& r : ds.rejections) EXPECT_FALSE(r.detail.empty());
}

TEST(BuildDataset, RejectsBadOptions) {
  BuildOptions o;
  o.budget_ratio = 0.0;
  EXPECT_THROW(build_dataset(std::vector<AnnotationRecord>{}, o), InvalidInput);
  o.budget_ratio = 0.15;
  o.splits = {0.5, 0.5, 0.5};
  EXPECT_THROW(build_dataset(std::vector<AnnotationRecord>{}, o), InvalidInput);
}

TEST(Splits, DeterministicAndRoughlyProportional) {
  std::map<Split, int> count;
  for (int i = 0; i < 20000; ++i) {
    const auto s = assign_split("video_" + std::to_string(i), {}, 3);
    EXPECT_EQ(s, assign_split("video_" + std::to_string(i), {}, 3));
    ++count[s];
  }
  EXPECT_NEAR(count[Split::train] / 20000.0, 0.72, 0.02);
  EXPECT_NEAR(count[Split::validation] / 20000.0, 0.08, 0.01);
  EXPECT_NEAR(count[Split::test] / 20000.0, 0.20, 0.02);
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Splits, NoSourceVideoLeaksAcrossSplits) {
  std::mt19937 gen(10);
  for (int corpus = 0; corpus < 1000; ++corpus) {
    std::vector<AnnotationRecord> recs;
    const int videos = 1 + static_cast<int>(gen() % 8);
    const int records = 1 + static_cast<int>(gen() % 20);
    for (int q = 0; q < records; ++q) {
      const int clips = 10 + static_cast<int>(gen() % 20);
      std::vector<int> s(clips);
      for (auto& v : s) v = static_cast<int>(gen() % 5);
      recs.push_back(record(q, "vid" + std::to_string(gen() % videos), {{0, 2.0 * clips}}, rows(s), 2.0 * clips));
    }
    BuildOptions o;
    o.seed = gen();
    const auto ds = build_dataset(recs, o);
    std::map<std::string, Split> seen;
    for (const auto& t : ds.triplets) {
      const auto [it, inserted] = seen.emplace(t.source_vid, t.split);
      ASSERT_EQ(it->second, t.split) << "corpus " << corpus << " vid " << t.source_vid;
    }
    EXPECT_EQ(ds.triplets.size() + ds.rejections.size(), recs.size());
  }
}

TEST(Stats, ProportionAndHistograms) {
  std::vector<BidsTriplet> ts;
  ts.push_back(triplet_for(std::vector<double>(20, 1.0), {{10, 16}}, "a"));  // 40 s, 6 s summary
  ts.push_back(triplet_for(std::vector<double>(10, 1.0), {{0, 2}}, "b"));    // 20 s, 2 s summary
  ts[1].split = Split::test;
  ts[1].tm_summary = "three word query";
  const auto s = compute_stats(ts);
  EXPECT_EQ(s.overall.video_count, 2u);
  EXPECT_DOUBLE_EQ(s.per_split.at(Split::train).avg_vm_proportion_pct, 15.0);
  EXPECT_DOUBLE_EQ(s.per_split.at(Split::test).avg_vm_proportion_pct, 10.0);
  EXPECT_DOUBLE_EQ(s.overall.avg_vm_proportion_pct, 12.5);
  EXPECT_DOUBLE_EQ(s.overall.avg_video_length_s, 30.0);
  EXPECT_DOUBLE_EQ(s.overall.avg_tm_words, 2.0);
  EXPECT_EQ(s.per_split.at(Split::validation).video_count, 0u);
  EXPECT_EQ(s.proportion.counts.back(), 1u);  // 15% lands in the closed last bin
  EXPECT_EQ(s.proportion.counts[5], 1u);
  // Midpoints: 13/40 = 32.5% and 1/20 = 5%.
  EXPECT_EQ(s.position.counts[6], 1u);
  EXPECT_EQ(s.position.counts[1], 1u);
  EXPECT_THROW(compute_stats(std::vector<BidsTriplet>{}), InvalidInput);

  const auto back = stats_from_json(nlohmann::json::parse(stats_json(s).dump()));
  EXPECT_EQ(stats_json(back).dump(), stats_json(s).dump());
  EXPECT_THROW(stats_from_json(nlohmann::json::parse(R"({"kind": "other"})")), InvalidInput);
  EXPECT_NE(stats_csv(s).find("\nall,2,"), std::string::npos);
  EXPECT_EQ(histogram_csv(s.proportion).substr(0, 24), "bin_start,bin_end,count\n");
}

TEST(Stats, WordCount) {
  EXPECT_EQ(word_count(""), 0u);
  EXPECT_EQ(word_count("  a  b\tc\n"), 3u);
}

TEST(Preservation, TopClipSelectionMaximizesRho) {
  std::mt19937 gen(14);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 6 + gen() % 7;
    std::vector<double> s(n);
    for (auto& v : s) v = static_cast<double>(gen() % 100);
    const std::size_t m = 1 + gen() % (n - 1);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return s[a] > s[b]; });

    auto rho_of = [&](const std::vector<std::size_t>& clips) {
      std::vector<std::size_t> sorted = clips;
      std::sort(sorted.begin(), sorted.end());
      std::vector<Interval> iv;
      for (auto c : sorted) iv.push_back({2.0 * c, 2.0 * c + 2.0});
      return validate_saliency_preservation(std::vector{triplet_for(s, iv)}, 1.0).mean_rho;
    };
    const double top = rho_of({order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m)});

    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), true);
    do {
      std::vector<std::size_t> clips;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) clips.push_back(i);
      const double r = rho_of(clips);
      if (!std::isnan(r)) {
        ASSERT_LE(r, top + 1e-12);
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
}

TEST(Preservation, RandomSelectionIsNearZero) {
  std::mt19937 gen(15);
  std::vector<BidsTriplet> ts;
  for (int v = 0; v < 300; ++v) {
    const std::size_t n = 20;
    std::vector<double> s(n);
    for (auto& x : s) x = static_cast<double>(gen() % 9);
    std::vector<Interval> iv;
    for (std::size_t c = 0; c < n; ++c)
      if (gen() % 5 == 0) iv.push_back({2.0 * c, 2.0 * c + 2.0});
    ts.push_back(triplet_for(s, iv, "v" + std::to_string(v)));
  }
  const auto r = validate_saliency_preservation(ts, 1.0);
  EXPECT_NEAR(r.mean_rho, 0.0, 0.1);
  EXPECT_EQ(r.per_video.size(), ts.size());
}

TEST(Preservation, ConstantSaliencyIsExcluded) {
  const auto r = validate_saliency_preservation(
      std::vector{triplet_for({1, 1, 1, 1}, {{0, 2}}, "flat"), triplet_for({1, 4, 2, 0}, {{2, 4}}, "peak")}, 1.0);
  EXPECT_EQ(r.excluded, 1u);
  EXPECT_TRUE(std::isnan(r.per_video[0].second));
  EXPECT_TRUE(std::isnan(r.p_values[0]));
  EXPECT_GT(r.mean_rho, 0.5);
  EXPECT_DOUBLE_EQ(r.mean_p_value, r.p_values[1]);
}

TEST(Golden, FixtureCorpusMatchesCommittedOutput) {
  const auto recs = ingest(kData + "/fixtures/annotations/corpus10.jsonl");
  const auto ds = build_dataset(recs);
  EXPECT_EQ(triplets_jsonl(ds.triplets), read_file(kData + "/golden/build/triplets.jsonl"));
  EXPECT_EQ(rejections_jsonl(ds.rejections), read_file(kData + "/golden/build/rejections.jsonl"));
  EXPECT_EQ(stats_json(compute_stats(ds.triplets)).dump(2) + "\n", read_file(kData + "/golden/build/stats.json"));
}
