#include <gtest/gtest.h>

#include <random>

#include "metrics_oracle.hpp"
#include "rinktrack/errors.hpp"
#include "rinktrack/metrics.hpp"

using namespace rinktrack;

namespace {

TrackOutput relabel(TrackOutput t, int offset) {
  for (auto& r : t.rows) r.track_id = 1000 - r.track_id * 7 + offset;
  return t;
}

// Random scene: up to 6 gt ids on separated lanes; predictions jitter the
// boxes, swap ids, drop rows and add clutter.
std::pair<TrackOutput, TrackOutput> random_scene(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nid(1, 6), npid(1, 6), frames(3, 12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int ng = nid(rng), np = npid(rng), nf = frames(rng);
  std::vector<int> label(ng);
  for (auto& l : label) l = static_cast<int>(rng() % np);
  TrackOutput gt, pred;
  for (int f = 1; f <= nf; ++f) {
    std::vector<int> used;
    for (int g = 0; g < ng; ++g) {
      if (u(rng) < 0.1) continue;
      const BoundingBox b{200.0 * g + f, 10.0, 30.0, 60.0};
      gt.rows.push_back({f, g, b, 1.0});
      if (u(rng) < 0.15) continue;
      if (u(rng) < 0.2) label[g] = static_cast<int>(rng() % np);
      if (std::find(used.begin(), used.end(), label[g]) != used.end()) continue;
      used.push_back(label[g]);
      const double jitter = u(rng) < 0.1 ? 25.0 : 2.0 * u(rng);
      pred.rows.push_back({f, label[g], {b.x + jitter, b.y, b.wd, b.ht}, 1.0});
    }
    if (u(rng) < 0.2) {
      const int id = static_cast<int>(rng() % np);
      if (std::find(used.begin(), used.end(), id) == used.end()) {
        pred.rows.push_back({f, id, {5000.0, 10.0, 30.0, 60.0}, 1.0});
      }
    }
  }
  return {gt, pred};
}

}  // namespace

TEST(Iou, WorkedExamples) {
  const BoundingBox a{0, 0, 1, 1};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, {5, 5, 1, 1}), 0.0);
  EXPECT_NEAR(iou(a, {0.5, 0, 1, 1}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(iou({0, 0, 0, 0}, {0, 0, 0, 0}), 0.0);
}

TEST(Mota, WorkedExamples) {
  MotTotals t;
  t.gt = 100;
  t.fn = 5;
  t.fp = 3;
  t.idsw = 2;
  EXPECT_NEAR(mota(t), 0.90, 1e-15);
  t.fn = t.fp = t.idsw = 0;
  EXPECT_EQ(mota(t), 1.0);
  t.fn = 80;
  t.fp = 40;
  EXPECT_LT(mota(t), 0.0);
  EXPECT_THROW(mota(MotTotals{}), UndefinedMetric);
}

TEST(IdScores, WorkedExample) {
  IdScores s;
  s.idtp = 8;
  s.idfp = 2;
  s.idfn = 2;
  s.finalize();
  EXPECT_NEAR(s.idf1, 0.8, 1e-15);
  EXPECT_NEAR(s.idp, 0.8, 1e-15);
  EXPECT_NEAR(s.idr, 0.8, 1e-15);
}

TEST(MatchFrame, WorkedExamples) {
  const std::vector<TrackRow> gt{{1, 0, {0, 0, 10, 10}, 1}, {1, 1, {50, 0, 10, 10}, 1}};
  CorrespondenceState st;
  FrameCorrespondence fc = match_frame(gt, gt, st);
  EXPECT_EQ(fc.matched.size(), 2u);
  EXPECT_TRUE(fc.unmatched_gt.empty());
  EXPECT_TRUE(fc.unmatched_pred.empty());

  CorrespondenceState st2;
  fc = match_frame(gt, {}, st2);
  EXPECT_EQ(fc.unmatched_gt.size(), 2u);
  EXPECT_TRUE(fc.unmatched_pred.empty());

  std::vector<TrackRow> pred = gt;
  pred[0].track_id = 9;
  fc = match_frame(gt, pred, st);
  EXPECT_EQ(fc.idsw, 1);
}

TEST(MatchFrame, PersistsOverBetterOverlap) {
  CorrespondenceState st{{0, 5}};
  const std::vector<TrackRow> gt{{1, 0, {0, 0, 10, 10}, 1}};
  // id 5 still overlaps enough, so it keeps the match although id 6 is exact.
  const std::vector<TrackRow> pred{{1, 6, {0, 0, 10, 10}, 1}, {1, 5, {1, 0, 10, 10}, 1}};
  const FrameCorrespondence fc = match_frame(gt, pred, st);
  ASSERT_EQ(fc.matched.size(), 1u);
  EXPECT_EQ(fc.matched[0], (std::pair<int, int>{0, 5}));
  EXPECT_EQ(fc.idsw, 0);
}

TEST(Metrics, PerfectTracking) {
  const auto [gt, pred] = testutil::swap_and_miss_scene();
  const std::vector<EvalInput> in{{"s", gt, gt}};
  const MetricsReport r = evaluate(in);
  EXPECT_EQ(r.mota, 1.0);
  EXPECT_EQ(r.idf1, 1.0);
  EXPECT_EQ(r.idsw, 0);
}

TEST(Metrics, SwapAndMissAgainstHandCount) {
  const auto [gt, pred] = testutil::swap_and_miss_scene();
  const MotTotals t = clear_mot(gt, pred);
  EXPECT_EQ(t.gt, 30);
  EXPECT_EQ(t.fn, 1);
  EXPECT_EQ(t.fp, 0);
  EXPECT_EQ(t.idsw, 2);
  EXPECT_NEAR(mota(t), 0.9, 1e-15);
  const IdScores s = idf1(gt, pred);
  EXPECT_EQ(s.idtp, 19);
  EXPECT_NEAR(s.idf1, 38.0 / 59.0, 1e-15);
}

TEST(Metrics, SwapAndMissAgainstOracle) {
  const auto [gt, pred] = testutil::swap_and_miss_scene();
  const auto om = testutil::oracle_clear_mot(gt, pred);
  const auto oi = testutil::oracle_idf1(gt, pred);
  const MotTotals t = clear_mot(gt, pred);
  EXPECT_EQ(t.idsw, om.idsw);
  EXPECT_EQ(mota(t), om.mota());
  EXPECT_EQ(idf1(gt, pred).idf1, oi.idf1());
}

TEST(Metrics, RandomScenesAgainstOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 400; ++t) {
    const auto [gt, pred] = random_scene(rng);
    if (gt.rows.empty()) continue;
    const auto om = testutil::oracle_clear_mot(gt, pred);
    const MotTotals m = clear_mot(gt, pred);
    EXPECT_EQ(m.gt, om.gt);
    EXPECT_EQ(m.fn, om.fn);
    EXPECT_EQ(m.fp, om.fp);
    EXPECT_EQ(m.idsw, om.idsw);
    const auto oi = testutil::oracle_idf1(gt, pred);
    const IdScores s = idf1(gt, pred);
    EXPECT_EQ(s.idtp, oi.idtp);
    EXPECT_NEAR(s.idf1, oi.idf1(), 1e-15);
  }
}

TEST(Metrics, FrameCountsBalance) {
  std::mt19937_64 rng(32);
  for (int t = 0; t < 100; ++t) {
    const auto [gt, pred] = random_scene(rng);
    CorrespondenceState st;
    for (int f = 1; f <= 12; ++f) {
      std::vector<TrackRow> g, p;
      for (const auto& r : gt.rows) if (r.frame_id == f) g.push_back(r);
      for (const auto& r : pred.rows) if (r.frame_id == f) p.push_back(r);
      const FrameCorrespondence fc = match_frame(g, p, st);
      EXPECT_EQ(fc.matched.size() + fc.unmatched_gt.size(), g.size());
      EXPECT_EQ(fc.matched.size() + fc.unmatched_pred.size(), p.size());
    }
  }
}

TEST(Metrics, Idf1InvariantUnderRelabel) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 50; ++t) {
    const auto [gt, pred] = random_scene(rng);
    if (gt.rows.empty()) continue;
    EXPECT_EQ(idf1(gt, pred).idf1, idf1(gt, relabel(pred, 3)).idf1);
  }
}

TEST(Metrics, EvaluateSumsCounts) {
  std::mt19937_64 rng(34);
  auto [g1, p1] = random_scene(rng);
  auto [g2, p2] = random_scene(rng);
  while (g1.rows.empty()) std::tie(g1, p1) = random_scene(rng);
  while (g2.rows.empty()) std::tie(g2, p2) = random_scene(rng);
  const std::vector<EvalInput> in{{"a", g1, p1}, {"b", g2, p2}};
  const MetricsReport r = evaluate(in);
  const MotTotals a = clear_mot(g1, p1), b = clear_mot(g2, p2);
  EXPECT_EQ(r.gt, a.gt + b.gt);
  EXPECT_EQ(r.idsw, a.idsw + b.idsw);
  EXPECT_EQ(r.fp, a.fp + b.fp);
  const IdScores ia = idf1(g1, p1), ib = idf1(g2, p2);
  const double tp = double(ia.idtp + ib.idtp);
  EXPECT_NEAR(r.idf1, 2 * tp / (2 * tp + ia.idfp + ib.idfp + ia.idfn + ib.idfn), 1e-15);
  ASSERT_EQ(r.per_sequence.size(), 2u);
  EXPECT_EQ(r.per_sequence[1].name, "b");
}
