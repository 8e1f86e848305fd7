#include <gtest/gtest.h>

#include "airtrack/evaluation.hpp"
#include "helpers.hpp"

namespace airtrack {
namespace {

using namespace eval;

const BoundingBox kBox{0, 0, 10, 10};

TrackRecord track(std::int64_t id, std::int64_t from, std::int64_t to, BoundingBox box = kBox) {
  TrackRecord t;
  t.id = id;
  for (std::int64_t f = from; f < to; ++f) t.boxes[f] = box;
  return t;
}

TrackRecord shifted(TrackRecord t, double dx) {
  for (auto& [f, b] : t.boxes) b.x += dx;
  return t;
}

TEST(Eao, HandComputedSingleTrack) {
  const std::vector<TrackRecord> gt{track(1, 0, 4)};
  const std::vector<TrackRecord> pred{track(9, 0, 2)};
  for (IdMode mode : {IdMode::kOUID, IdMode::kAUID}) {
    const auto mapping = map_ids(gt, pred, 0.5, mode);
    EXPECT_EQ(overlap_curve(gt[0], pred, mapping), (std::vector<double>{1, 1, 0, 0}));
    EXPECT_DOUBLE_EQ(eao(gt, pred, 0.5, mode), 19.0 / 24.0);
  }
}

TEST(Eao, PerfectTrackerScoresOne) {
  Rng rng(1);
  std::vector<TrackRecord> gt;
  for (int i = 0; i < 5; ++i) {
    TrackRecord t;
    t.id = i + 1;
    const auto start = rng.uniform_int(0, 20);
    const auto len = rng.uniform_int(1, 40);
    for (std::int64_t f = start; f < start + len; ++f) {
      t.boxes[f] = {rng.uniform(0, 500), rng.uniform(0, 500), rng.uniform(5, 30), rng.uniform(5, 30)};
    }
    gt.push_back(t);
  }
  for (IdMode mode : {IdMode::kOUID, IdMode::kAUID}) {
    const auto mapping = map_ids(gt, gt, 0.5, mode);
    for (const auto& g : gt) {
      ASSERT_EQ(mapping.assignment.at(g.id).size(), 1u);
      EXPECT_EQ(mapping.assignment.at(g.id)[0].pred_id, g.id);
      for (double v : overlap_curve(g, gt, mapping)) EXPECT_EQ(v, 1.0);
    }
    EXPECT_EQ(eao(gt, gt, 0.5, mode), 1.0);
    const auto s = summary_metrics(gt, gt, mapping, 0.5);
    EXPECT_EQ(s.precision, 1.0);
    EXPECT_EQ(s.recall, 1.0);
    EXPECT_EQ(s.absence_accuracy, 1.0);
  }
}

TEST(MapIds, SplitTrackCreditsFirstIdOnlyInOuid) {
  const std::vector<TrackRecord> gt{track(1, 0, 10)};
  const std::vector<TrackRecord> pred{track(5, 0, 5), track(6, 5, 10)};
  const auto o = map_ids(gt, pred, 0.5, IdMode::kOUID);
  const auto a = map_ids(gt, pred, 0.5, IdMode::kAUID);
  EXPECT_EQ(o.assignment.at(1), (std::vector<CreditedId>{{5, 0}}));
  EXPECT_EQ(a.assignment.at(1), (std::vector<CreditedId>{{5, 0}, {6, 5}}));
  EXPECT_DOUBLE_EQ(eao(gt, pred, 0.5, IdMode::kAUID), 1.0);
  EXPECT_LT(eao(gt, pred, 0.5, IdMode::kOUID), 1.0);
}

TEST(MapIds, SwappedPredictionGetsNoCreditForSecondObject) {
  const BoundingBox far{200, 200, 10, 10};
  // gt 1 and gt 2 each present on frames 0..9; pred 7 follows gt 1 then jumps to gt 2.
  const std::vector<TrackRecord> gt{track(1, 0, 10), track(2, 0, 10, far)};
  TrackRecord p7 = track(7, 0, 5);
  for (std::int64_t f = 5; f < 10; ++f) p7.boxes[f] = far;
  const std::vector<TrackRecord> pred{p7, track(8, 5, 10)};
  const auto a = map_ids(gt, pred, 0.5, IdMode::kAUID);
  EXPECT_EQ(a.assignment.at(1), (std::vector<CreditedId>{{7, 0}, {8, 5}}));
  EXPECT_TRUE(a.assignment.at(2).empty());
  for (double v : overlap_curve(gt[1], pred, a)) EXPECT_EQ(v, 0.0);
}

TEST(OverlapCurve, HalfOverlapIsOneThird) {
  const std::vector<TrackRecord> gt{track(1, 0, 6)};
  const std::vector<TrackRecord> pred{shifted(track(2, 0, 6), 5.0)};
  const auto mapping = map_ids(gt, pred, 0.3, IdMode::kOUID);
  for (double v : overlap_curve(gt[0], pred, mapping)) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(eao(gt, pred, 0.3, IdMode::kOUID), 1.0 / 3.0, 1e-15);
}

TEST(OverlapCurve, AbsentGtFramesAreExcluded) {
  TrackRecord g = track(1, 0, 3);
  g.boxes[8] = kBox;
  const std::vector<TrackRecord> gt{g};
  const std::vector<TrackRecord> pred{track(2, 0, 10)};
  EXPECT_EQ(overlap_curve(g, pred, map_ids(gt, pred, 0.5, IdMode::kOUID)).size(), 4u);
}

TEST(Eao, FreshIdEveryFrameFavoursAuid) {
  const std::vector<TrackRecord> gt{track(1, 0, 20)};
  std::vector<TrackRecord> pred;
  for (std::int64_t f = 0; f < 20; ++f) pred.push_back(track(100 + f, f, f + 1));
  const double o = eao(gt, pred, 0.5, IdMode::kOUID);
  const double a = eao(gt, pred, 0.5, IdMode::kAUID);
  EXPECT_DOUBLE_EQ(a, 1.0);
  EXPECT_LT(o, 0.3);
  EXPECT_GT(a, o);
}

// Random jittered predictions with id breaks and swaps between two objects.
TEST(Eao, OuidNeverExceedsAuidAndStaysInRange) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int frames = static_cast<int>(rng.uniform_int(3, 30));
    std::vector<TrackRecord> gt{track(1, 0, frames), track(2, 0, frames, {40, 0, 10, 10})};
    if (rng.bernoulli(0.5)) gt[1].boxes.erase(rng.uniform_int(0, frames - 1));
    std::vector<TrackRecord> pred;
    std::int64_t next = 10;
    for (const auto& g : gt) {
      TrackRecord p;
      p.id = next++;
      for (const auto& [f, b] : g.boxes) {
        if (rng.bernoulli(0.15)) {
          pred.push_back(p);
          p = TrackRecord{};
          p.id = next++;
        }
        if (rng.bernoulli(0.1)) continue;
        BoundingBox jb = b;
        jb.x += rng.uniform(-3, 3);
        jb.y += rng.uniform(-3, 3);
        p.boxes[f] = jb;
      }
      pred.push_back(p);
    }
    if (rng.bernoulli(0.3)) std::swap(pred.front().boxes, pred.back().boxes);
    const double o = eao(gt, pred, 0.5, IdMode::kOUID);
    const double a = eao(gt, pred, 0.5, IdMode::kAUID);
    EXPECT_LE(o, a + 1e-15);
    EXPECT_GE(o, 0.0);
    EXPECT_LE(a, 1.0);
  }
}

TEST(Eao, MonotoneUnderPointwiseImprovement) {
  const std::vector<double> worse{0.2, 0.5, 0.1, 0.9, 0.0};
  std::vector<double> better = worse;
  better[2] = 0.6;
  for (LengthInterval iv : {LengthInterval{1, 5}, LengthInterval{2, 3}, LengthInterval{4, 9}}) {
    EXPECT_GE(track_eao(better, iv), track_eao(worse, iv));
  }
}

TEST(EaoInterval, DegenerateAndKde) {
  EXPECT_EQ(eao_interval(std::vector<int>{4}).lo, 1);
  const auto two = eao_interval(std::vector<int>{3, 9, 9});
  EXPECT_EQ(two.lo, 1);
  EXPECT_EQ(two.hi, 9);
  const std::vector<int> lengths{10, 11, 12, 12, 12, 13, 14, 80};
  const auto iv = eao_interval(lengths);
  EXPECT_LE(iv.lo, 12);
  EXPECT_GE(iv.hi, 12);
  EXPECT_LT(iv.hi, 80);
  EXPECT_GE(iv.lo, 10);
}

TEST(Eao, EmptyGroundTruthThrows) {
  const std::vector<TrackRecord> none;
  try {
    eao(none, none, 0.5, IdMode::kOUID);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGroundTruth);
  }
}

TEST(SummaryMetrics, EmptyPredictionsAndAbsence) {
  const std::vector<TrackRecord> gt{track(1, 0, 5), track(2, 5, 10, {100, 100, 10, 10})};
  const std::vector<TrackRecord> none;
  const auto empty = summary_metrics(gt, none, map_ids(gt, none, 0.5, IdMode::kOUID), 0.5);
  EXPECT_EQ(empty.precision, 1.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.absence_accuracy, 1.0);

  // Pred 3 follows gt 1 and keeps reporting after gt 1 is gone.
  const std::vector<TrackRecord> pred{track(3, 0, 10), track(4, 5, 10, {100, 100, 10, 10})};
  const auto s = summary_metrics(gt, pred, map_ids(gt, pred, 0.5, IdMode::kOUID), 0.5);
  EXPECT_EQ(s.recall, 1.0);
  EXPECT_DOUBLE_EQ(s.precision, 10.0 / 15.0);
  EXPECT_DOUBLE_EQ(s.absence_accuracy, 5.0 / 10.0);
}

TEST(MapIds, IouMinValidated) {
  const std::vector<TrackRecord> gt{track(1, 0, 2)};
  EXPECT_THROW(map_ids(gt, gt, 0.0, IdMode::kOUID), Error);
  EXPECT_THROW(map_ids(gt, gt, 1.5, IdMode::kOUID), Error);
  EXPECT_NO_THROW(map_ids(gt, gt, 1.0, IdMode::kOUID));
}

TEST(Evaluate, RowsInModeOrder) {
  const std::vector<TrackRecord> gt{track(1, 0, 10)};
  const std::vector<TrackRecord> pred{track(5, 0, 5), track(6, 5, 10)};
  const auto rows = evaluate(gt, pred, 0.5);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].mode, IdMode::kOUID);
  EXPECT_EQ(rows[1].mode, IdMode::kAUID);
  EXPECT_LT(rows[0].eao, rows[1].eao);
  EXPECT_EQ(rows[1].summary.recall, 1.0);
}

}  // namespace
}  // namespace airtrack
