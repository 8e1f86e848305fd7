// Ground-truth to prediction id mapping, expected average overlap (EAO) in
// oUID / aUID modes, and detection-level summaries.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "airtrack/core.hpp"

namespace airtrack::eval {

struct TrackRecord {
  std::int64_t id = 0;
  std::map<std::int64_t, BoundingBox> boxes;  // frame -> box; absent frames omitted
};

// oUID credits only the first predicted id associated with a ground-truth id;
// aUID credits every predicted id that never matched another ground-truth id.
enum class IdMode { kOUID, kAUID };

std::string_view to_string(IdMode mode);

struct CreditedId {
  std::int64_t pred_id = 0;
  std::int64_t from_frame = 0;  // first frame the pair matched
  friend bool operator==(const CreditedId&, const CreditedId&) = default;
};

struct IdMapping {
  IdMode mode = IdMode::kOUID;
  std::map<std::int64_t, std::vector<CreditedId>> assignment;  // gt id -> credited ids
};

// Frame by frame, gt and predicted boxes are matched one-to-one greedily by
// IoU (>= iou_min; ties by gt id then pred id). A predicted id is owned by the
// first gt id it matches.
IdMapping map_ids(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred, double iou_min,
                  IdMode mode);

// Phi over the gt-present frames in order: max IoU of credited predictions
// present at the frame (credit starts at CreditedId::from_frame), 0 if none.
std::vector<double> overlap_curve(const TrackRecord& gt, std::span<const TrackRecord> pred,
                                  const IdMapping& mapping);

struct LengthInterval {
  int lo = 1;
  int hi = 1;
};

// Contiguous region around the mode of a Gaussian KDE (Silverman bandwidth)
// over integer lengths, holding >= 50% of the mass; [1, max] when there are
// fewer than three distinct lengths.
LengthInterval eao_interval(std::span<const int> lengths);

// Mean over Ns in [lo, hi] of the mean of the first Ns values; Ns is capped at
// the curve length.
double track_eao(std::span<const double> curve, LengthInterval interval);

// Throws EmptyGroundTruth.
double eao(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred, double iou_min,
           IdMode mode);

struct SummaryMetrics {
  double precision = 1.0;
  double recall = 0.0;
  double absence_accuracy = 1.0;
};

// Empty predictions give precision 1.0 by convention.
SummaryMetrics summary_metrics(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred,
                               const IdMapping& mapping, double iou_min);

struct MetricsRow {
  IdMode mode = IdMode::kOUID;
  double eao = 0.0;
  SummaryMetrics summary;
};

// One row per mode, oUID first.
std::vector<MetricsRow> evaluate(std::span<const TrackRecord> gt, std::span<const TrackRecord> pred,
                                 double iou_min);

}  // namespace airtrack::eval
