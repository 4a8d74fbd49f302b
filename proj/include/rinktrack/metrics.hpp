#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rinktrack/geometry.hpp"
#include "rinktrack/sequence.hpp"

namespace rinktrack {

double iou(const BoundingBox& a, const BoundingBox& b);

/// Result of matching one frame's ground truth to predictions.
struct FrameCorrespondence {
  std::vector<std::pair<int, int>> matched;  // (gt id, pred id)
  std::vector<int> unmatched_gt;             // false negatives
  std::vector<int> unmatched_pred;           // false positives
  int idsw = 0;
};

/// Last predicted id each ground-truth target was matched to. Survives
/// frames in which the target is unmatched.
using CorrespondenceState = std::map<int, int>;

/// CLEAR-MOT frame matching: previous correspondences that still overlap by
/// at least iou_min persist, the rest are matched by an optimal maximum-IoU
/// assignment. A persisting target whose predicted id changed counts as an
/// identity switch. Updates state.
FrameCorrespondence match_frame(std::span<const TrackRow> gt,
                                std::span<const TrackRow> pred,
                                CorrespondenceState& state,
                                double iou_min = 0.5);

struct MotTotals {
  std::int64_t gt = 0;
  std::int64_t matches = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t idsw = 0;

  MotTotals& operator+=(const MotTotals& o);
};

/// 1 - (FN + FP + IDsw) / GT. Throws UndefinedMetric when GT is zero.
double mota(const MotTotals& t);

MotTotals clear_mot(const TrackOutput& gt, const TrackOutput& pred,
                    double iou_min = 0.5);

struct IdScores {
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  std::int64_t idtp = 0;
  std::int64_t idfp = 0;
  std::int64_t idfn = 0;

  /// Recomputes the ratios from the counts.
  void finalize();
};

/// Per (gt id, pred id) pair, the number of frames in which both are present
/// with IoU >= iou_min.
struct IdOverlap {
  std::vector<int> gt_ids;
  std::vector<int> pred_ids;
  Eigen::MatrixXd counts;  // gt x pred
  std::int64_t gt_detections = 0;
  std::int64_t pred_detections = 0;
};

IdOverlap id_overlap(const TrackOutput& gt, const TrackOutput& pred,
                     double iou_min = 0.5);

/// Identity scores under the globally optimal one-to-one id mapping.
IdScores idf1(const TrackOutput& gt, const TrackOutput& pred,
              double iou_min = 0.5);

struct SequenceMetrics {
  std::string name;
  MotTotals totals;
  IdScores ids;
  double mota = 0.0;
};

struct MetricsReport {
  double mota = 0.0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t idsw = 0;
  std::int64_t gt = 0;
  double idf1 = 0.0;
  double idp = 0.0;
  double idr = 0.0;
  std::vector<SequenceMetrics> per_sequence;
};

struct EvalInput {
  std::string name;
  TrackOutput gt;
  TrackOutput pred;
};

/// Evaluates every sequence and merges the counts by summation.
MetricsReport evaluate(std::span<const EvalInput> inputs, double iou_min = 0.5);

}  // namespace rinktrack
