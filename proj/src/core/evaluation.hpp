#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/rle_mask.hpp"

namespace camot {

// Axis-aligned box with float coordinates (x, y = top-left corner).
struct BBox2d {
  double x = 0, y = 0, w = 0, h = 0;
};

double bbox_iou(const BBox2d& a, const BBox2d& b);

struct GroundTruthBox {
  int frame = 0;
  int64_t id = 0;
  std::string label;
  BBox2d box;
  std::optional<Eigen::Vector3d> pos;  // camera frame, for distance binning
};

struct TrackReportRow {
  int frame = 0;
  int64_t id = 0;
  BBox2d box;
  std::optional<std::string> label;
  std::optional<Eigen::Vector3d> pos_cam;  // camera frame
};

struct EvalConfig {
  double iou_threshold = 0.5;
  std::vector<double> bin_edges = {0, 10, 20, 30, 40, 50};  // meters
  std::optional<std::vector<std::string>> categories;
  double lambda = 4.0;  // temporal-coverage decay
};

struct MotCounts {
  int64_t gt = 0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t idsw = 0;

  double mota() const { return gt > 0 ? 1.0 - double(fp + fn + idsw) / double(gt) : 1.0; }
  double moda() const { return gt > 0 ? 1.0 - double(fp + fn) / double(gt) : 1.0; }
  double recall() const { return gt > 0 ? double(tp) / double(gt) : 1.0; }
  double precision() const {
    return (tp + fp) > 0 ? double(tp) / double(tp + fp) : 1.0;
  }
};

struct DistanceBin {
  double lo = 0.0;
  std::optional<double> hi;  // nullopt = open-ended overflow bin
  MotCounts counts;
};

struct MotReport {
  MotCounts overall;
  std::vector<DistanceBin> bins;
  std::map<std::string, MotCounts> per_category;  // when categories configured
};

// CLEAR MOT: per-frame greedy IoU matching with previous-correspondence
// persistence; identity switches are counted against the last known
// correspondence of each ground-truth object. Events are binned by the
// ground-truth camera distance (false positives by the report's own
// distance; an open overflow bin catches everything past the last edge).
MotReport clear_mot(const std::vector<TrackReportRow>& tracks,
                    const std::vector<GroundTruthBox>& ground_truth,
                    const EvalConfig& config);

// A hypothesis as seen by the coverage objective: its ranking strength and
// its recent 2D boxes.
struct HypothesisTrace {
  double strength = 0.0;
  std::map<int, BBox2d> boxes;  // frame -> box
};

// Decay-weighted box IoU of the best hypothesis against one ground-truth
// object over the 6-frame window [t-5, t]. Frames missing on either side
// contribute 0.
double temporal_coverage(const std::vector<HypothesisTrace>& hypotheses,
                         const std::map<int, BBox2d>& gt_boxes, int t,
                         double lambda);

// Mean temporal coverage over all (ground-truth object, frame) pairs, with
// only the k best-scoring hypotheses of each frame eligible.
double coverage_objective(
    const std::vector<std::vector<HypothesisTrace>>& per_frame_hypotheses,
    const std::vector<GroundTruthBox>& ground_truth, int k_best,
    double lambda);

}  // namespace camot
