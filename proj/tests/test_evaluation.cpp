#include <doctest.h>

#include <cmath>
#include <random>

#include "core/evaluation.hpp"

using namespace camot;

TEST_SUITE_BEGIN("evaluation");

namespace {

BBox2d box_at(double x, double y) { return {x, y, 10.0, 10.0}; }

GroundTruthBox gt(int frame, int64_t id, BBox2d box,
                  const std::string& label = "object",
                  std::optional<Eigen::Vector3d> pos = std::nullopt) {
  return {frame, id, label, box, pos};
}

TrackReportRow tr(int frame, int64_t id, BBox2d box,
                  std::optional<std::string> label = std::nullopt,
                  std::optional<Eigen::Vector3d> pos_cam = std::nullopt) {
  return {frame, id, box, std::move(label), pos_cam};
}

}  // namespace

TEST_CASE("clear_mot: identical tracks score perfectly") {
  std::vector<GroundTruthBox> truth;
  std::vector<TrackReportRow> tracks;
  for (int t = 0; t < 5; ++t) {
    truth.push_back(gt(t, 1, box_at(10 * t, 0)));
    truth.push_back(gt(t, 2, box_at(10 * t, 40)));
    tracks.push_back(tr(t, 100, box_at(10 * t, 0)));
    tracks.push_back(tr(t, 200, box_at(10 * t, 40)));
  }
  const MotReport report = clear_mot(tracks, truth, EvalConfig{});
  CHECK(report.overall.mota() == 1.0);
  CHECK(report.overall.moda() == 1.0);
  CHECK(report.overall.recall() == 1.0);
  CHECK(report.overall.precision() == 1.0);
  CHECK(report.overall.idsw == 0);
}

TEST_CASE("clear_mot: empty tracks degenerate conventions") {
  std::vector<GroundTruthBox> truth;
  for (int t = 0; t < 4; ++t) truth.push_back(gt(t, 1, box_at(0, 0)));
  const MotReport report = clear_mot({}, truth, EvalConfig{});
  CHECK(report.overall.recall() == 0.0);
  CHECK(report.overall.precision() == 1.0);  // no reports, no false alarms
  CHECK(report.overall.fn == 4);
  CHECK(report.overall.moda() == doctest::Approx(0.0));
}

TEST_CASE("clear_mot: hand-built 10-box scenario hits MOTA 0.7 exactly") {
  // 10 GT boxes over 3 frames; tracks produce 1 FP, 1 FN, 1 ID switch.
  std::vector<GroundTruthBox> truth;
  std::vector<TrackReportRow> tracks;
  const BBox2d A = box_at(0, 0), B = box_at(20, 0), C = box_at(40, 0),
               D = box_at(60, 0);
  // frame 0: A B C D (D unmatched -> FN)
  truth.push_back(gt(0, 1, A));
  truth.push_back(gt(0, 2, B));
  truth.push_back(gt(0, 3, C));
  truth.push_back(gt(0, 4, D));
  tracks.push_back(tr(0, 11, A));
  tracks.push_back(tr(0, 12, B));
  tracks.push_back(tr(0, 13, C));
  // frame 1: A B C plus one spurious report -> FP
  for (auto [id, b] : {std::pair{1, A}, {2, B}, {3, C}})
    truth.push_back(gt(1, id, b));
  tracks.push_back(tr(1, 11, A));
  tracks.push_back(tr(1, 12, B));
  tracks.push_back(tr(1, 13, C));
  tracks.push_back(tr(1, 99, box_at(200, 50)));
  // frame 2: A B C; C switches to a new track id -> IDSW
  for (auto [id, b] : {std::pair{1, A}, {2, B}, {3, C}})
    truth.push_back(gt(2, id, b));
  tracks.push_back(tr(2, 11, A));
  tracks.push_back(tr(2, 12, B));
  tracks.push_back(tr(2, 14, C));

  const MotReport report = clear_mot(tracks, truth, EvalConfig{});
  CHECK(report.overall.gt == 10);
  CHECK(report.overall.fp == 1);
  CHECK(report.overall.fn == 1);
  CHECK(report.overall.idsw == 1);
  CHECK(report.overall.mota() == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(report.overall.moda() == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("clear_mot: match persistence prevents spurious switches") {
  // two overlapping reports; the previous correspondence must win even when
  // the other report has slightly higher IoU
  std::vector<GroundTruthBox> truth;
  std::vector<TrackReportRow> tracks;
  truth.push_back(gt(0, 1, box_at(0, 0)));
  tracks.push_back(tr(0, 7, box_at(0, 0)));
  // frame 1: id 8 fits perfectly, id 7 fits a little worse
  truth.push_back(gt(1, 1, box_at(0, 0)));
  tracks.push_back(tr(1, 7, {1.0, 0.0, 10.0, 10.0}));
  tracks.push_back(tr(1, 8, box_at(0, 0)));
  const MotReport report = clear_mot(tracks, truth, EvalConfig{});
  CHECK(report.overall.idsw == 0);
  CHECK(report.overall.tp == 2);
  CHECK(report.overall.fp == 1);  // the unmatched perfect-fit report
}

TEST_CASE("clear_mot: MOTA <= MODA and id-relabel invariance") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<GroundTruthBox> truth;
  std::vector<TrackReportRow> tracks;
  for (int t = 0; t < 12; ++t) {
    for (int64_t id = 1; id <= 4; ++id) {
      const BBox2d b = box_at(20.0 * double(id) + 0.1 * t, 5.0 * double(id));
      truth.push_back(gt(t, id, b));
      if (rng() % 10 < 8) {
        // usually report, sometimes with a scrambled id
        const int64_t tid = (rng() % 10 < 2) ? int64_t(rng() % 3 + 50) : id * 10;
        tracks.push_back(tr(t, tid, b));
      }
    }
    if (rng() % 10 < 3) tracks.push_back(tr(t, 777, box_at(u(rng), 70)));
  }
  const MotReport a = clear_mot(tracks, truth, EvalConfig{});
  CHECK(a.overall.mota() <= a.overall.moda());
  CHECK(a.overall.mota() <= 1.0);
  CHECK(a.overall.moda() <= 1.0);

  // a global bijective relabeling changes nothing
  std::vector<TrackReportRow> relabeled = tracks;
  for (auto& r : relabeled) r.id = r.id * 7 + 3;
  const MotReport b = clear_mot(relabeled, truth, EvalConfig{});
  CHECK(a.overall.tp == b.overall.tp);
  CHECK(a.overall.fp == b.overall.fp);
  CHECK(a.overall.fn == b.overall.fn);
  CHECK(a.overall.idsw == b.overall.idsw);
}

TEST_CASE("clear_mot: distance bins add up to the overall metrics") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> dist(0.5, 80.0);
  std::vector<GroundTruthBox> truth;
  std::vector<TrackReportRow> tracks;
  for (int t = 0; t < 10; ++t) {
    for (int64_t id = 1; id <= 5; ++id) {
      const BBox2d b = box_at(15.0 * double(id), 12.0 * double(id % 3));
      const double d = dist(rng);
      truth.push_back(
          gt(t, id, b, "object", Eigen::Vector3d(0.0, 0.0, d)));
      if (rng() % 10 < 7)
        tracks.push_back(tr(t, id, b, std::nullopt, Eigen::Vector3d(0, 0, d)));
    }
    if (rng() % 10 < 5)
      tracks.push_back(
          tr(t, 500 + int64_t(t), box_at(90, 90), std::nullopt,
             Eigen::Vector3d(0, 0, dist(rng))));
  }
  const MotReport report = clear_mot(tracks, truth, EvalConfig{});
  MotCounts sum;
  for (const DistanceBin& bin : report.bins) {
    sum.gt += bin.counts.gt;
    sum.tp += bin.counts.tp;
    sum.fp += bin.counts.fp;
    sum.fn += bin.counts.fn;
    sum.idsw += bin.counts.idsw;
  }
  CHECK(sum.gt == report.overall.gt);
  CHECK(sum.tp == report.overall.tp);
  CHECK(sum.fp == report.overall.fp);
  CHECK(sum.fn == report.overall.fn);
  CHECK(sum.idsw == report.overall.idsw);
}

TEST_CASE("clear_mot: per-category reports") {
  std::vector<GroundTruthBox> truth{gt(0, 1, box_at(0, 0), "car"),
                                    gt(0, 2, box_at(30, 0), "pedestrian")};
  std::vector<TrackReportRow> tracks{
      tr(0, 1, box_at(0, 0), "car"),
      tr(0, 2, box_at(60, 0), "pedestrian")};  // misses its GT
  EvalConfig cfg;
  cfg.categories = std::vector<std::string>{"car", "pedestrian"};
  const MotReport report = clear_mot(tracks, truth, cfg);
  CHECK(report.per_category.at("car").mota() == 1.0);
  CHECK(report.per_category.at("pedestrian").mota() == -1.0);  // 1 FP + 1 FN
}

TEST_CASE("temporal_coverage: closed forms") {
  for (const double lambda : {1.0, 2.0, 4.0}) {
    std::map<int, BBox2d> gt_boxes;
    HypothesisTrace perfect;
    perfect.strength = 1.0;
    for (int t = 0; t <= 5; ++t) {
      gt_boxes[t] = box_at(3 * t, 0);
      perfect.boxes[t] = box_at(3 * t, 0);
    }
    double expected = 0.0;
    for (int k = 0; k <= 5; ++k) expected += std::exp(-double(k) / lambda);
    CHECK(temporal_coverage({perfect}, gt_boxes, 5, lambda) ==
          doctest::Approx(expected).epsilon(1e-12));

    // no overlapping hypothesis
    HypothesisTrace disjoint;
    disjoint.boxes[5] = box_at(500, 500);
    CHECK(temporal_coverage({disjoint}, gt_boxes, 5, lambda) == 0.0);

    // only frame t covered, IoU 1
    HypothesisTrace last_only;
    last_only.boxes[5] = gt_boxes[5];
    CHECK(temporal_coverage({last_only}, gt_boxes, 5, lambda) == 1.0);
  }
}

TEST_CASE("temporal_coverage is monotone in a single-frame IoU") {
  std::map<int, BBox2d> gt_boxes;
  for (int t = 0; t <= 5; ++t) gt_boxes[t] = box_at(0, 0);
  double last = -1.0;
  for (double shift : {8.0, 6.0, 4.0, 2.0, 0.0}) {
    HypothesisTrace h;
    for (int t = 0; t <= 5; ++t) h.boxes[t] = box_at(0, 0);
    h.boxes[3] = box_at(shift, 0.0);  // vary one frame's overlap
    const double v = temporal_coverage({h}, gt_boxes, 5, 2.0);
    CHECK(v >= last);
    last = v;
  }
}

TEST_CASE("coverage_objective: perfect, empty and half coverage") {
  const double lambda = 2.0;
  const int frames = 10;
  std::vector<GroundTruthBox> truth;
  for (int t = 0; t < frames; ++t) {
    truth.push_back(gt(t, 1, box_at(0, 0)));
    truth.push_back(gt(t, 2, box_at(50, 0)));
  }
  // hypothesis set covering only object 1
  std::vector<std::vector<HypothesisTrace>> per_frame(frames);
  for (int t = 0; t < frames; ++t) {
    HypothesisTrace h;
    h.strength = 2.0;
    for (int k = std::max(0, t - 5); k <= t; ++k) h.boxes[k] = box_at(0, 0);
    per_frame[t].push_back(std::move(h));
  }
  const double half = coverage_objective(per_frame, truth, 10, lambda);

  // duplicate the trace onto object 2 -> full coverage, exactly double
  for (int t = 0; t < frames; ++t) {
    HypothesisTrace h;
    h.strength = 1.0;
    for (int k = std::max(0, t - 5); k <= t; ++k) h.boxes[k] = box_at(50, 0);
    per_frame[t].push_back(std::move(h));
  }
  const double full = coverage_objective(per_frame, truth, 10, lambda);
  CHECK(half == doctest::Approx(0.5 * full).epsilon(1e-12));

  CHECK(coverage_objective(per_frame, truth, 0, lambda) == 0.0);

  // K = 1 keeps only the strongest hypothesis (object 1's trace)
  const double k1 = coverage_objective(per_frame, truth, 1, lambda);
  CHECK(k1 == doctest::Approx(half).epsilon(1e-12));
}

TEST_SUITE_END();
