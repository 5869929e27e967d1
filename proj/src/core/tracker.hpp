#pragma once

#include <Eigen/Dense>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/observations.hpp"

namespace camot {

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;

// Constant-velocity state [x, y, z, vx, vz] in world coordinates. The height
// y has no dynamics of its own; it only moves through corrections anchored to
// the ground plane.
struct KalmanState {
  Vector5d mean = Vector5d::Zero();
  Matrix5d cov = Matrix5d::Zero();

  Eigen::Vector3d position() const { return mean.head<3>(); }
  Eigen::Vector2d velocity() const { return mean.tail<2>(); }
};

struct TrackerParams {
  int tau = 10;                    // hypothesis-NMS age threshold, frames
  double nms_similarity = 0.5;     // mean-IoU threshold for duplicate pruning
  double gate = 0.05;              // minimum association score g_min
  int max_misses = 6;              // consecutive predicted frames before death
  int backward_window = 5;         // frames searched during initialization
  double init_pos_var = 0.5;       // m^2
  double init_vel_var = 1.0;       // (m/frame)^2
  double process_noise_pos = 0.05; // m^2 per frame
  double process_noise_vel = 0.05; // (m/frame)^2 per frame
  double obs_noise_var = 0.1;      // m^2
};

KalmanState kalman_init(const Eigen::Vector3d& pos, const Eigen::Vector2d& vel,
                        const TrackerParams& params);

// Advances one frame under the constant-velocity model and adds process
// noise.
KalmanState kalman_predict(const KalmanState& state,
                           const TrackerParams& params);

// Measurement for the correction step: the observed position with its height
// replaced by the ground projection (the object's bottom point). Without a
// plane the raw position is used.
Eigen::Vector3d measurement_from_observation(
    const Eigen::Vector3d& obs_pos, const std::optional<GroundPlane>& plane);

// Standard linear correction on the 3D position measurement (Joseph form).
// Throws InternalError if the posterior covariance stops being PSD.
KalmanState kalman_correct(const KalmanState& state,
                           const Eigen::Vector3d& obs_pos,
                           const std::optional<GroundPlane>& plane,
                           const TrackerParams& params);

// Innovation covariance of the position measurement for a predicted state.
Eigen::Matrix3d innovation_covariance(const KalmanState& predicted,
                                      const TrackerParams& params);

// One frame of a hypothesis. Exactly one of (obs_index set, is_predicted)
// holds.
struct TrackFrame {
  int frame = 0;
  RleMask mask;            // associated observation mask, or the prediction
  RleMask predicted_mask;  // prior prediction for this frame
  bool is_predicted = false;
  std::optional<size_t> obs_index;
  double obs_score = 0.0;  // s_t; 0 on predicted frames
  double phi_sim = 0.0;    // IoU(predicted_mask, observation mask)
  std::map<std::string, double> class_scores;
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();  // filtered, world frame
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  Eigen::Vector3d pos_cam = Eigen::Vector3d::Zero();
  BBox2i box;  // tight box of `mask`
};

class Hypothesis {
 public:
  int64_t id = 0;
  int creation_frame = 0;  // frame at which the hypothesis was started
  std::vector<TrackFrame> track;  // contiguous, ascending frames
  KalmanState state;              // posterior at the newest frame
  int consecutive_misses = 0;
  bool terminated = false;

  int first_frame() const { return track.front().frame; }
  int last_frame() const { return track.back().frame; }

  const TrackFrame* frame_at(int t) const {
    if (track.empty() || t < first_frame() || t > last_frame()) return nullptr;
    return &track[size_t(t - first_frame())];
  }
};

struct AssociationResult {
  size_t index = 0;
  double score = 0.0;
  double mask_iou = 0.0;
  double motion = 0.0;
};

// Picks the observation maximizing IoU(predicted mask, obs mask) times the
// max-normalized Gaussian motion likelihood. Ties break on higher mask IoU,
// then lower index. Returns nullopt when the best score falls under the gate.
// observation_boxes may carry precomputed tight boxes (one per observation)
// to avoid recomputing them for every hypothesis.
std::optional<AssociationResult> associate(
    const RleMask& predicted_mask, const KalmanState& predicted_state,
    const std::vector<Observation>& observations,
    const std::optional<GroundPlane>& plane, const TrackerParams& params,
    std::span<const std::optional<BBox2i>> observation_boxes = {});

// Mean mask IoU over the frames both hypotheses cover; 0 without overlap.
double hypothesis_similarity(const Hypothesis& a, const Hypothesis& b);

// Greedy duplicate pruning over hypotheses started before frame t - tau:
// strongest first (ties keep the lower id), suppressing any other eligible
// hypothesis whose similarity exceeds the threshold. Younger hypotheses are
// left alone so alternative explanations can diverge first. Returns the
// number pruned.
size_t hypothesis_nms(std::vector<Hypothesis>& hypotheses, int t,
                      const TrackerParams& params,
                      const std::function<double(const Hypothesis&, int)>& strength);

struct FrameHistory {
  FrameContext ctx;
  std::vector<Observation> observations;
  std::vector<std::optional<BBox2i>> observation_boxes;  // optional cache
};

// Starts a hypothesis from one observation of the newest history frame:
// associates backward through up to `backward_window` older frames (stopping
// at the first miss), then replays the chain forward through a fresh Kalman
// filter. history is ordered oldest to newest and includes the current frame.
Hypothesis init_backward(const Observation& obs, size_t obs_index,
                         std::span<const FrameHistory> history,
                         const TrackerParams& params, int64_t id);

struct StepStats {
  int frame = 0;
  size_t extended = 0;
  size_t associated = 0;
  size_t created = 0;
  size_t terminated = 0;
  size_t pruned = 0;
  std::vector<std::string> warnings;
};

// Maintains the overcomplete hypothesis set across a sequence. One instance
// per sequence; frames must arrive in order.
class Tracker {
 public:
  // `strength` orders hypotheses for duplicate pruning (larger = stronger);
  // the caller supplies it so the tracker stays independent of the scoring
  // model.
  using StrengthFn = std::function<double(const Hypothesis&, int)>;

  Tracker(TrackerParams params, StrengthFn strength);

  StepStats step(const FrameContext& ctx,
                 const std::vector<Observation>& observations);

  const std::vector<Hypothesis>& hypotheses() const { return hypotheses_; }
  const TrackerParams& params() const { return params_; }

 private:
  MaskPrediction predict_into_frame(const RleMask& last_mask,
                                    const Eigen::Vector3d& last_pos_world,
                                    const KalmanState& prio,
                                    const FrameContext& prev,
                                    const FrameContext& cur) const;

  TrackerParams params_;
  StrengthFn strength_;
  std::vector<Hypothesis> hypotheses_;
  std::deque<FrameHistory> history_;
  int64_t next_id_ = 1;
};

}  // namespace camot
