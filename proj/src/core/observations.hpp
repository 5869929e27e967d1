#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/geometry.hpp"
#include "core/rle_mask.hpp"

namespace camot {

// One region proposal as read from a frame file. 3D position/velocity may be
// precomputed upstream (bypass mode) or left out to be derived from depth
// and flow.
struct RawProposal {
  RleMask mask;
  double score = 0.0;
  std::optional<Eigen::Vector3d> pos;   // world frame, meters
  std::optional<Eigen::Vector2d> vel;   // world frame (x, z), m/frame
  std::map<std::string, double> class_scores;
};

// o = [p, v, m, s] plus optional per-class confidences.
struct Observation {
  Eigen::Vector3d pos = Eigen::Vector3d::Zero();  // world frame, meters
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();  // world frame (x, z), m/frame
  RleMask mask;
  double score = 0.0;
  std::map<std::string, double> class_scores;
};

// Per-frame calibration, motion and scene data. World frame is the camera
// frame of frame 0; ego_motion maps camera-frame points at t-1 to camera
// frame t.
struct FrameContext {
  int frame = 0;
  RigidTransform ego_motion;
  RigidTransform camera_to_world;
  CameraIntrinsics intrinsics;
  uint32_t image_width = 0;
  uint32_t image_height = 0;
  std::optional<GroundPlane> ground;  // world frame
  std::shared_ptr<const DepthMap> depth;
  std::shared_ptr<const FlowMap> flow;
};

struct ObservationParams {
  double nms_iou_threshold = 0.7;
  double height_min = 0.2;   // meters above the ground plane
  double height_max = 3.0;
  int top_k = 100;
  int min_depth_pixels = 10;
};

struct RejectionRecord {
  size_t proposal_index = 0;
  std::string reason;
};

// Greedy score-descending NMS with mask IoU as the similarity measure.
// Survivors come back in descending score order (ties keep input order).
std::vector<RawProposal> nms_proposals(const std::vector<RawProposal>& proposals,
                                       double iou_threshold);

// Signed height of a world-frame position above the plane.
inline double height_above_ground(const Eigen::Vector3d& pos,
                                  const GroundPlane& plane) {
  return plane.signed_distance(pos);
}

struct GeometricFilterResult {
  std::vector<Observation> kept;
  std::vector<size_t> removed_indices;  // into the input vector
  bool skipped_no_plane = false;
};

// Keeps observations whose height above the plane lies in [h_min, h_max].
// Without a ground plane the filter is skipped and flagged.
GeometricFilterResult geometric_filter(std::vector<Observation> observations,
                                       const std::optional<GroundPlane>& ground,
                                       double height_min, double height_max);

// Median 3D position (world frame) of the lifted mask points and median
// planar flow under the mask. Velocity is zero when no flow is available.
// Returns nullopt when fewer than min_depth_pixels mask pixels carry valid
// depth.
std::optional<std::pair<Eigen::Vector3d, Eigen::Vector2d>> extract_pos_vel(
    const RleMask& mask, const FrameContext& ctx, int min_depth_pixels);

struct ObservationSet {
  std::vector<Observation> observations;  // descending score, size <= top_k
  std::vector<RejectionRecord> rejections;
  bool height_filter_skipped = false;
};

// Full per-frame preprocessing: NMS, 3D extraction (or bypass), geometric
// filtering, K cap.
ObservationSet build_observation_set(const std::vector<RawProposal>& raw,
                                     const FrameContext& ctx,
                                     const ObservationParams& params);

}  // namespace camot
