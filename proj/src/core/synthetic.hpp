#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/evaluation.hpp"
#include "core/observations.hpp"

namespace camot {

// A tracked object rendered as a camera-facing rectangle standing on the
// ground plane.
struct ObjectSpec {
  std::string label = "object";
  double width = 1.6;   // meters
  double height = 1.5;  // meters
  Eigen::Vector2d start{0.0, 12.0};     // ground position (x, z), world frame
  Eigen::Vector2d velocity{0.0, 0.0};   // m/frame
  std::vector<std::pair<int, Eigen::Vector2d>> velocity_changes;
  std::vector<std::pair<int, int>> occluded_spans;  // inclusive frame ranges
};

struct CameraMotionSpec {
  Eigen::Vector3d velocity{0.0, 0.0, 0.0};  // m/frame, world frame
  double yaw_rate_deg = 0.0;                // degrees/frame about +y
};

struct ScenarioSpec {
  uint64_t seed = 1;
  int frames = 50;
  uint32_t image_width = 640;
  uint32_t image_height = 192;
  CameraIntrinsics intrinsics{460.0, 460.0, 320.0, 96.0};
  CameraMotionSpec camera;
  double camera_height = 1.6;  // meters above the ground plane
  std::vector<ObjectSpec> objects;

  // Corruption model, all driven by the seed.
  double p_oversplit = 0.0;   // split a proposal into two vertical halves
  double p_merge = 0.0;       // merge two overlapping proposals
  double p_dropout = 0.0;     // drop a proposal entirely
  int clutter_per_frame = 0;  // spurious proposals per frame
  int mask_jitter_px = 0;     // uniform boundary jitter
  double pos_noise_sigma = 0.0;  // meters, on emitted positions

  bool emit_depth = true;
  bool emit_flow = true;
  bool emit_pos_vel = true;  // write positions/velocities into proposals
};

// One generated sequence, in the exact shape the pipeline consumes.
struct SequenceBundle {
  uint32_t image_width = 0;
  uint32_t image_height = 0;
  CameraIntrinsics intrinsics;
  std::vector<FrameContext> contexts;  // ground plane left unset
  std::vector<std::vector<RawProposal>> proposals;
  std::vector<GroundTruthBox> ground_truth;
  std::vector<std::string> warnings;
};

// Deterministic rendering + corruption; the same spec always produces the
// same bundle.
SequenceBundle generate(const ScenarioSpec& spec);

// Fixed reference scenarios used by the test and benchmark suites:
// "single-static", "two-crossing", "occlusion-gap", "clutter-storm".
ScenarioSpec named_scenario(const std::string& name);
std::vector<std::string> scenario_names();

}  // namespace camot
