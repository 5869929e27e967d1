#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "core/rle_mask.hpp"

namespace camot {

// Pinhole camera: u = fx*x/z + cx, v = fy*y/z + cy.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

inline Eigen::Vector2d project_point(const CameraIntrinsics& k,
                                     const Eigen::Vector3d& p) {
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

inline Eigen::Vector3d unproject_pixel(const CameraIntrinsics& k, double u,
                                       double v, double depth) {
  return {(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth};
}

// Proper rigid motion. apply() maps point coordinates from the source frame
// to the destination frame.
class RigidTransform {
 public:
  RigidTransform()
      : rotation_(Eigen::Matrix3d::Identity()),
        translation_(Eigen::Vector3d::Zero()) {}

  // Throws InputError unless rotation is orthonormal with det +1 (1e-6).
  RigidTransform(const Eigen::Matrix3d& rotation,
                 const Eigen::Vector3d& translation);

  static RigidTransform translation(const Eigen::Vector3d& t);
  static RigidTransform rotation_y(double angle_rad);

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation_ * p + translation_;
  }

  // (*this) ∘ inner: applies `inner` first.
  RigidTransform compose(const RigidTransform& inner) const;
  RigidTransform inverse() const;

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation_vector() const { return translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Plane {x : normal·x + offset = 0} with ||normal|| = 1, oriented so the
// observer side (camera center at fit time) has positive signed distance.
struct GroundPlane {
  Eigen::Vector3d normal{0.0, -1.0, 0.0};
  double offset = 0.0;

  double signed_distance(const Eigen::Vector3d& p) const {
    return normal.dot(p) + offset;
  }
};

// Re-expresses a plane in the destination frame of `src_to_dst`.
GroundPlane transform_plane(const GroundPlane& plane,
                            const RigidTransform& src_to_dst);

// Orthogonal projection of p onto the plane.
Eigen::Vector3d project_to_ground(const Eigen::Vector3d& p,
                                  const GroundPlane& plane);

// Per-pixel depth in meters; non-finite or <= 0 marks invalid pixels.
class DepthMap {
 public:
  DepthMap(uint32_t height, uint32_t width, std::vector<float> data);
  static DepthMap invalid(uint32_t height, uint32_t width);

  uint32_t height() const { return height_; }
  uint32_t width() const { return width_; }
  float at(uint32_t r, uint32_t c) const { return data_[size_t(r) * width_ + c]; }
  float& at(uint32_t r, uint32_t c) { return data_[size_t(r) * width_ + c]; }
  bool valid_at(uint32_t r, uint32_t c) const {
    const float d = at(r, c);
    return std::isfinite(d) && d > 0.0f;
  }
  const std::vector<float>& data() const { return data_; }

 private:
  uint32_t height_ = 0;
  uint32_t width_ = 0;
  std::vector<float> data_;
};

// Per-pixel planar scene displacement (x, z) in meters/frame, world frame.
// Non-finite components mark invalid pixels.
class FlowMap {
 public:
  FlowMap(uint32_t height, uint32_t width, std::vector<float> xz_interleaved);

  uint32_t height() const { return height_; }
  uint32_t width() const { return width_; }
  Eigen::Vector2d at(uint32_t r, uint32_t c) const {
    const size_t i = 2 * (size_t(r) * width_ + c);
    return {data_[i], data_[i + 1]};
  }
  bool valid_at(uint32_t r, uint32_t c) const {
    const size_t i = 2 * (size_t(r) * width_ + c);
    return std::isfinite(data_[i]) && std::isfinite(data_[i + 1]);
  }
  const std::vector<float>& data() const { return data_; }

 private:
  uint32_t height_ = 0;
  uint32_t width_ = 0;
  std::vector<float> data_;
};

struct PlaneFit {
  GroundPlane plane;
  size_t inlier_count = 0;
};

// RANSAC plane fit: samples triples, keeps the plane with the most inliers,
// then refits to the inliers by least squares. Deterministic for a fixed
// seed. Returns nullopt for <3 points or all-degenerate samples.
std::optional<PlaneFit> fit_ground_plane(std::span<const Eigen::Vector3d> points,
                                         int iterations = 200,
                                         double inlier_threshold = 0.05,
                                         uint64_t seed = 0x9e3779b9u);

// One 3D point per foreground pixel with valid depth (inverse pinhole).
std::vector<Eigen::Vector3d> lift_mask(const RleMask& mask,
                                       const DepthMap& depth,
                                       const CameraIntrinsics& k);

struct MaskPrediction {
  RleMask mask;
  // Fraction of foreground pixels that had valid depth (0 for empty mask).
  double valid_depth_fraction = 0.0;
};

// Lifts the mask into 3D, applies `motion` (in the camera frame the depth
// map belongs to), reprojects and splats to the nearest pixel. Points that
// leave the image are dropped; no hole filling.
MaskPrediction predict_mask_with_transform(const RleMask& mask,
                                           const DepthMap& depth,
                                           const CameraIntrinsics& k,
                                           const RigidTransform& motion);

// Motion composed as t_ego ∘ translation(vx, 0, vz): the object moves on the
// ground plane by its planar velocity, then the camera moves.
MaskPrediction predict_mask(const RleMask& mask, const DepthMap& depth,
                            const CameraIntrinsics& k,
                            const RigidTransform& t_ego,
                            const Eigen::Vector2d& planar_velocity);

// Variant that ignores mask pixels whose depth strays from the mask's median
// depth by more than max(min_band, rel_band * median). Mask pixels bleeding
// onto occluders or the background otherwise smear the prediction; such
// pixels also do not count as valid depth, so heavy occlusion triggers the
// caller's 2D fallback.
MaskPrediction predict_mask_depth_gated(const RleMask& mask,
                                        const DepthMap& depth,
                                        const CameraIntrinsics& k,
                                        const RigidTransform& motion,
                                        double rel_band = 0.1,
                                        double min_band = 1.5);

// Shifts the whole mask by integer pixels, dropping pixels that leave the
// image. 2D fallback when depth is unusable.
RleMask translate_mask(const RleMask& mask, int dx, int dy);

}  // namespace camot
