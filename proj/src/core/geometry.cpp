#include "core/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"

namespace camot {

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation,
                               const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  const Eigen::Matrix3d should_be_identity =
      rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
  if (should_be_identity.cwiseAbs().maxCoeff() > 1e-6 ||
      std::abs(rotation.determinant() - 1.0) > 1e-6)
    throw InputError("RigidTransform: rotation is not orthonormal with det +1");
}

RigidTransform RigidTransform::translation(const Eigen::Vector3d& t) {
  RigidTransform out;
  out.translation_ = t;
  return out;
}

RigidTransform RigidTransform::rotation_y(double angle_rad) {
  RigidTransform out;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  out.rotation_ << c, 0, s, 0, 1, 0, -s, 0, c;
  return out;
}

RigidTransform RigidTransform::compose(const RigidTransform& inner) const {
  RigidTransform out;
  out.rotation_ = rotation_ * inner.rotation_;
  out.translation_ = rotation_ * inner.translation_ + translation_;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation_ = rotation_.transpose();
  out.translation_ = -(rotation_.transpose() * translation_);
  return out;
}

GroundPlane transform_plane(const GroundPlane& plane,
                            const RigidTransform& src_to_dst) {
  GroundPlane out;
  out.normal = src_to_dst.rotation() * plane.normal;
  out.offset = plane.offset - out.normal.dot(src_to_dst.translation_vector());
  return out;
}

Eigen::Vector3d project_to_ground(const Eigen::Vector3d& p,
                                  const GroundPlane& plane) {
  return p - plane.signed_distance(p) * plane.normal;
}

DepthMap::DepthMap(uint32_t height, uint32_t width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height_ == 0 || width_ == 0) throw InputError("DepthMap: empty grid");
  if (data_.size() != size_t(height_) * width_)
    throw InputError("DepthMap: data size mismatch");
}

DepthMap DepthMap::invalid(uint32_t height, uint32_t width) {
  return DepthMap(height, width,
                  std::vector<float>(size_t(height) * width,
                                     std::numeric_limits<float>::quiet_NaN()));
}

FlowMap::FlowMap(uint32_t height, uint32_t width,
                 std::vector<float> xz_interleaved)
    : height_(height), width_(width), data_(std::move(xz_interleaved)) {
  if (height_ == 0 || width_ == 0) throw InputError("FlowMap: empty grid");
  if (data_.size() != 2 * size_t(height_) * width_)
    throw InputError("FlowMap: data size mismatch");
}

static GroundPlane plane_from_normal_point(const Eigen::Vector3d& normal,
                                           const Eigen::Vector3d& point) {
  GroundPlane plane;
  plane.normal = normal.normalized();
  plane.offset = -plane.normal.dot(point);
  // Orientation convention: the camera center (origin of the fit frame) lies
  // on the positive side.
  if (plane.offset < 0.0) {
    plane.normal = -plane.normal;
    plane.offset = -plane.offset;
  }
  return plane;
}

std::optional<PlaneFit> fit_ground_plane(std::span<const Eigen::Vector3d> points,
                                         int iterations,
                                         double inlier_threshold,
                                         uint64_t seed) {
  if (points.size() < 3) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> pick(0, points.size() - 1);

  GroundPlane best;
  size_t best_inliers = 0;
  bool found = false;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::Vector3d& a = points[pick(rng)];
    const Eigen::Vector3d& b = points[pick(rng)];
    const Eigen::Vector3d& c = points[pick(rng)];
    const Eigen::Vector3d n = (b - a).cross(c - a);
    if (n.norm() < 1e-12) continue;  // degenerate sample
    const GroundPlane candidate = plane_from_normal_point(n, a);
    size_t inliers = 0;
    for (const auto& p : points)
      if (std::abs(candidate.signed_distance(p)) <= inlier_threshold) ++inliers;
    if (!found || inliers > best_inliers) {
      best = candidate;
      best_inliers = inliers;
      found = true;
    }
  }
  if (!found) return std::nullopt;

  // Least-squares refit on the inliers of the best sampled plane.
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::vector<const Eigen::Vector3d*> inliers;
  inliers.reserve(best_inliers);
  for (const auto& p : points) {
    if (std::abs(best.signed_distance(p)) <= inlier_threshold) {
      inliers.push_back(&p);
      centroid += p;
    }
  }
  if (inliers.size() >= 3) {
    centroid /= double(inliers.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const auto* p : inliers) {
      const Eigen::Vector3d d = *p - centroid;
      scatter += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eigen(scatter);
    const Eigen::Vector3d n = eigen.eigenvectors().col(0);
    if (n.norm() > 1e-12) {
      best = plane_from_normal_point(n, centroid);
      size_t refit_inliers = 0;
      for (const auto& p : points)
        if (std::abs(best.signed_distance(p)) <= inlier_threshold)
          ++refit_inliers;
      best_inliers = refit_inliers;
    }
  }
  return PlaneFit{best, best_inliers};
}

std::vector<Eigen::Vector3d> lift_mask(const RleMask& mask,
                                       const DepthMap& depth,
                                       const CameraIntrinsics& k) {
  if (mask.height() != depth.height() || mask.width() != depth.width())
    throw InputError("lift_mask: mask/depth dimension mismatch");
  std::vector<Eigen::Vector3d> out;
  out.reserve(size_t(mask.area()));
  const uint32_t w = mask.width();
  uint64_t pos = 0;
  const auto& runs = mask.runs();
  for (size_t i = 0; i < runs.size(); ++i) {
    if (i & 1) {
      for (uint32_t j = 0; j < runs[i]; ++j) {
        const uint32_t idx = uint32_t(pos + j);
        const uint32_t r = idx / w, c = idx % w;
        if (depth.valid_at(r, c))
          out.push_back(unproject_pixel(k, c, r, depth.at(r, c)));
      }
    }
    pos += runs[i];
  }
  return out;
}

namespace {

MaskPrediction predict_mask_impl(const RleMask& mask, const DepthMap& depth,
                                 const CameraIntrinsics& k,
                                 const RigidTransform& motion, double depth_lo,
                                 double depth_hi) {
  if (mask.height() != depth.height() || mask.width() != depth.width())
    throw InputError("predict_mask: mask/depth dimension mismatch");
  const uint32_t w = mask.width(), h = mask.height();
  std::vector<uint32_t> pixels;
  pixels.reserve(size_t(mask.area()));
  uint64_t valid = 0;
  uint64_t pos = 0;
  const auto& runs = mask.runs();
  for (size_t i = 0; i < runs.size(); ++i) {
    if (i & 1) {
      for (uint32_t j = 0; j < runs[i]; ++j) {
        const uint32_t idx = uint32_t(pos + j);
        const uint32_t r = idx / w, c = idx % w;
        if (!depth.valid_at(r, c)) continue;
        const double d = depth.at(r, c);
        if (d < depth_lo || d > depth_hi) continue;
        ++valid;
        const Eigen::Vector3d p = motion.apply(unproject_pixel(k, c, r, d));
        if (p.z() <= 1e-6) continue;  // behind or at the camera
        const Eigen::Vector2d uv = project_point(k, p);
        const long u = std::lround(uv.x()), v = std::lround(uv.y());
        if (u < 0 || v < 0 || u >= long(w) || v >= long(h)) continue;
        pixels.push_back(uint32_t(v) * w + uint32_t(u));
      }
    }
    pos += runs[i];
  }
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  MaskPrediction out{RleMask::from_sorted_indices(h, w, pixels), 0.0};
  if (mask.area() > 0) out.valid_depth_fraction = double(valid) / double(mask.area());
  return out;
}

}  // namespace

MaskPrediction predict_mask_with_transform(const RleMask& mask,
                                           const DepthMap& depth,
                                           const CameraIntrinsics& k,
                                           const RigidTransform& motion) {
  return predict_mask_impl(mask, depth, k, motion,
                           -std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity());
}

MaskPrediction predict_mask_depth_gated(const RleMask& mask,
                                        const DepthMap& depth,
                                        const CameraIntrinsics& k,
                                        const RigidTransform& motion,
                                        double rel_band, double min_band) {
  if (mask.height() != depth.height() || mask.width() != depth.width())
    throw InputError("predict_mask: mask/depth dimension mismatch");
  std::vector<double> depths;
  depths.reserve(size_t(mask.area()));
  const uint32_t w = mask.width();
  for (const uint32_t idx : mask.foreground_indices()) {
    const uint32_t r = idx / w, c = idx % w;
    if (depth.valid_at(r, c)) depths.push_back(depth.at(r, c));
  }
  if (depths.empty())
    return {RleMask::empty_mask(mask.height(), mask.width()), 0.0};
  std::nth_element(depths.begin(), depths.begin() + depths.size() / 2,
                   depths.end());
  const double median = depths[depths.size() / 2];
  const double band = std::max(min_band, rel_band * median);
  return predict_mask_impl(mask, depth, k, motion, median - band,
                           median + band);
}

MaskPrediction predict_mask(const RleMask& mask, const DepthMap& depth,
                            const CameraIntrinsics& k,
                            const RigidTransform& t_ego,
                            const Eigen::Vector2d& planar_velocity) {
  const RigidTransform motion = t_ego.compose(RigidTransform::translation(
      {planar_velocity.x(), 0.0, planar_velocity.y()}));
  return predict_mask_with_transform(mask, depth, k, motion);
}

RleMask translate_mask(const RleMask& mask, int dx, int dy) {
  const int w = int(mask.width()), h = int(mask.height());
  std::vector<uint32_t> pixels;
  pixels.reserve(size_t(mask.area()));
  for (const uint32_t idx : mask.foreground_indices()) {
    const int r = int(idx) / w + dy, c = int(idx) % w + dx;
    if (r < 0 || c < 0 || r >= h || c >= w) continue;
    pixels.push_back(uint32_t(r) * uint32_t(w) + uint32_t(c));
  }
  return RleMask::from_sorted_indices(mask.height(), mask.width(), pixels);
}

}  // namespace camot
