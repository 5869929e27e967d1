#include "core/observations.hpp"

#include <algorithm>
#include <numeric>

#include "core/errors.hpp"

namespace camot {

static double median_inplace(std::vector<double>& v) {
  const size_t n = v.size();
  const size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lower);
  }
  return m;
}

std::vector<RawProposal> nms_proposals(const std::vector<RawProposal>& proposals,
                                       double iou_threshold) {
  std::vector<size_t> order(proposals.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return proposals[a].score > proposals[b].score;
  });

  std::vector<RawProposal> kept;
  for (const size_t cand : order) {
    bool suppressed = false;
    for (const RawProposal& survivor : kept) {
      if (iou(proposals[cand].mask, survivor.mask) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(proposals[cand]);
  }
  return kept;
}

GeometricFilterResult geometric_filter(std::vector<Observation> observations,
                                       const std::optional<GroundPlane>& ground,
                                       double height_min, double height_max) {
  GeometricFilterResult out;
  if (!ground.has_value()) {
    out.kept = std::move(observations);
    out.skipped_no_plane = true;
    return out;
  }
  for (size_t i = 0; i < observations.size(); ++i) {
    const double h = height_above_ground(observations[i].pos, *ground);
    if (h >= height_min && h <= height_max)
      out.kept.push_back(std::move(observations[i]));
    else
      out.removed_indices.push_back(i);
  }
  return out;
}

std::optional<std::pair<Eigen::Vector3d, Eigen::Vector2d>> extract_pos_vel(
    const RleMask& mask, const FrameContext& ctx, int min_depth_pixels) {
  if (!ctx.depth) return std::nullopt;
  const DepthMap& depth = *ctx.depth;
  if (mask.height() != depth.height() || mask.width() != depth.width())
    throw InputError("extract_pos_vel: mask/depth dimension mismatch");

  std::vector<double> xs, ys, zs;
  std::vector<double> fx, fz;
  const uint32_t w = mask.width();
  for (const uint32_t idx : mask.foreground_indices()) {
    const uint32_t r = idx / w, c = idx % w;
    if (depth.valid_at(r, c)) {
      const Eigen::Vector3d p =
          unproject_pixel(ctx.intrinsics, c, r, depth.at(r, c));
      xs.push_back(p.x());
      ys.push_back(p.y());
      zs.push_back(p.z());
    }
    if (ctx.flow && ctx.flow->valid_at(r, c)) {
      const Eigen::Vector2d f = ctx.flow->at(r, c);
      fx.push_back(f.x());
      fz.push_back(f.y());
    }
  }
  if (int(xs.size()) < min_depth_pixels) return std::nullopt;

  const Eigen::Vector3d pos_cam(median_inplace(xs), median_inplace(ys),
                                median_inplace(zs));
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
  if (!fx.empty()) vel = {median_inplace(fx), median_inplace(fz)};
  return std::make_pair(ctx.camera_to_world.apply(pos_cam), vel);
}

ObservationSet build_observation_set(const std::vector<RawProposal>& raw,
                                     const FrameContext& ctx,
                                     const ObservationParams& params) {
  ObservationSet out;

  // Track original indices through NMS for the rejection log.
  std::vector<size_t> order(raw.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return raw[a].score > raw[b].score;
  });
  std::vector<size_t> survivors;
  for (const size_t cand : order) {
    bool suppressed = false;
    for (const size_t kept : survivors) {
      if (iou(raw[cand].mask, raw[kept].mask) > params.nms_iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (suppressed)
      out.rejections.push_back({cand, "nms"});
    else
      survivors.push_back(cand);
  }

  // 3D position/velocity: precomputed values pass through, otherwise they
  // are derived from depth and flow.
  std::vector<Observation> candidates;
  candidates.reserve(survivors.size());
  std::vector<size_t> candidate_src;
  for (const size_t i : survivors) {
    const RawProposal& p = raw[i];
    if (p.mask.is_empty()) {
      out.rejections.push_back({i, "empty_mask"});
      continue;
    }
    Observation obs;
    obs.mask = p.mask;
    obs.score = p.score;
    obs.class_scores = p.class_scores;
    if (p.pos.has_value()) {
      obs.pos = *p.pos;
      obs.vel = p.vel.value_or(Eigen::Vector2d::Zero());
    } else {
      const auto pv = extract_pos_vel(p.mask, ctx, params.min_depth_pixels);
      if (!pv.has_value()) {
        out.rejections.push_back({i, "too_few_depth_pixels"});
        continue;
      }
      obs.pos = pv->first;
      obs.vel = pv->second;
    }
    candidates.push_back(std::move(obs));
    candidate_src.push_back(i);
  }

  auto filtered = geometric_filter(std::move(candidates), ctx.ground,
                                   params.height_min, params.height_max);
  out.height_filter_skipped = filtered.skipped_no_plane;
  std::vector<size_t> kept_src;
  {
    size_t r = 0;
    for (size_t local = 0; local < candidate_src.size(); ++local) {
      if (r < filtered.removed_indices.size() &&
          filtered.removed_indices[r] == local) {
        out.rejections.push_back({candidate_src[local], "height_band"});
        ++r;
      } else {
        kept_src.push_back(candidate_src[local]);
      }
    }
  }

  // Cap at top_k; the candidates are already score-sorted by construction.
  out.observations = std::move(filtered.kept);
  if (int(out.observations.size()) > params.top_k) {
    for (size_t i = params.top_k; i < out.observations.size(); ++i)
      out.rejections.push_back({kept_src[i], "truncated_top_k"});
    out.observations.resize(params.top_k);
  }
  return out;
}

}  // namespace camot
