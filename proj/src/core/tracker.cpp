#include "core/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"

namespace camot {

namespace {

Matrix5d transition_matrix() {
  Matrix5d f = Matrix5d::Identity();
  f(0, 3) = 1.0;  // x += vx
  f(2, 4) = 1.0;  // z += vz
  return f;
}

Eigen::Matrix<double, 3, 5> measurement_matrix() {
  Eigen::Matrix<double, 3, 5> h = Eigen::Matrix<double, 3, 5>::Zero();
  h(0, 0) = h(1, 1) = h(2, 2) = 1.0;
  return h;
}

void check_psd(const Matrix5d& cov) {
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw InternalError("Kalman covariance lost symmetry");
  Eigen::SelfAdjointEigenSolver<Matrix5d> eig(cov,
                                              Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-9)
    throw InternalError("Kalman covariance lost positive semi-definiteness");
}

}  // namespace

KalmanState kalman_init(const Eigen::Vector3d& pos, const Eigen::Vector2d& vel,
                        const TrackerParams& params) {
  KalmanState s;
  s.mean << pos.x(), pos.y(), pos.z(), vel.x(), vel.y();
  s.cov.diagonal() << params.init_pos_var, params.init_pos_var,
      params.init_pos_var, params.init_vel_var, params.init_vel_var;
  return s;
}

KalmanState kalman_predict(const KalmanState& state,
                           const TrackerParams& params) {
  static const Matrix5d f = transition_matrix();
  KalmanState out;
  out.mean = f * state.mean;
  Matrix5d q = Matrix5d::Zero();
  q.diagonal() << params.process_noise_pos, params.process_noise_pos,
      params.process_noise_pos, params.process_noise_vel,
      params.process_noise_vel;
  out.cov = f * state.cov * f.transpose() + q;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

Eigen::Vector3d measurement_from_observation(
    const Eigen::Vector3d& obs_pos, const std::optional<GroundPlane>& plane) {
  if (!plane.has_value()) return obs_pos;
  Eigen::Vector3d m = obs_pos;
  m.y() = project_to_ground(obs_pos, *plane).y();
  return m;
}

Eigen::Matrix3d innovation_covariance(const KalmanState& predicted,
                                      const TrackerParams& params) {
  return predicted.cov.topLeftCorner<3, 3>() +
         params.obs_noise_var * Eigen::Matrix3d::Identity();
}

KalmanState kalman_correct(const KalmanState& state,
                           const Eigen::Vector3d& obs_pos,
                           const std::optional<GroundPlane>& plane,
                           const TrackerParams& params) {
  static const Eigen::Matrix<double, 3, 5> h = measurement_matrix();
  check_psd(state.cov);
  const Eigen::Vector3d z = measurement_from_observation(obs_pos, plane);
  const Eigen::Matrix3d r =
      params.obs_noise_var * Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d s = h * state.cov * h.transpose() + r;
  const Eigen::Matrix<double, 5, 3> k =
      state.cov * h.transpose() * s.inverse();

  KalmanState out;
  out.mean = state.mean + k * (z - h * state.mean);
  const Matrix5d ikh = Matrix5d::Identity() - k * h;
  out.cov = ikh * state.cov * ikh.transpose() + k * r * k.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  check_psd(out.cov);
  return out;
}

std::optional<AssociationResult> associate(
    const RleMask& predicted_mask, const KalmanState& predicted_state,
    const std::vector<Observation>& observations,
    const std::optional<GroundPlane>& plane, const TrackerParams& params,
    std::span<const std::optional<BBox2i>> observation_boxes) {
  if (observations.empty() || predicted_mask.is_empty()) return std::nullopt;

  std::vector<std::optional<BBox2i>> local_boxes;
  if (observation_boxes.size() != observations.size()) {
    local_boxes.reserve(observations.size());
    for (const Observation& obs : observations) local_boxes.push_back(bbox(obs.mask));
    observation_boxes = local_boxes;
  }

  const Eigen::Matrix3d s_inv =
      innovation_covariance(predicted_state, params).inverse();
  const Eigen::Vector3d predicted_pos = predicted_state.position();
  const auto predicted_box = bbox(predicted_mask);

  std::optional<AssociationResult> best;
  for (size_t i = 0; i < observations.size(); ++i) {
    const Observation& obs = observations[i];
    double mask_score = 0.0;
    if (!obs.mask.is_empty()) {
      const auto& obs_box = observation_boxes[i];
      if (predicted_box && obs_box && bbox_intersects(*predicted_box, *obs_box))
        mask_score = iou(predicted_mask, obs.mask);
    }
    if (mask_score == 0.0) continue;  // multiplicative veto

    const Eigen::Vector3d d =
        measurement_from_observation(obs.pos, plane) - predicted_pos;
    const double motion = std::exp(-0.5 * d.dot(s_inv * d));
    const double combined = mask_score * motion;
    if (!best || combined > best->score ||
        (combined == best->score && mask_score > best->mask_iou)) {
      best = AssociationResult{i, combined, mask_score, motion};
    }
  }
  if (!best || best->score < params.gate) return std::nullopt;
  return best;
}

double hypothesis_similarity(const Hypothesis& a, const Hypothesis& b) {
  const int lo = std::max(a.first_frame(), b.first_frame());
  const int hi = std::min(a.last_frame(), b.last_frame());
  if (lo > hi) return 0.0;
  double sum = 0.0;
  for (int t = lo; t <= hi; ++t) {
    const TrackFrame* fa = a.frame_at(t);
    const TrackFrame* fb = b.frame_at(t);
    if (fa->mask.is_empty() || fb->mask.is_empty()) continue;
    if (!bbox_intersects(fa->box, fb->box)) continue;
    sum += iou(fa->mask, fb->mask);
  }
  return sum / double(hi - lo + 1);
}

namespace {

// Object translation for one frame step, expressed in the source camera
// frame with the vertical component dropped.
Eigen::Vector2d planar_velocity_in_camera(const FrameContext& src,
                                          const Eigen::Vector2d& vel_world) {
  const Eigen::Vector3d v_cam =
      src.camera_to_world.rotation().transpose() *
      Eigen::Vector3d(vel_world.x(), 0.0, vel_world.y());
  return {v_cam.x(), v_cam.z()};
}

// Predicts `mask` (living in frame `src`) into frame `dst`, where
// `motion_cam` maps camera coordinates of src to camera coordinates of dst
// including the object's own displacement. Depth under the mask is gated
// around its median so occluders and background pixels do not smear the
// prediction. Falls back to a 2D shift by the projected centroid
// displacement when usable depth covers less than 20% of the mask.
MaskPrediction predict_mask_generic(const RleMask& mask,
                                    const FrameContext& src,
                                    const FrameContext& dst,
                                    const RigidTransform& motion_cam,
                                    const Eigen::Vector3d& src_pos_world,
                                    const Eigen::Vector3d& dst_pos_world) {
  if (src.depth) {
    auto pred =
        predict_mask_depth_gated(mask, *src.depth, src.intrinsics, motion_cam);
    if (pred.valid_depth_fraction >= 0.2) return pred;
  }
  const Eigen::Vector3d p_src = src.camera_to_world.inverse().apply(src_pos_world);
  const Eigen::Vector3d p_dst = dst.camera_to_world.inverse().apply(dst_pos_world);
  if (p_src.z() <= 1e-6 || p_dst.z() <= 1e-6)
    return {RleMask::empty_mask(mask.height(), mask.width()), 0.0};
  const Eigen::Vector2d uv_src = project_point(src.intrinsics, p_src);
  const Eigen::Vector2d uv_dst = project_point(dst.intrinsics, p_dst);
  const int dx = int(std::lround(uv_dst.x() - uv_src.x()));
  const int dy = int(std::lround(uv_dst.y() - uv_src.y()));
  return {translate_mask(mask, dx, dy), 0.0};
}

TrackFrame make_track_frame(int frame, const Observation& obs,
                            size_t obs_index, const RleMask& predicted,
                            const KalmanState& posterior,
                            const FrameContext& ctx) {
  TrackFrame f;
  f.frame = frame;
  f.mask = obs.mask;
  f.predicted_mask = predicted;
  f.is_predicted = false;
  f.obs_index = obs_index;
  f.obs_score = obs.score;
  f.phi_sim = predicted.is_empty() ? 0.0 : iou(predicted, obs.mask);
  f.class_scores = obs.class_scores;
  f.pos = posterior.position();
  f.vel = posterior.velocity();
  f.pos_cam = ctx.camera_to_world.inverse().apply(f.pos);
  f.box = bbox(f.mask).value_or(BBox2i{});
  return f;
}

TrackFrame make_predicted_frame(int frame, const RleMask& predicted,
                                const KalmanState& prior,
                                const FrameContext& ctx) {
  TrackFrame f;
  f.frame = frame;
  f.mask = predicted;
  f.predicted_mask = predicted;
  f.is_predicted = true;
  f.pos = prior.position();
  f.vel = prior.velocity();
  f.pos_cam = ctx.camera_to_world.inverse().apply(f.pos);
  f.box = bbox(f.mask).value_or(BBox2i{});
  return f;
}

}  // namespace

Hypothesis init_backward(const Observation& obs, size_t obs_index,
                         std::span<const FrameHistory> history,
                         const TrackerParams& params, int64_t id) {
  const FrameHistory& current = history.back();
  const int t = current.ctx.frame;

  // Backward association pass: walk old frames until the first miss.
  struct ChainLink {
    size_t history_index;
    size_t obs_index;
  };
  std::vector<ChainLink> chain;  // newest to oldest
  KalmanState bw = kalman_init(obs.pos, -obs.vel, params);
  RleMask cur_mask = obs.mask;
  const size_t cur_idx = history.size() - 1;
  for (int back = 1;
       back <= params.backward_window && int(cur_idx) - back >= 0; ++back) {
    const FrameHistory& newer = history[cur_idx - back + 1];
    const FrameHistory& older = history[cur_idx - back];
    bw = kalman_predict(bw, params);

    const Eigen::Vector2d fw_vel = -bw.velocity();
    const Eigen::Vector2d v_cam = planar_velocity_in_camera(older.ctx, fw_vel);
    const RigidTransform motion =
        RigidTransform::translation({-v_cam.x(), 0.0, -v_cam.y()})
            .compose(newer.ctx.ego_motion.inverse());
    const MaskPrediction pred = predict_mask_generic(
        cur_mask, newer.ctx, older.ctx, motion,
        bw.position() + Eigen::Vector3d(fw_vel.x(), 0.0, fw_vel.y()),
        bw.position());
    if (pred.mask.is_empty()) break;

    const auto match = associate(pred.mask, bw, older.observations,
                                 older.ctx.ground, params,
                                 older.observation_boxes);
    if (!match) break;  // stop at the first backward miss

    const Observation& matched = older.observations[match->index];
    bw = kalman_correct(bw, matched.pos, older.ctx.ground, params);
    cur_mask = matched.mask;
    chain.push_back({cur_idx - back, match->index});
  }

  // Forward replay through a fresh filter; the chain is contiguous.
  std::reverse(chain.begin(), chain.end());

  Hypothesis h;
  h.id = id;
  h.creation_frame = t;

  const FrameHistory& first =
      chain.empty() ? current : history[chain.front().history_index];
  const size_t first_obs_index =
      chain.empty() ? obs_index : chain.front().obs_index;
  const Observation& first_obs = first.observations[first_obs_index];

  h.state = kalman_init(first_obs.pos, first_obs.vel, params);
  {
    TrackFrame f = make_track_frame(first.ctx.frame, first_obs,
                                    first_obs_index, first_obs.mask, h.state,
                                    first.ctx);
    h.track.push_back(std::move(f));
  }

  auto replay = [&](const FrameHistory& prev, const FrameHistory& cur,
                    const Observation& cur_obs, size_t cur_obs_index) {
    KalmanState prio = kalman_predict(h.state, params);
    const Eigen::Vector2d v_cam =
        planar_velocity_in_camera(prev.ctx, prio.velocity());
    const RigidTransform motion = cur.ctx.ego_motion.compose(
        RigidTransform::translation({v_cam.x(), 0.0, v_cam.y()}));
    const MaskPrediction pred = predict_mask_generic(
        h.track.back().mask, prev.ctx, cur.ctx, motion, h.track.back().pos,
        prio.position());
    h.state = kalman_correct(prio, cur_obs.pos, cur.ctx.ground, params);
    h.track.push_back(make_track_frame(cur.ctx.frame, cur_obs, cur_obs_index,
                                       pred.mask, h.state, cur.ctx));
  };

  for (size_t k = 1; k < chain.size(); ++k) {
    const FrameHistory& prev = history[chain[k - 1].history_index];
    const FrameHistory& cur = history[chain[k].history_index];
    replay(prev, cur, cur.observations[chain[k].obs_index],
           chain[k].obs_index);
  }
  if (!chain.empty()) {
    const FrameHistory& prev = history[chain.back().history_index];
    replay(prev, current, obs, obs_index);
  }
  return h;
}

Tracker::Tracker(TrackerParams params, StrengthFn strength)
    : params_(std::move(params)), strength_(std::move(strength)) {}

MaskPrediction Tracker::predict_into_frame(const RleMask& last_mask,
                                           const Eigen::Vector3d& last_pos_world,
                                           const KalmanState& prio,
                                           const FrameContext& prev,
                                           const FrameContext& cur) const {
  const Eigen::Vector2d v_cam =
      planar_velocity_in_camera(prev, prio.velocity());
  const RigidTransform motion = cur.ego_motion.compose(
      RigidTransform::translation({v_cam.x(), 0.0, v_cam.y()}));
  return predict_mask_generic(last_mask, prev, cur, motion, last_pos_world,
                              prio.position());
}

StepStats Tracker::step(const FrameContext& ctx,
                        const std::vector<Observation>& observations) {
  if (!history_.empty() && ctx.frame != history_.back().ctx.frame + 1)
    throw InputError("Tracker::step: frames must arrive consecutively");
  StepStats stats;
  stats.frame = ctx.frame;

  std::vector<std::optional<BBox2i>> obs_boxes;
  obs_boxes.reserve(observations.size());
  for (const Observation& obs : observations) obs_boxes.push_back(bbox(obs.mask));

  // (1) Extend every live hypothesis: predict, associate, correct or carry
  // the prediction.
  if (!history_.empty()) {
    const FrameContext& prev = history_.back().ctx;
    for (auto& h : hypotheses_) {
      ++stats.extended;
      const KalmanState prio = kalman_predict(h.state, params_);
      const MaskPrediction pred = predict_into_frame(
          h.track.back().mask, h.track.back().pos, prio, prev, ctx);
      if (pred.mask.is_empty()) {
        h.terminated = true;  // left the image
        continue;
      }
      const auto match = associate(pred.mask, prio, observations, ctx.ground,
                                   params_, obs_boxes);
      if (match) {
        const Observation& obs = observations[match->index];
        try {
          h.state = kalman_correct(prio, obs.pos, ctx.ground, params_);
        } catch (const InternalError& e) {
          stats.warnings.push_back("hypothesis " + std::to_string(h.id) +
                                   " aborted: " + e.what());
          h.terminated = true;
          continue;
        }
        h.consecutive_misses = 0;
        h.track.push_back(make_track_frame(ctx.frame, obs, match->index,
                                           pred.mask, h.state, ctx));
        ++stats.associated;
      } else {
        h.state = prio;
        ++h.consecutive_misses;
        h.track.push_back(
            make_predicted_frame(ctx.frame, pred.mask, prio, ctx));
        if (h.consecutive_misses > params_.max_misses) h.terminated = true;
      }
    }
    const size_t before = hypotheses_.size();
    std::erase_if(hypotheses_, [](const Hypothesis& h) { return h.terminated; });
    stats.terminated = before - hypotheses_.size();
  }

  // (2) Start a hypothesis from every observation of this frame.
  history_.push_back(FrameHistory{ctx, observations, std::move(obs_boxes)});
  while (int(history_.size()) > params_.backward_window + 1)
    history_.pop_front();
  const std::vector<FrameHistory> snapshot(history_.begin(), history_.end());
  for (size_t i = 0; i < observations.size(); ++i) {
    if (observations[i].mask.is_empty()) continue;
    hypotheses_.push_back(
        init_backward(observations[i], i, snapshot, params_, next_id_++));
    ++stats.created;
  }

  // (3) Prune duplicates among hypotheses old enough to have diverged.
  stats.pruned = hypothesis_nms(hypotheses_, ctx.frame, params_, strength_);

  // Newest first. Near-duplicates tie in selection energy, and the
  // lexicographic tie-break over the indicator vector favors later indices,
  // so this order pins ties to the oldest id and keeps reported identities
  // stable.
  std::sort(hypotheses_.begin(), hypotheses_.end(),
            [](const Hypothesis& a, const Hypothesis& b) { return a.id > b.id; });
  return stats;
}

size_t hypothesis_nms(
    std::vector<Hypothesis>& hypotheses, int t, const TrackerParams& params,
    const std::function<double(const Hypothesis&, int)>& strength_fn) {
  std::vector<size_t> eligible;
  for (size_t i = 0; i < hypotheses.size(); ++i)
    if (hypotheses[i].creation_frame < t - params.tau) eligible.push_back(i);
  if (eligible.size() < 2) return 0;

  std::vector<double> strength(eligible.size());
  for (size_t k = 0; k < eligible.size(); ++k)
    strength[k] = strength_fn(hypotheses[eligible[k]], t);
  std::vector<size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (strength[a] != strength[b]) return strength[a] > strength[b];
    return hypotheses[eligible[a]].id < hypotheses[eligible[b]].id;
  });

  std::vector<bool> suppressed(eligible.size(), false);
  for (size_t a = 0; a < order.size(); ++a) {
    if (suppressed[order[a]]) continue;
    const Hypothesis& keeper = hypotheses[eligible[order[a]]];
    for (size_t b = a + 1; b < order.size(); ++b) {
      if (suppressed[order[b]]) continue;
      const Hypothesis& other = hypotheses[eligible[order[b]]];
      if (hypothesis_similarity(keeper, other) > params.nms_similarity)
        suppressed[order[b]] = true;
    }
  }

  std::vector<bool> drop(hypotheses.size(), false);
  size_t pruned = 0;
  for (size_t k = 0; k < eligible.size(); ++k) {
    if (suppressed[k]) {
      drop[eligible[k]] = true;
      ++pruned;
    }
  }
  if (pruned > 0) {
    std::vector<Hypothesis> kept;
    kept.reserve(hypotheses.size() - pruned);
    for (size_t i = 0; i < hypotheses.size(); ++i)
      if (!drop[i]) kept.push_back(std::move(hypotheses[i]));
    hypotheses = std::move(kept);
  }
  return pruned;
}

}  // namespace camot
