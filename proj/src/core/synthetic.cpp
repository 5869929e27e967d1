#include "core/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "core/errors.hpp"

namespace camot {

namespace {

constexpr double kMaxGroundDepth = 150.0;  // meters; horizon cutoff
constexpr double kMinVisibleZ = 0.5;
constexpr size_t kMinVisiblePixels = 40;

uint64_t mix_seed(uint64_t seed, uint64_t frame) {
  // splitmix64 step over the combined value
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (frame + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

struct PixelRect {
  int c0 = 0, c1 = -1, r0 = 0, r1 = -1;
  double z = 0.0;  // camera depth of the surface
  bool empty() const { return c1 < c0 || r1 < r0; }
};

// Proposal under construction: sorted visible-pixel indices plus the 3D
// attributes the tracker will see.
struct LocalProposal {
  std::vector<uint32_t> pixels;  // sorted row-major indices
  BBox2i box;
  int owner = -1;  // object index, -1 for clutter
  Eigen::Vector3d pos_cam = Eigen::Vector3d::Zero();
  Eigen::Vector2d vel_world = Eigen::Vector2d::Zero();
  std::string label;
  bool merged = false;
  bool fragment = false;  // over-segmentation half
};

BBox2i box_of_pixels(const std::vector<uint32_t>& pixels, uint32_t width) {
  BBox2i box;
  if (pixels.empty()) return box;
  int min_r = INT32_MAX, max_r = -1, min_c = INT32_MAX, max_c = -1;
  for (const uint32_t idx : pixels) {
    const int r = int(idx / width), c = int(idx % width);
    min_r = std::min(min_r, r);
    max_r = std::max(max_r, r);
    min_c = std::min(min_c, c);
    max_c = std::max(max_c, c);
  }
  return {min_c, min_r, max_c - min_c + 1, max_r - min_r + 1};
}

// Per-coordinate median pixel lifted at the surface depth, mirroring how
// observation positions are derived from depth.
Eigen::Vector3d pixels_center_cam(const CameraIntrinsics& k,
                                  const std::vector<uint32_t>& pixels,
                                  uint32_t width, double z) {
  const size_t n = pixels.size();
  // pixels are sorted row-major, so rows are already ordered
  double row = double(pixels[n / 2] / width);
  if (n % 2 == 0) row = 0.5 * (row + double(pixels[n / 2 - 1] / width));
  std::vector<uint32_t> cols;
  cols.reserve(n);
  for (const uint32_t px : pixels) cols.push_back(px % width);
  std::nth_element(cols.begin(), cols.begin() + n / 2, cols.end());
  double col = double(cols[n / 2]);
  if (n % 2 == 0)
    col = 0.5 * (col + double(*std::max_element(cols.begin(), cols.begin() + n / 2)));
  return unproject_pixel(k, col, row, z);
}

std::optional<PixelRect> project_billboard(const CameraIntrinsics& k,
                                           uint32_t width, uint32_t height,
                                           const Eigen::Vector3d& center_cam,
                                           double w_m, double h_m) {
  if (center_cam.z() < kMinVisibleZ) return std::nullopt;
  const Eigen::Vector2d uv = project_point(k, center_cam);
  const double wpx = 0.5 * w_m * k.fx / center_cam.z();
  const double hpx = 0.5 * h_m * k.fy / center_cam.z();
  PixelRect rect;
  rect.c0 = std::max(0, int(std::ceil(uv.x() - wpx)));
  rect.c1 = std::min(int(width) - 1, int(std::floor(uv.x() + wpx)));
  rect.r0 = std::max(0, int(std::ceil(uv.y() - hpx)));
  rect.r1 = std::min(int(height) - 1, int(std::floor(uv.y() + hpx)));
  rect.z = center_cam.z();
  if (rect.empty()) return std::nullopt;
  return rect;
}



}  // namespace

SequenceBundle generate(const ScenarioSpec& spec) {
  if (spec.frames <= 0) throw InputError("ScenarioSpec: frames must be > 0");
  if (spec.image_width == 0 || spec.image_height == 0)
    throw InputError("ScenarioSpec: empty image");

  SequenceBundle bundle;
  bundle.image_width = spec.image_width;
  bundle.image_height = spec.image_height;
  bundle.intrinsics = spec.intrinsics;

  const GroundPlane world_plane{{0.0, -1.0, 0.0}, spec.camera_height};
  const double yaw_rate = spec.camera.yaw_rate_deg * M_PI / 180.0;

  std::vector<Eigen::Vector2d> object_pos(spec.objects.size());
  std::vector<Eigen::Vector2d> object_vel(spec.objects.size());
  std::vector<size_t> visible_frames(spec.objects.size(), 0);
  for (size_t i = 0; i < spec.objects.size(); ++i) {
    object_pos[i] = spec.objects[i].start;
    object_vel[i] = spec.objects[i].velocity;
  }

  RigidTransform prev_world_to_cam;
  for (int t = 0; t < spec.frames; ++t) {
    // camera pose
    const RigidTransform cam_to_world =
        RigidTransform::translation(spec.camera.velocity * double(t))
            .compose(RigidTransform::rotation_y(yaw_rate * double(t)));
    const RigidTransform world_to_cam = cam_to_world.inverse();

    FrameContext ctx;
    ctx.frame = t;
    ctx.camera_to_world = cam_to_world;
    ctx.ego_motion = t == 0 ? RigidTransform()
                            : world_to_cam.compose(prev_world_to_cam.inverse());
    prev_world_to_cam = world_to_cam;
    ctx.intrinsics = spec.intrinsics;
    ctx.image_width = spec.image_width;
    ctx.image_height = spec.image_height;

    // velocity schedule
    for (size_t i = 0; i < spec.objects.size(); ++i) {
      for (const auto& [frame, v] : spec.objects[i].velocity_changes)
        if (frame == t) object_vel[i] = v;
    }

    // object rectangles
    std::vector<std::optional<PixelRect>> rects(spec.objects.size());
    std::vector<Eigen::Vector3d> centers_cam(spec.objects.size());
    for (size_t i = 0; i < spec.objects.size(); ++i) {
      const ObjectSpec& obj = spec.objects[i];
      const Eigen::Vector3d center_world(object_pos[i].x(),
                                         spec.camera_height - 0.5 * obj.height,
                                         object_pos[i].y());
      centers_cam[i] = world_to_cam.apply(center_world);
      rects[i] = project_billboard(spec.intrinsics, spec.image_width,
                                   spec.image_height, centers_cam[i],
                                   obj.width, obj.height);
    }

    // depth and owner buffers: ground everywhere the ray hits it, nearest
    // surface wins. Visibility masks need these even when no depth/flow
    // files are emitted.
    std::vector<float> depth(size_t(spec.image_width) * spec.image_height,
                             std::numeric_limits<float>::quiet_NaN());
    std::vector<int> owner(depth.size(), -2);  // -2 sky, -1 ground
    {
      const GroundPlane plane_cam = transform_plane(world_plane, world_to_cam);
      for (uint32_t r = 0; r < spec.image_height; ++r) {
        for (uint32_t c = 0; c < spec.image_width; ++c) {
          const Eigen::Vector3d dir((c - spec.intrinsics.cx) / spec.intrinsics.fx,
                                    (r - spec.intrinsics.cy) / spec.intrinsics.fy,
                                    1.0);
          const double denom = plane_cam.normal.dot(dir);
          if (std::abs(denom) > 1e-12) {
            const double s = -plane_cam.offset / denom;
            if (s > 0.0 && s <= kMaxGroundDepth) {
              depth[size_t(r) * spec.image_width + c] = float(s);
              owner[size_t(r) * spec.image_width + c] = -1;
            }
          }
        }
      }
      for (size_t i = 0; i < spec.objects.size(); ++i) {
        if (!rects[i]) continue;
        const PixelRect& rect = *rects[i];
        for (int r = rect.r0; r <= rect.r1; ++r) {
          for (int c = rect.c0; c <= rect.c1; ++c) {
            const size_t px = size_t(r) * spec.image_width + size_t(c);
            if (!(depth[px] > 0.0f) || double(depth[px]) >= rect.z) {
              depth[px] = float(rect.z);
              owner[px] = int(i);
            }
          }
        }
      }
    }
    if (spec.emit_depth)
      ctx.depth = std::make_shared<DepthMap>(spec.image_height,
                                             spec.image_width, depth);
    if (spec.emit_flow) {
      std::vector<float> flow(2 * depth.size(),
                              std::numeric_limits<float>::quiet_NaN());
      for (size_t px = 0; px < owner.size(); ++px) {
        if (owner[px] == -2) continue;
        const Eigen::Vector2d v = owner[px] >= 0
                                      ? object_vel[size_t(owner[px])]
                                      : Eigen::Vector2d::Zero();
        flow[2 * px] = float(v.x());
        flow[2 * px + 1] = float(v.y());
      }
      ctx.flow = std::make_shared<FlowMap>(spec.image_height,
                                           spec.image_width, flow);
    }

    // visible silhouettes: masks of physically distinct objects barely
    // overlap, which is what the tracker's overlap penalty presumes
    std::vector<std::vector<uint32_t>> visible(spec.objects.size());
    for (size_t i = 0; i < spec.objects.size(); ++i) {
      if (!rects[i]) continue;
      const PixelRect& rect = *rects[i];
      for (int r = rect.r0; r <= rect.r1; ++r)
        for (int c = rect.c0; c <= rect.c1; ++c) {
          const uint32_t px = uint32_t(r) * spec.image_width + uint32_t(c);
          if (owner[px] == int(i)) visible[i].push_back(px);
        }
      if (visible[i].size() < kMinVisiblePixels) visible[i].clear();
      if (!visible[i].empty()) ++visible_frames[i];
    }

    // ground truth: visible extent, kept during scripted occlusion
    for (size_t i = 0; i < spec.objects.size(); ++i) {
      if (visible[i].empty()) continue;
      GroundTruthBox gt;
      gt.frame = t;
      gt.id = int64_t(i);
      gt.label = spec.objects[i].label;
      const BBox2i box = box_of_pixels(visible[i], spec.image_width);
      gt.box = {double(box.x), double(box.y), double(box.w), double(box.h)};
      gt.pos = centers_cam[i];
      bundle.ground_truth.push_back(std::move(gt));
    }

    // proposals with corruption
    std::mt19937_64 rng(mix_seed(spec.seed, uint64_t(t)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<LocalProposal> props;
    for (size_t i = 0; i < spec.objects.size(); ++i) {
      if (visible[i].empty()) continue;
      bool occluded = false;
      for (const auto& [lo, hi] : spec.objects[i].occluded_spans)
        if (t >= lo && t <= hi) occluded = true;
      if (occluded) continue;
      LocalProposal p;
      p.pixels = visible[i];
      p.box = box_of_pixels(p.pixels, spec.image_width);
      p.owner = int(i);
      p.pos_cam = pixels_center_cam(spec.intrinsics, p.pixels,
                                    spec.image_width, rects[i]->z);
      p.vel_world = object_vel[i];
      p.label = spec.objects[i].label;
      props.push_back(std::move(p));
    }

    // under-segmentation: adjacent proposals melt into one blob
    if (spec.p_merge > 0.0) {
      for (size_t i = 0; i < props.size(); ++i) {
        if (props[i].merged || props[i].pixels.empty()) continue;
        for (size_t j = i + 1; j < props.size(); ++j) {
          if (props[j].merged || props[j].pixels.empty()) continue;
          if (!bbox_intersects(props[i].box, props[j].box)) continue;
          if (unit(rng) < spec.p_merge) {
            const double wa = double(props[i].pixels.size()) /
                              double(props[i].pixels.size() + props[j].pixels.size());
            std::vector<uint32_t> merged;
            merged.reserve(props[i].pixels.size() + props[j].pixels.size());
            std::merge(props[i].pixels.begin(), props[i].pixels.end(),
                       props[j].pixels.begin(), props[j].pixels.end(),
                       std::back_inserter(merged));
            merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
            props[i].pixels = std::move(merged);
            props[i].box = box_of_pixels(props[i].pixels, spec.image_width);
            props[i].pos_cam =
                wa * props[i].pos_cam + (1.0 - wa) * props[j].pos_cam;
            props[i].vel_world =
                wa * props[i].vel_world + (1.0 - wa) * props[j].vel_world;
            props[i].merged = true;
            props[j].pixels.clear();  // consumed
            break;
          }
        }
      }
      std::erase_if(props,
                    [](const LocalProposal& p) { return p.pixels.empty(); });
    }

    // over-segmentation: fragment proposals (two vertical halves) show up
    // alongside the full one, the way real segmentation streams overpropose
    if (spec.p_oversplit > 0.0) {
      std::vector<LocalProposal> extra;
      for (LocalProposal& p : props) {
        const bool splittable = !p.merged && p.box.w >= 4;
        if (splittable && unit(rng) < spec.p_oversplit) {
          const int mid = p.box.x + p.box.w / 2;
          LocalProposal left = p, right = p;
          left.pixels.clear();
          right.pixels.clear();
          for (const uint32_t px : p.pixels) {
            if (int(px % spec.image_width) < mid)
              left.pixels.push_back(px);
            else
              right.pixels.push_back(px);
          }
          for (LocalProposal* half : {&left, &right}) {
            if (half->pixels.size() < kMinVisiblePixels) continue;
            half->box = box_of_pixels(half->pixels, spec.image_width);
            half->pos_cam =
                pixels_center_cam(spec.intrinsics, half->pixels,
                                  spec.image_width,
                                  p.owner >= 0 ? rects[size_t(p.owner)]->z
                                               : p.pos_cam.z());
            half->fragment = true;
            extra.push_back(std::move(*half));
          }
        }
      }
      for (LocalProposal& q : extra) props.push_back(std::move(q));
    }

    // dropout
    if (spec.p_dropout > 0.0) {
      std::vector<LocalProposal> next;
      for (LocalProposal& p : props)
        if (unit(rng) >= spec.p_dropout) next.push_back(std::move(p));
      props = std::move(next);
    }

    // boundary jitter: whole-mask shift, pixels falling off are dropped
    if (spec.mask_jitter_px > 0) {
      std::uniform_int_distribution<int> jit(-spec.mask_jitter_px,
                                             spec.mask_jitter_px);
      for (LocalProposal& p : props) {
        const int dx = jit(rng), dy = jit(rng);
        if (dx == 0 && dy == 0) continue;
        std::vector<uint32_t> shifted;
        shifted.reserve(p.pixels.size());
        for (const uint32_t px : p.pixels) {
          const int r = int(px / spec.image_width) + dy;
          const int c = int(px % spec.image_width) + dx;
          if (r < 0 || c < 0 || r >= int(spec.image_height) ||
              c >= int(spec.image_width))
            continue;
          shifted.push_back(uint32_t(r) * spec.image_width + uint32_t(c));
        }
        p.pixels = std::move(shifted);
        p.box = box_of_pixels(p.pixels, spec.image_width);
      }
      std::erase_if(props,
                    [](const LocalProposal& p) { return p.pixels.empty(); });
    }

    // clutter: independent spurious proposals on the ground
    for (int k = 0; k < spec.clutter_per_frame; ++k) {
      std::uniform_real_distribution<double> ux(-14.0, 14.0);
      std::uniform_real_distribution<double> uz(6.0, 45.0);
      std::uniform_real_distribution<double> uw(0.5, 2.4);
      std::uniform_real_distribution<double> uh(0.5, 2.2);
      const double x = ux(rng), z = uz(rng), w = uw(rng), h = uh(rng);
      const Eigen::Vector3d center_world(x, spec.camera_height - 0.5 * h, z);
      const Eigen::Vector3d center_cam = world_to_cam.apply(center_world);
      const auto rect = project_billboard(spec.intrinsics, spec.image_width,
                                          spec.image_height, center_cam, w, h);
      if (!rect) continue;
      LocalProposal p;
      for (int r = rect->r0; r <= rect->r1; ++r)
        for (int c = rect->c0; c <= rect->c1; ++c)
          p.pixels.push_back(uint32_t(r) * spec.image_width + uint32_t(c));
      p.box = box_of_pixels(p.pixels, spec.image_width);
      p.owner = -1;
      p.pos_cam = pixels_center_cam(spec.intrinsics, p.pixels,
                                    spec.image_width, rect->z);
      props.push_back(std::move(p));
    }

    // emit
    std::normal_distribution<double> noise(0.0, spec.pos_noise_sigma);
    std::vector<RawProposal> frame_props;
    for (LocalProposal& p : props) {
      RawProposal raw;
      raw.mask = RleMask::from_sorted_indices(spec.image_height,
                                              spec.image_width, p.pixels);
      if (raw.mask.is_empty()) continue;
      const double score_lo = p.fragment ? 0.45 : (p.owner >= 0 ? 0.7 : 0.3);
      const double score_hi = p.fragment ? 0.75 : (p.owner >= 0 ? 1.0 : 0.9);
      std::uniform_real_distribution<double> uscore(score_lo, score_hi);
      raw.score = uscore(rng);
      if (p.owner >= 0 && unit(rng) < (p.fragment ? 0.4 : 0.8)) {
        std::uniform_real_distribution<double> uclass(0.55, 0.95);
        raw.class_scores[p.label] = uclass(rng);
      }
      if (spec.emit_pos_vel) {
        Eigen::Vector3d pos_world = cam_to_world.apply(p.pos_cam);
        if (spec.pos_noise_sigma > 0.0)
          pos_world += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
        raw.pos = pos_world;
        raw.vel = p.vel_world;
      }
      frame_props.push_back(std::move(raw));
    }

    bundle.contexts.push_back(std::move(ctx));
    bundle.proposals.push_back(std::move(frame_props));

    for (size_t i = 0; i < spec.objects.size(); ++i)
      object_pos[i] += object_vel[i];
  }

  for (size_t i = 0; i < spec.objects.size(); ++i)
    if (visible_frames[i] == 0)
      bundle.warnings.push_back("object " + std::to_string(i) +
                                " is never visible");
  return bundle;
}

ScenarioSpec named_scenario(const std::string& name) {
  ScenarioSpec spec;
  if (name == "single-static") {
    spec.seed = 11;
    spec.frames = 40;
    spec.objects = {{"car", 1.8, 1.5, {0.0, 12.0}, {0.0, 0.0}, {}, {}}};
    return spec;
  }
  if (name == "two-crossing") {
    spec.seed = 7;
    spec.frames = 100;
    spec.camera.velocity = {0.0, 0.0, 0.05};
    spec.objects = {
        {"car", 1.8, 1.5, {-6.0, 14.0}, {0.12, 0.0}, {}, {}},
        {"pedestrian", 0.7, 1.8, {6.0, 17.0}, {-0.12, 0.0}, {}, {}},
    };
    spec.p_oversplit = 0.2;
    spec.p_dropout = 0.1;
    spec.clutter_per_frame = 5;
    spec.mask_jitter_px = 1;
    spec.pos_noise_sigma = 0.05;
    return spec;
  }
  if (name == "occlusion-gap") {
    spec.seed = 13;
    spec.frames = 60;
    spec.objects = {
        {"car", 1.8, 1.5, {-3.0, 15.0}, {0.1, 0.0}, {}, {{30, 33}}}};
    return spec;
  }
  if (name == "clutter-storm") {
    spec.seed = 5;
    spec.frames = 200;
    spec.camera.velocity = {0.0, 0.0, 0.02};
    spec.objects = {
        {"car", 1.8, 1.5, {-8.0, 20.0}, {0.08, 0.0}, {}, {}},
        {"car", 1.8, 1.5, {8.0, 26.0}, {-0.06, 0.0}, {}, {}},
        {"pedestrian", 0.7, 1.8, {-3.0, 12.0}, {0.04, 0.01}, {}, {}},
        {"pedestrian", 0.7, 1.8, {4.0, 15.0}, {-0.03, 0.02}, {}, {}},
        {"car", 1.8, 1.5, {0.0, 35.0}, {0.0, -0.08}, {}, {}},
        {"pedestrian", 0.7, 1.8, {-6.0, 18.0}, {0.05, 0.0}, {}, {}},
    };
    spec.p_oversplit = 0.15;
    spec.p_dropout = 0.05;
    spec.clutter_per_frame = 100;
    spec.mask_jitter_px = 1;
    spec.pos_noise_sigma = 0.05;
    return spec;
  }
  throw InputError("unknown scenario: " + name);
}

std::vector<std::string> scenario_names() {
  return {"single-static", "two-crossing", "occlusion-gap", "clutter-storm"};
}

}  // namespace camot
