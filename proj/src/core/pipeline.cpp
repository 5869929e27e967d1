#include "core/pipeline.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "core/errors.hpp"

namespace camot {

using nlohmann::json;

namespace {

constexpr uint64_t kPlaneSeedBase = 0x5eed0000u;
constexpr size_t kPlaneFitTargetPoints = 6000;

uint64_t mix_seed(uint64_t seed, uint64_t frame) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (frame + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void fit_frame_ground(FrameContext& ctx) {
  if (!ctx.depth) return;
  const DepthMap& depth = *ctx.depth;
  const size_t total = size_t(depth.height()) * depth.width();
  const size_t stride = std::max<size_t>(1, total / kPlaneFitTargetPoints);
  std::vector<Eigen::Vector3d> points;
  points.reserve(total / stride + 1);
  for (size_t i = 0; i < total; i += stride) {
    const uint32_t r = uint32_t(i / depth.width());
    const uint32_t c = uint32_t(i % depth.width());
    if (depth.valid_at(r, c))
      points.push_back(unproject_pixel(ctx.intrinsics, c, r, depth.at(r, c)));
  }
  const auto fit = fit_ground_plane(points, 200, 0.05,
                                    mix_seed(kPlaneSeedBase, ctx.frame));
  if (fit)
    ctx.ground = transform_plane(fit->plane, ctx.camera_to_world);
}

void parallel_frames(size_t count, int workers,
                     const std::function<void(size_t)>& body) {
  if (workers <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, int(count));
  pool.reserve(n);
  for (int w = 0; w < n; ++w) {
    pool.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1))
        body(i);
    });
  }
  for (auto& th : pool) th.join();
}

BBox2d to_bbox2d(const BBox2i& b) {
  return {double(b.x), double(b.y), double(b.w), double(b.h)};
}

}  // namespace

RunResult run_sequence(const SequenceBundle& bundle, const Params& params,
                       int workers, CoverageCollector* collector) {
  const size_t n = bundle.contexts.size();
  RunResult result;

  // Per-frame preprocessing is pure; frames fan out to workers and join in
  // index order, so the output does not depend on the worker count.
  std::vector<FrameContext> contexts = bundle.contexts;
  std::vector<ObservationSet> sets(n);
  parallel_frames(n, workers, [&](size_t t) {
    fit_frame_ground(contexts[t]);
    sets[t] = build_observation_set(bundle.proposals[t], contexts[t],
                                    params.observations);
  });

  Tracker tracker(params.tracker, [&](const Hypothesis& h, int t_e) {
    return unary_strength_no_semantics(h, t_e, params.inference);
  });
  InferenceEngine engine(params.inference);

  for (size_t t = 0; t < n; ++t) {
    const FrameContext& ctx = contexts[t];
    const StepStats stats = tracker.step(ctx, sets[t].observations);
    const auto& live = tracker.hypotheses();
    result.peak_live_hypotheses =
        std::max(result.peak_live_hypotheses, live.size());

    const SelectionOutcome sel = engine.select_frame(live, ctx.frame);

    std::vector<size_t> selected;
    for (size_t i = 0; i < live.size(); ++i)
      if (sel.selected[i]) selected.push_back(i);
    std::sort(selected.begin(), selected.end(), [&](size_t a, size_t b) {
      return live[a].id < live[b].id;
    });
    for (const size_t i : selected) {
      const Hypothesis& h = live[i];
      const TrackFrame* f = h.frame_at(ctx.frame);
      if (!f) throw InternalError("selected hypothesis lacks the current frame");
      TrackRow row;
      row.frame = ctx.frame;
      row.id = h.id;
      row.mask = f->mask;
      row.box = f->box;
      row.pos = f->pos;
      row.pos_cam = f->pos_cam;
      row.vel = f->vel;
      row.score = -unary(h, ctx.frame, params.inference);
      row.label = track_label(h, ctx.frame, params.inference);
      row.predicted = f->is_predicted;
      result.tracks.push_back(std::move(row));
    }

    FrameDiagnostics diag;
    diag.frame = ctx.frame;
    diag.raw_proposals = bundle.proposals[t].size();
    diag.rejections = sets[t].rejections;
    diag.height_filter_skipped = sets[t].height_filter_skipped;
    diag.observations = sets[t].observations.size();
    diag.live_hypotheses = live.size();
    diag.exhaustive_solver = sel.exhaustive;
    diag.energy = sel.energy;
    diag.selection_bits.assign(live.size(), '0');
    for (size_t i = 0; i < live.size(); ++i)
      if (sel.selected[i]) diag.selection_bits[i] = '1';
    for (const size_t i : selected) diag.selected_ids.push_back(live[i].id);
    diag.warnings = stats.warnings;
    result.diagnostics.push_back(std::move(diag));

    if (collector) {
      std::vector<HypothesisTrace> traces;
      traces.reserve(live.size());
      for (const Hypothesis& h : live) {
        HypothesisTrace trace;
        trace.strength = unary_strength_no_semantics(h, ctx.frame,
                                                     params.inference);
        for (int f = ctx.frame - collector->window; f <= ctx.frame; ++f)
          if (const TrackFrame* tf = h.frame_at(f))
            trace.boxes[f] = to_bbox2d(tf->box);
        traces.push_back(std::move(trace));
      }
      collector->frames.push_back(std::move(traces));
    }
  }
  return result;
}

RunResult run_sequence_dir(const std::filesystem::path& dir,
                           const Params& params,
                           const std::filesystem::path& tracks_out,
                           const std::optional<std::filesystem::path>& diagnostics_out,
                           int workers) {
  const SequenceBundle bundle = read_sequence(dir);
  RunResult result = run_sequence(bundle, params, workers);
  write_tracks(tracks_out, result.tracks);
  if (diagnostics_out) write_diagnostics(*diagnostics_out, result.diagnostics);
  return result;
}

std::vector<TrackReportRow> to_report_rows(const std::vector<TrackRow>& rows) {
  std::vector<TrackReportRow> out;
  out.reserve(rows.size());
  for (const TrackRow& r : rows) {
    TrackReportRow row;
    row.frame = r.frame;
    row.id = r.id;
    row.box = to_bbox2d(r.box);
    row.label = r.label;
    row.pos_cam = r.pos_cam;
    out.push_back(std::move(row));
  }
  return out;
}

TuneSpec read_tune_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!j.contains("schema") || j["schema"] != kSchemaVersion)
    throw InputError(path.string() + ": missing or unsupported schema");

  TuneSpec spec;
  spec.stage = j.value("stage", 1);
  if (spec.stage != 1 && spec.stage != 2)
    throw InputError("tune spec: stage must be 1 or 2");
  spec.trials = j.value("trials", 1);
  if (spec.trials < 1) throw InputError("tune spec: trials must be >= 1");
  spec.seed = j.value("seed", uint64_t(1));
  if (!j.contains("sequences") || j["sequences"].empty())
    throw InputError("tune spec: sequences must be non-empty");
  for (const auto& s : j["sequences"])
    spec.sequences.push_back(std::filesystem::path(s.get<std::string>()));
  if (j.contains("ranges")) {
    for (const auto& [key, range] : j["ranges"].items()) {
      if (!range.is_array() || range.size() != 2)
        throw InputError("tune spec: range for " + key + " must be [lo, hi]");
      const double lo = range[0].get<double>(), hi = range[1].get<double>();
      if (hi < lo) throw InputError("tune spec: empty range for " + key);
      spec.ranges[key] = {lo, hi};
    }
  }
  if (spec.ranges.empty())
    throw InputError("tune spec: ranges must be non-empty");
  if (j.contains("categories"))
    spec.categories = j["categories"].get<std::vector<std::string>>();
  spec.k_best = j.value("k_best", spec.k_best);
  spec.lambda = j.value("lambda", spec.lambda);
  spec.iou_threshold = j.value("iou_threshold", spec.iou_threshold);
  if (j.contains("base_params")) spec.base = params_from_json(j["base_params"]);
  spec.workers = j.value("workers", spec.workers);
  return spec;
}

RandomSearch::RandomSearch(
    std::map<std::string, std::pair<double, double>> ranges, uint64_t seed)
    : ranges_(std::move(ranges)), seed_(seed) {}

std::map<std::string, double> RandomSearch::propose(int trial) {
  // One dedicated generator per trial keeps proposals independent of
  // observation order.
  std::mt19937_64 rng(mix_seed(seed_, uint64_t(trial)));
  std::map<std::string, double> values;
  for (const auto& [key, range] : ranges_) {
    std::uniform_real_distribution<double> u(range.first, range.second);
    values[key] = u(rng);
  }
  return values;
}

void RandomSearch::observe(int, double) {}

double tune_objective(const TuneSpec& spec,
                      const std::vector<SequenceBundle>& sequences,
                      const Params& params) {
  double total = 0.0;
  for (const SequenceBundle& bundle : sequences) {
    if (spec.stage == 1) {
      CoverageCollector collector;
      run_sequence(bundle, params, spec.workers, &collector);
      total += coverage_objective(collector.frames, bundle.ground_truth,
                                  spec.k_best, spec.lambda);
    } else {
      const RunResult run = run_sequence(bundle, params, spec.workers);
      EvalConfig cfg;
      cfg.iou_threshold = spec.iou_threshold;
      cfg.categories = spec.categories;
      const MotReport report =
          clear_mot(to_report_rows(run.tracks), bundle.ground_truth, cfg);
      if (spec.categories.has_value() && !spec.categories->empty()) {
        for (const auto& [cat, counts] : report.per_category)
          total += counts.mota();
      } else {
        total += report.overall.mota();
      }
    }
  }
  return total / double(sequences.size());
}

TuneResult tune(const TuneSpec& spec) {
  std::vector<SequenceBundle> sequences;
  for (const auto& dir : spec.sequences) {
    sequences.push_back(read_sequence(dir));
    if (sequences.back().ground_truth.empty())
      throw InputError("tune: sequence has no ground truth: " + dir.string());
  }

  RandomSearch search(spec.ranges, spec.seed);
  TuneResult result;
  bool any = false;
  for (int trial = 0; trial < spec.trials; ++trial) {
    const auto values = search.propose(trial);
    const Params params = apply_overrides(spec.base, values);
    const double objective = tune_objective(spec, sequences, params);
    search.observe(trial, objective);
    result.log.push_back({trial, objective, values});
    if (!any || objective > result.best_objective) {
      any = true;
      result.best_objective = objective;
      result.best_trial = trial;
      result.best_params = params;
    }
  }
  if (!any) throw InputError("tune: no valid trials");
  return result;
}

void write_trial_log(const std::filesystem::path& path,
                     const TuneResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << json{{"schema", kSchemaVersion},
              {"kind", "tune_log"},
              {"best_trial", result.best_trial},
              {"best_objective", result.best_objective}}
             .dump()
      << "\n";
  for (const TrialRecord& rec : result.log)
    out << json{{"trial", rec.trial},
                {"objective", rec.objective},
                {"values", rec.values}}
               .dump()
        << "\n";
}

namespace {

std::array<uint8_t, 3> id_color(int64_t id) {
  // golden-angle hue walk, full saturation
  const double h = std::fmod(0.61803398875 * double(id), 1.0) * 6.0;
  const int i = int(h);
  const double f = h - i;
  const auto to_byte = [](double v) { return uint8_t(55 + 200 * v); };
  switch (i % 6) {
    case 0: return {to_byte(1), to_byte(f), to_byte(0)};
    case 1: return {to_byte(1 - f), to_byte(1), to_byte(0)};
    case 2: return {to_byte(0), to_byte(1), to_byte(f)};
    case 3: return {to_byte(0), to_byte(1 - f), to_byte(1)};
    case 4: return {to_byte(f), to_byte(0), to_byte(1)};
    default: return {to_byte(1), to_byte(0), to_byte(1 - f)};
  }
}

}  // namespace

void render_overlays(const SequenceBundle& bundle,
                     const std::vector<TrackRow>& rows,
                     const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::map<int, std::vector<const TrackRow*>> by_frame;
  for (const TrackRow& r : rows) by_frame[r.frame].push_back(&r);

  const uint32_t w = bundle.image_width, h = bundle.image_height;
  for (const FrameContext& ctx : bundle.contexts) {
    std::vector<uint8_t> rgb(size_t(w) * h * 3, 0);
    if (ctx.depth) {
      for (uint32_t r = 0; r < h; ++r) {
        for (uint32_t c = 0; c < w; ++c) {
          if (!ctx.depth->valid_at(r, c)) continue;
          const double d = std::min(60.0, double(ctx.depth->at(r, c)));
          const uint8_t shade = uint8_t(40 + 180 * (1.0 - d / 60.0));
          const size_t px = 3 * (size_t(r) * w + c);
          rgb[px] = rgb[px + 1] = rgb[px + 2] = shade;
        }
      }
    }
    const auto it = by_frame.find(ctx.frame);
    if (it != by_frame.end()) {
      for (const TrackRow* row : it->second) {
        const auto color = id_color(row->id);
        for (const uint32_t idx : row->mask.foreground_indices()) {
          const size_t px = 3 * size_t(idx);
          for (int ch = 0; ch < 3; ++ch)
            rgb[px + ch] = uint8_t((rgb[px + ch] + 2 * color[ch]) / 3);
        }
        // box outline
        const BBox2i& b = row->box;
        for (int x = b.x; x < b.x + b.w; ++x) {
          for (int y : {b.y, b.y + b.h - 1}) {
            if (x < 0 || y < 0 || x >= int(w) || y >= int(h)) continue;
            const size_t px = 3 * (size_t(y) * w + size_t(x));
            for (int ch = 0; ch < 3; ++ch) rgb[px + ch] = color[ch];
          }
        }
        for (int y = b.y; y < b.y + b.h; ++y) {
          for (int x : {b.x, b.x + b.w - 1}) {
            if (x < 0 || y < 0 || x >= int(w) || y >= int(h)) continue;
            const size_t px = 3 * (size_t(y) * w + size_t(x));
            for (int ch = 0; ch < 3; ++ch) rgb[px + ch] = color[ch];
          }
        }
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "frame_%06d.ppm", ctx.frame);
    std::ofstream out(out_dir / name, std::ios::binary);
    if (!out) throw InputError("cannot write " + (out_dir / name).string());
    out << "P6\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()),
              std::streamsize(rgb.size()));
  }
}

}  // namespace camot
