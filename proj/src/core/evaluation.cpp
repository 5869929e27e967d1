#include "core/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "core/errors.hpp"

namespace camot {

double bbox_iou(const BBox2d& a, const BBox2d& b) {
  const double x0 = std::max(a.x, b.x);
  const double y0 = std::max(a.y, b.y);
  const double x1 = std::min(a.x + a.w, b.x + b.w);
  const double y1 = std::min(a.y + a.h, b.y + b.h);
  const double iw = std::max(0.0, x1 - x0);
  const double ih = std::max(0.0, y1 - y0);
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

namespace {

size_t bin_index(const std::vector<double>& edges, double distance) {
  // Bins are [e0,e1), ..., [e_{n-2}, e_{n-1}), plus an open overflow bin.
  for (size_t i = 0; i + 1 < edges.size(); ++i)
    if (distance >= edges[i] && distance < edges[i + 1]) return i;
  return edges.empty() ? 0 : edges.size() - 1;
}

struct EventSinks {
  MotCounts* overall;
  MotCounts* bin;
  MotCounts* category;
};

MotCounts run_clear_mot(const std::vector<const TrackReportRow*>& tracks,
                        const std::vector<const GroundTruthBox*>& gts,
                        const EvalConfig& config,
                        std::vector<DistanceBin>* bins) {
  MotCounts overall;

  std::map<int, std::vector<const GroundTruthBox*>> gt_by_frame;
  std::map<int, std::vector<const TrackReportRow*>> tr_by_frame;
  for (const auto* g : gts) gt_by_frame[g->frame].push_back(g);
  for (const auto* t : tracks) tr_by_frame[t->frame].push_back(t);

  std::set<int> frames;
  for (const auto& [f, _] : gt_by_frame) frames.insert(f);
  for (const auto& [f, _] : tr_by_frame) frames.insert(f);

  auto bin_of_gt = [&](const GroundTruthBox& g) -> MotCounts* {
    if (!bins) return nullptr;
    const double d = g.pos ? g.pos->norm() : 0.0;
    return &(*bins)[bin_index(config.bin_edges, d)].counts;
  };
  auto bin_of_track = [&](const TrackReportRow& t) -> MotCounts* {
    if (!bins) return nullptr;
    if (!t.pos_cam) return &bins->back().counts;  // unknown distance
    return &(*bins)[bin_index(config.bin_edges, t.pos_cam->norm())].counts;
  };

  std::map<int64_t, int64_t> last_match;  // gt id -> track id

  for (const int frame : frames) {
    auto gt_it = gt_by_frame.find(frame);
    auto tr_it = tr_by_frame.find(frame);
    std::vector<const GroundTruthBox*> gt_rows =
        gt_it != gt_by_frame.end() ? gt_it->second
                                   : std::vector<const GroundTruthBox*>{};
    std::vector<const TrackReportRow*> tr_rows =
        tr_it != tr_by_frame.end() ? tr_it->second
                                   : std::vector<const TrackReportRow*>{};
    std::sort(gt_rows.begin(), gt_rows.end(),
              [](auto* a, auto* b) { return a->id < b->id; });
    std::sort(tr_rows.begin(), tr_rows.end(),
              [](auto* a, auto* b) { return a->id < b->id; });

    overall.gt += int64_t(gt_rows.size());
    for (const auto* g : gt_rows)
      if (auto* c = bin_of_gt(*g)) c->gt++;

    std::vector<bool> gt_used(gt_rows.size(), false);
    std::vector<bool> tr_used(tr_rows.size(), false);
    std::vector<std::pair<size_t, size_t>> matches;

    // Persistence pass: keep last frame's correspondence when it still
    // clears the IoU threshold.
    for (size_t gi = 0; gi < gt_rows.size(); ++gi) {
      const auto it = last_match.find(gt_rows[gi]->id);
      if (it == last_match.end()) continue;
      for (size_t ti = 0; ti < tr_rows.size(); ++ti) {
        if (tr_used[ti] || tr_rows[ti]->id != it->second) continue;
        if (bbox_iou(gt_rows[gi]->box, tr_rows[ti]->box) >=
            config.iou_threshold) {
          gt_used[gi] = true;
          tr_used[ti] = true;
          matches.push_back({gi, ti});
        }
        break;
      }
    }

    // Greedy pass over the remaining pairs by descending IoU.
    struct Cand {
      double iou;
      size_t gi, ti;
    };
    std::vector<Cand> cands;
    for (size_t gi = 0; gi < gt_rows.size(); ++gi) {
      if (gt_used[gi]) continue;
      for (size_t ti = 0; ti < tr_rows.size(); ++ti) {
        if (tr_used[ti]) continue;
        const double v = bbox_iou(gt_rows[gi]->box, tr_rows[ti]->box);
        if (v >= config.iou_threshold) cands.push_back({v, gi, ti});
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      if (a.gi != b.gi) return a.gi < b.gi;
      return a.ti < b.ti;
    });
    for (const Cand& c : cands) {
      if (gt_used[c.gi] || tr_used[c.ti]) continue;
      gt_used[c.gi] = true;
      tr_used[c.ti] = true;
      matches.push_back({c.gi, c.ti});
    }

    for (const auto& [gi, ti] : matches) {
      const GroundTruthBox& g = *gt_rows[gi];
      const TrackReportRow& t = *tr_rows[ti];
      overall.tp++;
      MotCounts* bc = bin_of_gt(g);
      if (bc) bc->tp++;
      const auto it = last_match.find(g.id);
      if (it != last_match.end() && it->second != t.id) {
        overall.idsw++;
        if (bc) bc->idsw++;
      }
      last_match[g.id] = t.id;
    }
    for (size_t gi = 0; gi < gt_rows.size(); ++gi) {
      if (gt_used[gi]) continue;
      overall.fn++;
      if (auto* c = bin_of_gt(*gt_rows[gi])) c->fn++;
    }
    for (size_t ti = 0; ti < tr_rows.size(); ++ti) {
      if (tr_used[ti]) continue;
      overall.fp++;
      if (auto* c = bin_of_track(*tr_rows[ti])) c->fp++;
    }
  }
  return overall;
}

}  // namespace

MotReport clear_mot(const std::vector<TrackReportRow>& tracks,
                    const std::vector<GroundTruthBox>& ground_truth,
                    const EvalConfig& config) {
  if (config.bin_edges.size() >= 2) {
    for (size_t i = 0; i + 1 < config.bin_edges.size(); ++i)
      if (config.bin_edges[i] >= config.bin_edges[i + 1])
        throw InputError("clear_mot: bin edges must be strictly increasing");
  }

  MotReport report;
  for (size_t i = 0; i + 1 < config.bin_edges.size(); ++i)
    report.bins.push_back(
        {config.bin_edges[i], config.bin_edges[i + 1], MotCounts{}});
  report.bins.push_back(
      {config.bin_edges.empty() ? 0.0 : config.bin_edges.back(), std::nullopt,
       MotCounts{}});

  std::vector<const TrackReportRow*> tr;
  std::vector<const GroundTruthBox*> gt;
  for (const auto& t : tracks) tr.push_back(&t);
  for (const auto& g : ground_truth) gt.push_back(&g);
  report.overall = run_clear_mot(tr, gt, config, &report.bins);

  if (config.categories.has_value()) {
    for (const std::string& cat : *config.categories) {
      std::vector<const TrackReportRow*> tr_cat;
      std::vector<const GroundTruthBox*> gt_cat;
      for (const auto& t : tracks)
        if (t.label && *t.label == cat) tr_cat.push_back(&t);
      for (const auto& g : ground_truth)
        if (g.label == cat) gt_cat.push_back(&g);
      report.per_category[cat] = run_clear_mot(tr_cat, gt_cat, config, nullptr);
    }
  }
  return report;
}

double temporal_coverage(const std::vector<HypothesisTrace>& hypotheses,
                         const std::map<int, BBox2d>& gt_boxes, int t,
                         double lambda) {
  double best = 0.0;
  for (const HypothesisTrace& h : hypotheses) {
    double sum = 0.0;
    for (int tau = t - 5; tau <= t; ++tau) {
      const auto hb = h.boxes.find(tau);
      if (hb == h.boxes.end()) continue;
      const auto gb = gt_boxes.find(tau);
      if (gb == gt_boxes.end()) continue;
      sum += std::exp(double(tau - t) / lambda) *
             bbox_iou(hb->second, gb->second);
    }
    best = std::max(best, sum);
  }
  return best;
}

double coverage_objective(
    const std::vector<std::vector<HypothesisTrace>>& per_frame_hypotheses,
    const std::vector<GroundTruthBox>& ground_truth, int k_best,
    double lambda) {
  std::map<int64_t, std::map<int, BBox2d>> gt_tracks;
  for (const auto& g : ground_truth) gt_tracks[g.id][g.frame] = g.box;

  double total = 0.0;
  size_t pairs = 0;
  for (int t = 0; t < int(per_frame_hypotheses.size()); ++t) {
    // Only the k best-scoring hypotheses of the frame are eligible.
    std::vector<HypothesisTrace> eligible = per_frame_hypotheses[t];
    std::stable_sort(eligible.begin(), eligible.end(),
                     [](const HypothesisTrace& a, const HypothesisTrace& b) {
                       return a.strength > b.strength;
                     });
    if (int(eligible.size()) > k_best) eligible.resize(std::max(0, k_best));

    for (const auto& [gt_id, boxes] : gt_tracks) {
      if (!boxes.contains(t)) continue;
      total += temporal_coverage(eligible, boxes, t, lambda);
      ++pairs;
    }
  }
  return pairs > 0 ? total / double(pairs) : 0.0;
}

}  // namespace camot
