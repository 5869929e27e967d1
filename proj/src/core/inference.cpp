#include "core/inference.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <unordered_set>

#include "core/errors.hpp"

namespace camot {

double semantic_term(std::optional<double> class_score, double c_min) {
  if (!class_score.has_value()) return 0.0;
  return *class_score > c_min ? *class_score : 0.0;
}

std::optional<double> frame_class_score(const TrackFrame& f) {
  std::optional<double> best;
  for (const auto& [label, score] : f.class_scores)
    if (!best || score > *best) best = score;
  return best;
}

double unary(const Hypothesis& h, int t_e, const InferenceParams& params) {
  double sum = 0.0;
  for (const TrackFrame& f : h.track) {
    if (f.frame > t_e) break;
    const double decay = std::exp(-std::abs(f.frame - t_e) / params.lambda);
    sum += decay * (params.w_sim * f.phi_sim + params.w_seg * f.obs_score);
    sum += decay * params.w_sem *
           semantic_term(frame_class_score(f), params.c_min);
  }
  return params.w_min - sum;
}

double unary_strength_no_semantics(const Hypothesis& h, int t_e,
                                   const InferenceParams& params) {
  double sum = 0.0;
  for (const TrackFrame& f : h.track) {
    if (f.frame > t_e) break;
    const double decay = std::exp(-std::abs(f.frame - t_e) / params.lambda);
    sum += decay * (params.w_sim * f.phi_sim + params.w_seg * f.obs_score);
  }
  return sum - params.w_min;
}

double pairwise(const Hypothesis& a, const Hypothesis& b, int t_e,
                const InferenceParams& params) {
  const int lo = std::max(a.first_frame(), b.first_frame());
  const int hi = std::min({a.last_frame(), b.last_frame(), t_e});
  double sum = 0.0;
  for (int t = lo; t <= hi; ++t) {
    const TrackFrame* fa = a.frame_at(t);
    const TrackFrame* fb = b.frame_at(t);
    if (fa->mask.is_empty() || fb->mask.is_empty()) continue;
    if (!bbox_intersects(fa->box, fb->box)) continue;
    const double ov = min_overlap(fa->mask, fb->mask);
    if (ov > 0.0)
      sum += std::exp(-std::abs(t - t_e) / params.lambda) * ov;
  }
  return sum;
}

std::optional<std::string> track_label(const Hypothesis& h, int t_e,
                                       const InferenceParams& params) {
  std::map<std::string, double> totals;
  for (const TrackFrame& f : h.track) {
    if (f.frame > t_e) break;
    const double decay = std::exp(-std::abs(f.frame - t_e) / params.lambda);
    for (const auto& [label, score] : f.class_scores) {
      const double truncated = semantic_term(score, params.c_min);
      if (truncated > 0.0) totals[label] += decay * truncated;
    }
  }
  std::optional<std::string> best;
  double best_total = 0.0;
  for (const auto& [label, total] : totals) {
    if (total > best_total) {  // map order breaks ties by smallest label
      best = label;
      best_total = total;
    }
  }
  return best;
}

double CrfInstance::energy(const std::vector<uint8_t>& selection) const {
  double e = 0.0;
  for (size_t i = 0; i < unary.size(); ++i)
    if (selection[i]) e += unary[i];
  for (const Pair& p : pairwise)
    if (selection[p.i] && selection[p.j]) e += p.value;
  return e;
}

namespace {

// Lexicographic order on indicator vectors b_0, b_1, ...; for bitmasks this
// is numeric order of the bit-reversed value.
bool lex_less_mask(uint32_t a, uint32_t b) {
  if (a == b) return false;
  const int first_diff = std::countr_zero(a ^ b);
  return ((a >> first_diff) & 1u) == 0;
}

std::vector<uint8_t> mask_to_vector(uint32_t mask, size_t n) {
  std::vector<uint8_t> v(n, 0);
  for (size_t i = 0; i < n; ++i) v[i] = (mask >> i) & 1u;
  return v;
}

bool lex_less_bits(const std::vector<uint64_t>& a,
                   const std::vector<uint64_t>& b) {
  for (size_t blk = 0; blk < a.size(); ++blk) {
    if (a[blk] == b[blk]) continue;
    const int first_diff = std::countr_zero(a[blk] ^ b[blk]);
    return ((a[blk] >> first_diff) & 1u) == 0;
  }
  return false;
}

}  // namespace

std::vector<uint8_t> solve_exhaustive(const CrfInstance& inst, int limit) {
  const size_t m = inst.size();
  if (int(m) > limit)
    throw InputError("solve_exhaustive: instance exceeds the exact-solver limit");
  if (m == 0) return {};

  std::vector<std::vector<std::pair<uint32_t, double>>> adj(m);
  for (const auto& p : inst.pairwise) {
    adj[p.i].push_back({p.j, p.value});
    adj[p.j].push_back({p.i, p.value});
  }

  // Gray-code walk over all assignments: one bit flips per step, so the
  // energy moves by the flipped hypothesis's unary plus its pairwise sum
  // against the current selection (tracked in g).
  std::vector<double> g(m, 0.0);
  uint32_t cur = 0;
  double e = 0.0;

  uint32_t best_mask = 0;
  double best_exact = 0.0;
  int best_count = 0;

  const uint64_t total = uint64_t(1) << m;
  for (uint64_t step = 1; step < total; ++step) {
    const int k = std::countr_zero(step);
    const bool selecting = ((cur >> k) & 1u) == 0;
    const double delta = inst.unary[k] + g[k];
    e += selecting ? delta : -delta;
    const double sign = selecting ? 1.0 : -1.0;
    for (const auto& [j, v] : adj[k]) g[j] += sign * v;
    cur ^= (uint32_t(1) << k);

    // The incremental energy drifts by a few ulp per step; the margin must
    // cover the walk's accumulated rounding or ties fall outside the window.
    const double margin = 1e-6 * (1.0 + std::abs(best_exact));
    if (e < best_exact + margin) {
      // Near ties are resolved on exactly recomputed energies.
      const double exact = inst.energy(mask_to_vector(cur, m));
      const int count = std::popcount(cur);
      if (exact < best_exact ||
          (exact == best_exact &&
           (count < best_count ||
            (count == best_count && lex_less_mask(cur, best_mask))))) {
        best_mask = cur;
        best_exact = exact;
        best_count = count;
      }
    }
  }
  return mask_to_vector(best_mask, m);
}

namespace {

struct Branch {
  std::vector<uint64_t> bits;
  std::vector<uint32_t> selected;
  double energy = 0.0;
};

bool bit_test(const std::vector<uint64_t>& bits, uint32_t k) {
  return (bits[k >> 6] >> (k & 63)) & 1u;
}

void bit_set(std::vector<uint64_t>& bits, uint32_t k) {
  bits[k >> 6] |= uint64_t(1) << (k & 63);
}

}  // namespace

std::vector<uint8_t> solve_multibranch(const CrfInstance& inst,
                                       int branch_width) {
  const size_t m = inst.size();
  std::vector<uint8_t> empty_sel(m, 0);
  if (m == 0) return empty_sel;
  branch_width = std::max(1, branch_width);

  std::vector<std::vector<std::pair<uint32_t, double>>> adj(m);
  for (const auto& p : inst.pairwise) {
    adj[p.i].push_back({p.j, p.value});
    adj[p.j].push_back({p.i, p.value});
  }
  const size_t blocks = (m + 63) / 64;

  auto marginal = [&](const Branch& br, uint32_t k) {
    double delta = inst.unary[k];
    for (const auto& [j, v] : adj[k])
      if (bit_test(br.bits, j)) delta += v;
    return delta;
  };

  Branch best;  // global best, starts at the empty selection (energy 0)
  best.bits.assign(blocks, 0);

  auto consider_best = [&](const Branch& cand) {
    if (cand.energy < best.energy ||
        (cand.energy == best.energy &&
         (cand.selected.size() < best.selected.size() ||
          (cand.selected.size() == best.selected.size() &&
           lex_less_bits(cand.bits, best.bits))))) {
      best = cand;
    }
  };

  // Plain greedy first; the beam result is then at least as good. Ties take
  // the largest index, matching the lexicographic convention of the exact
  // solver.
  {
    Branch g;
    g.bits.assign(blocks, 0);
    while (true) {
      int arg = -1;
      double best_delta = -1e-12;
      for (uint32_t k = m; k-- > 0;) {
        if (bit_test(g.bits, k)) continue;
        const double d = marginal(g, k);
        if (d < best_delta) {
          best_delta = d;
          arg = int(k);
        }
      }
      if (arg < 0) break;
      bit_set(g.bits, uint32_t(arg));
      g.selected.push_back(uint32_t(arg));
      g.energy += best_delta;
      consider_best(g);
    }
  }

  std::vector<Branch> beam;
  {
    Branch root;
    root.bits.assign(blocks, 0);
    beam.push_back(std::move(root));
  }
  while (!beam.empty()) {
    std::vector<Branch> candidates;
    std::set<std::vector<uint64_t>> seen;
    for (const Branch& br : beam) {
      for (uint32_t k = 0; k < m; ++k) {
        if (bit_test(br.bits, k)) continue;
        const double delta = marginal(br, k);
        if (delta >= -1e-12) continue;  // only strictly improving insertions
        Branch next = br;
        bit_set(next.bits, k);
        next.selected.push_back(k);
        next.energy += delta;
        if (seen.insert(next.bits).second)
          candidates.push_back(std::move(next));
      }
    }
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end(),
              [](const Branch& a, const Branch& b) {
                if (a.energy != b.energy) return a.energy < b.energy;
                return lex_less_bits(a.bits, b.bits);
              });
    if (int(candidates.size()) > branch_width)
      candidates.resize(branch_width);
    for (const Branch& c : candidates) consider_best(c);
    beam = std::move(candidates);
  }

  std::vector<uint8_t> out(m, 0);
  for (const uint32_t k : best.selected) out[k] = 1;
  return out;
}

namespace {

CrfInstance build_instance(const std::vector<Hypothesis>& hypotheses, int t_e,
                           const InferenceParams& params) {
  CrfInstance inst;
  inst.unary.reserve(hypotheses.size());
  for (const auto& h : hypotheses) inst.unary.push_back(unary(h, t_e, params));
  for (uint32_t i = 0; i + 1 < hypotheses.size(); ++i) {
    for (uint32_t j = i + 1; j < hypotheses.size(); ++j) {
      const double v = pairwise(hypotheses[i], hypotheses[j], t_e, params);
      if (v > 0.0) inst.pairwise.push_back({i, j, v});
    }
  }
  return inst;
}

SelectionOutcome dispatch(const CrfInstance& inst,
                          const InferenceParams& params) {
  SelectionOutcome out;
  if (int(inst.size()) <= params.exhaustive_limit) {
    out.selected = solve_exhaustive(inst, params.exhaustive_limit);
    out.exhaustive = true;
  } else {
    out.selected = solve_multibranch(inst, params.branch_width);
    out.exhaustive = false;
  }
  out.energy = inst.energy(out.selected);
  return out;
}

}  // namespace

SelectionOutcome select(const std::vector<Hypothesis>& hypotheses, int t_e,
                        const InferenceParams& params) {
  return dispatch(build_instance(hypotheses, t_e, params), params);
}

SelectionOutcome InferenceEngine::select_frame(
    const std::vector<Hypothesis>& hypotheses, int t_e) {
  const bool continuing = (t_e == last_frame_ + 1);
  const double decay1 = std::exp(-1.0 / params_.lambda);
  const size_t m = hypotheses.size();

  CrfInstance inst;
  inst.unary.reserve(m);
  for (const auto& h : hypotheses)
    inst.unary.push_back(unary(h, t_e, params_));

  std::unordered_map<uint64_t, double> values;
  values.reserve(pair_cache_.size() * 2 + 64);
  std::unordered_map<int64_t, uint32_t> index_of;
  index_of.reserve(m * 2);
  for (uint32_t i = 0; i < m; ++i) index_of.emplace(hypotheses[i].id, i);

  if (continuing) {
    // decay the history of pairs that are still alive
    for (const auto& [key, prev] : pair_cache_) {
      if (index_of.contains(int64_t(key >> 32)) &&
          index_of.contains(int64_t(key & 0xffffffffu)))
        values.emplace(key, decay1 * prev);
    }
    // current-frame overlaps: boxes first, masks only where boxes touch
    for (uint32_t i = 0; i + 1 < m; ++i) {
      const Hypothesis& a = hypotheses[i];
      if (a.creation_frame > last_frame_) continue;
      const TrackFrame* fa = a.frame_at(t_e);
      if (!fa || fa->mask.is_empty()) continue;
      for (uint32_t j = i + 1; j < m; ++j) {
        const Hypothesis& b = hypotheses[j];
        if (b.creation_frame > last_frame_) continue;
        const TrackFrame* fb = b.frame_at(t_e);
        if (!fb || fb->mask.is_empty()) continue;
        if (!bbox_intersects(fa->box, fb->box)) continue;
        const double ov = min_overlap(fa->mask, fb->mask);
        if (ov > 0.0) values[pair_key(a.id, b.id)] += ov;
      }
    }
    // pairs with a newborn member need the full history
    for (uint32_t i = 0; i < m; ++i) {
      const Hypothesis& a = hypotheses[i];
      if (a.creation_frame <= last_frame_) continue;
      for (uint32_t j = 0; j < m; ++j) {
        if (j == i) continue;
        const Hypothesis& b = hypotheses[j];
        if (b.creation_frame > last_frame_ && j < i) continue;  // once per pair
        const double v = pairwise(a, b, t_e, params_);
        if (v > 0.0) values.emplace(pair_key(a.id, b.id), v);
      }
    }
  } else {
    for (uint32_t i = 0; i + 1 < m; ++i)
      for (uint32_t j = i + 1; j < m; ++j) {
        const double v =
            pairwise(hypotheses[i], hypotheses[j], t_e, params_);
        if (v > 0.0)
          values.emplace(pair_key(hypotheses[i].id, hypotheses[j].id), v);
      }
  }

  pair_cache_.clear();
  for (const auto& [key, value] : values) {
    if (value <= 0.0) continue;
    pair_cache_.emplace(key, value);
    const uint32_t i = index_of.at(int64_t(key >> 32));
    const uint32_t j = index_of.at(int64_t(key & 0xffffffffu));
    inst.pairwise.push_back({std::min(i, j), std::max(i, j), value});
  }
  // deterministic instance regardless of hash iteration order
  std::sort(inst.pairwise.begin(), inst.pairwise.end(),
            [](const CrfInstance::Pair& a, const CrfInstance::Pair& b) {
              return a.i != b.i ? a.i < b.i : a.j < b.j;
            });
  last_frame_ = t_e;
  return dispatch(inst, params_);
}

}  // namespace camot
