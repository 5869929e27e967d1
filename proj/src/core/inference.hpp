#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tracker.hpp"

namespace camot {

// Default weights keep the per-frame unary gain of a perfect hypothesis
// (w_sim + w_seg*s + w_sem*c) below 1, the per-frame ceiling of the overlap
// penalty; otherwise a duplicate of a selected track always pays for itself
// and duplicate tracks get reported.
struct InferenceParams {
  double lambda = 4.0;       // temporal decay, frames
  double w_min = 1.0;        // minimal hypothesis score
  double w_sim = 0.4;
  double w_seg = 0.2;
  double w_sem = 0.2;
  double c_min = 0.5;        // minimal classifier score
  int exhaustive_limit = 20; // largest set solved exactly
  int branch_width = 8;      // beam width of the multi-branch solver
};

// Truncated classification score: c if c > c_min, else 0. Missing scores
// contribute nothing so unrecognized objects are not discouraged.
double semantic_term(std::optional<double> class_score, double c_min);

// Largest class confidence of a frame, if any.
std::optional<double> frame_class_score(const TrackFrame& f);

// Unary potential: w_min minus the decay-weighted sum of mask-consistency,
// segmentation-score and semantic contributions over the hypothesis's frames
// up to t_e. Negative values mean "worth selecting".
double unary(const Hypothesis& h, int t_e, const InferenceParams& params);

// -unary without the semantic term; the ordering key for duplicate pruning.
double unary_strength_no_semantics(const Hypothesis& h, int t_e,
                                   const InferenceParams& params);

// Pairwise potential: decay-weighted overlap over common frames, measured as
// intersection over the smaller mask so small fragments are suppressed by
// larger objects.
double pairwise(const Hypothesis& a, const Hypothesis& b, int t_e,
                const InferenceParams& params);

// Decay-weighted class label of a whole track; nullopt when no class ever
// cleared the truncation threshold.
std::optional<std::string> track_label(const Hypothesis& h, int t_e,
                                       const InferenceParams& params);

// Selection problem over M hypotheses: E(b) = sum b_i*unary_i +
// sum_{i<j} b_i*b_j*pairwise_ij (unordered pairs counted once).
struct CrfInstance {
  std::vector<double> unary;
  struct Pair {
    uint32_t i, j;  // i < j
    double value;
  };
  std::vector<Pair> pairwise;

  size_t size() const { return unary.size(); }
  double energy(const std::vector<uint8_t>& selection) const;
};

// Exact minimizer by full enumeration; ties prefer fewer selections, then
// the lexicographically smallest indicator vector. Throws InputError above
// `limit` variables.
std::vector<uint8_t> solve_exhaustive(const CrfInstance& inst, int limit = 20);

// Beam search over greedy insertions. Width 1 reduces to plain greedy; the
// result is never worse than greedy.
std::vector<uint8_t> solve_multibranch(const CrfInstance& inst,
                                       int branch_width);

struct SelectionOutcome {
  std::vector<uint8_t> selected;  // one flag per hypothesis
  double energy = 0.0;
  bool exhaustive = false;
};

// Builds the CRF over the hypothesis set for frame t_e and dispatches to the
// exact solver when the set is small enough, the multi-branch solver
// otherwise.
SelectionOutcome select(const std::vector<Hypothesis>& hypotheses, int t_e,
                        const InferenceParams& params);

// Per-sequence inference engine. Equivalent to select() but caches pairwise
// terms between consecutive frames: for frames processed in order, each
// cached pair only needs its current-frame overlap added under decay.
class InferenceEngine {
 public:
  explicit InferenceEngine(InferenceParams params) : params_(params) {}

  SelectionOutcome select_frame(const std::vector<Hypothesis>& hypotheses,
                                int t_e);

  const InferenceParams& params() const { return params_; }

 private:
  // ids fit in 32 bits; a pair packs into one key
  static uint64_t pair_key(int64_t a, int64_t b) {
    return a < b ? (uint64_t(a) << 32) | uint64_t(b)
                 : (uint64_t(b) << 32) | uint64_t(a);
  }

  InferenceParams params_;
  int last_frame_ = INT32_MIN;
  std::unordered_map<uint64_t, double> pair_cache_;
};

}  // namespace camot
