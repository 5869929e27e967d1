// Test-only reference implementations, independent of the library's
// compressed-form code paths.
#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "core/inference.hpp"
#include "core/rle_mask.hpp"

namespace oracle {

// Dense binary grid; every operation works pixel by pixel.
struct DenseMask {
  uint32_t height = 0, width = 0;
  std::vector<uint8_t> data;

  DenseMask(uint32_t h, uint32_t w) : height(h), width(w), data(size_t(h) * w, 0) {}

  uint8_t& at(uint32_t r, uint32_t c) { return data[size_t(r) * width + c]; }
  uint8_t at(uint32_t r, uint32_t c) const { return data[size_t(r) * width + c]; }

  uint64_t area() const {
    uint64_t n = 0;
    for (const uint8_t v : data) n += v ? 1 : 0;
    return n;
  }
};

inline uint64_t intersection_area(const DenseMask& a, const DenseMask& b) {
  uint64_t n = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] && b.data[i]) ++n;
  return n;
}

inline uint64_t union_area(const DenseMask& a, const DenseMask& b) {
  uint64_t n = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] || b.data[i]) ++n;
  return n;
}

inline double iou(const DenseMask& a, const DenseMask& b) {
  const uint64_t u = union_area(a, b);
  return u > 0 ? double(intersection_area(a, b)) / double(u) : 0.0;
}

inline double min_overlap(const DenseMask& a, const DenseMask& b) {
  const uint64_t aa = a.area(), ab = b.area();
  if (aa == 0 || ab == 0) return 0.0;
  return double(intersection_area(a, b)) / double(std::min(aa, ab));
}

// Tight box by a full min/max scan; {x, y, w, h}, or w==0 when empty.
inline camot::BBox2i bbox(const DenseMask& m) {
  int min_r = int(m.height), max_r = -1, min_c = int(m.width), max_c = -1;
  for (uint32_t r = 0; r < m.height; ++r)
    for (uint32_t c = 0; c < m.width; ++c)
      if (m.at(r, c)) {
        min_r = std::min(min_r, int(r));
        max_r = std::max(max_r, int(r));
        min_c = std::min(min_c, int(c));
        max_c = std::max(max_c, int(c));
      }
  if (max_r < 0) return {};
  return {min_c, min_r, max_c - min_c + 1, max_r - min_r + 1};
}

// Random blobby mask: a handful of random rectangles, possibly empty.
inline DenseMask random_mask(std::mt19937_64& rng, uint32_t h, uint32_t w,
                             int max_rects = 4) {
  DenseMask m(h, w);
  std::uniform_int_distribution<int> nrects(0, max_rects);
  std::uniform_int_distribution<uint32_t> rr(0, h - 1), cc(0, w - 1);
  const int n = nrects(rng);
  for (int k = 0; k < n; ++k) {
    uint32_t r0 = rr(rng), r1 = rr(rng), c0 = cc(rng), c1 = cc(rng);
    if (r0 > r1) std::swap(r0, r1);
    if (c0 > c1) std::swap(c0, c1);
    for (uint32_t r = r0; r <= r1; ++r)
      for (uint32_t c = c0; c <= c1; ++c) m.at(r, c) = 1;
  }
  return m;
}

inline camot::RleMask to_rle(const DenseMask& m) {
  return camot::RleMask::encode(m.height, m.width, m.data);
}

// O(n^2) reference NMS: greedy in descending score order (stable on ties).
inline std::vector<size_t> brute_force_nms(
    const std::vector<camot::RleMask>& masks, const std::vector<double>& scores,
    double threshold) {
  std::vector<size_t> order(masks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<size_t> kept;
  for (const size_t cand : order) {
    bool ok = true;
    for (const size_t k : kept)
      if (camot::iou(masks[cand], masks[k]) > threshold) ok = false;
    if (ok) kept.push_back(cand);
  }
  return kept;
}

// Literal minimizer over all 2^M selections with the documented tie-breaks
// (fewer selected, then lexicographically smallest vector).
inline std::vector<uint8_t> enumerate_minimum(const camot::CrfInstance& inst) {
  const size_t m = inst.size();
  std::vector<uint8_t> best(m, 0);
  double best_e = inst.energy(best);
  for (uint64_t mask = 1; mask < (uint64_t(1) << m); ++mask) {
    std::vector<uint8_t> sel(m, 0);
    for (size_t i = 0; i < m; ++i) sel[i] = (mask >> i) & 1u;
    const double e = inst.energy(sel);
    const int count = int(std::count(sel.begin(), sel.end(), 1));
    const int best_count = int(std::count(best.begin(), best.end(), 1));
    if (e < best_e ||
        (e == best_e && (count < best_count ||
                         (count == best_count &&
                          std::lexicographical_compare(sel.begin(), sel.end(),
                                                       best.begin(), best.end())))))
    {
      best = sel;
      best_e = e;
    }
  }
  return best;
}

}  // namespace oracle
