#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace camot {

// Axis-aligned pixel box, x/y is the top-left corner.
struct BBox2i {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const BBox2i&, const BBox2i&) = default;
};

bool bbox_intersects(const BBox2i& a, const BBox2i& b);
double bbox_iou(const BBox2i& a, const BBox2i& b);

// Binary segmentation mask, run-length encoded in row-major scan order.
// `runs` alternates counts of 0-pixels and 1-pixels and always begins with
// the number of leading 0-pixels (which may itself be 0). Interior runs are
// nonzero, so the encoding is canonical: masks are equal iff encodings are.
class RleMask {
 public:
  RleMask() = default;

  // Takes an existing run sequence; throws InputError unless it is canonical
  // and sums to height*width.
  RleMask(uint32_t height, uint32_t width, std::vector<uint32_t> runs);

  // Encodes a dense row-major grid (nonzero = foreground).
  static RleMask encode(uint32_t height, uint32_t width,
                        std::span<const uint8_t> dense);

  // Builds a mask from strictly increasing row-major pixel indices.
  static RleMask from_sorted_indices(uint32_t height, uint32_t width,
                                     std::span<const uint32_t> indices);

  static RleMask empty_mask(uint32_t height, uint32_t width);

  std::vector<uint8_t> decode() const;

  // Row-major indices of all foreground pixels, increasing.
  std::vector<uint32_t> foreground_indices() const;

  uint32_t height() const { return height_; }
  uint32_t width() const { return width_; }
  const std::vector<uint32_t>& runs() const { return runs_; }
  uint64_t area() const { return area_; }
  bool is_empty() const { return area_ == 0; }

  friend bool operator==(const RleMask&, const RleMask&) = default;

 private:
  uint32_t height_ = 0;
  uint32_t width_ = 0;
  uint64_t area_ = 0;
  std::vector<uint32_t> runs_;
};

// |a ∩ b| computed by merging run lists, no decompression.
uint64_t intersection_area(const RleMask& a, const RleMask& b);

// |a ∩ b| / |a ∪ b|; 0 when both masks are empty.
double iou(const RleMask& a, const RleMask& b);

// |a ∩ b| / min(|a|, |b|); 0 when either mask is empty.
double min_overlap(const RleMask& a, const RleMask& b);

// Tight box around the foreground; nullopt for an empty mask.
std::optional<BBox2i> bbox(const RleMask& m);

}  // namespace camot
