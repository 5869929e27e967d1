#include "core/rle_mask.hpp"

#include <algorithm>
#include <numeric>

#include "core/errors.hpp"

namespace camot {

bool bbox_intersects(const BBox2i& a, const BBox2i& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h &&
         b.y < a.y + a.h;
}

double bbox_iou(const BBox2i& a, const BBox2i& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  const int64_t iw = std::max(0, x1 - x0);
  const int64_t ih = std::max(0, y1 - y0);
  const int64_t inter = iw * ih;
  const int64_t uni =
      int64_t(a.w) * a.h + int64_t(b.w) * b.h - inter;
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

RleMask::RleMask(uint32_t height, uint32_t width, std::vector<uint32_t> runs)
    : height_(height), width_(width), runs_(std::move(runs)) {
  if (height_ == 0 || width_ == 0) throw InputError("RleMask: empty grid");
  if (runs_.empty()) throw InputError("RleMask: no runs");
  uint64_t total = 0;
  for (size_t i = 0; i < runs_.size(); ++i) {
    if (i > 0 && runs_[i] == 0)
      throw InputError("RleMask: zero-length interior run");
    total += runs_[i];
    if (i & 1) area_ += runs_[i];
  }
  if (total != uint64_t(height_) * width_)
    throw InputError("RleMask: runs do not sum to height*width");
}

RleMask RleMask::encode(uint32_t height, uint32_t width,
                        std::span<const uint8_t> dense) {
  if (height == 0 || width == 0) throw InputError("RleMask: empty grid");
  const uint64_t total = uint64_t(height) * width;
  if (dense.size() != total)
    throw InputError("RleMask: dense grid size mismatch");
  RleMask m;
  m.height_ = height;
  m.width_ = width;
  uint8_t cur = 0;
  uint32_t count = 0;
  for (uint64_t i = 0; i < total; ++i) {
    const uint8_t v = dense[i] ? 1 : 0;
    if (v != cur) {
      m.runs_.push_back(count);
      if (cur) m.area_ += count;
      cur = v;
      count = 0;
    }
    ++count;
  }
  m.runs_.push_back(count);
  if (cur) m.area_ += count;
  return m;
}

RleMask RleMask::from_sorted_indices(uint32_t height, uint32_t width,
                                     std::span<const uint32_t> indices) {
  if (height == 0 || width == 0) throw InputError("RleMask: empty grid");
  const uint64_t total = uint64_t(height) * width;
  RleMask m;
  m.height_ = height;
  m.width_ = width;
  if (indices.empty()) {
    m.runs_.push_back(uint32_t(total));
    return m;
  }
  uint64_t pos = 0;  // next index not yet encoded
  size_t i = 0;
  while (i < indices.size()) {
    const uint32_t start = indices[i];
    size_t j = i + 1;
    while (j < indices.size() && indices[j] == indices[j - 1] + 1) ++j;
    const uint32_t len = uint32_t(j - i);
    const int64_t gap = int64_t(start) - int64_t(pos);
    if (gap < 0 || (gap == 0 && !m.runs_.empty()))
      throw InputError("RleMask: indices not strictly increasing");
    m.runs_.push_back(uint32_t(gap));  // leading gap may be 0
    m.runs_.push_back(len);
    m.area_ += len;
    pos = uint64_t(start) + len;
    i = j;
  }
  if (pos > total) throw InputError("RleMask: index out of range");
  if (pos < total) m.runs_.push_back(uint32_t(total - pos));
  return m;
}

RleMask RleMask::empty_mask(uint32_t height, uint32_t width) {
  if (height == 0 || width == 0) throw InputError("RleMask: empty grid");
  RleMask m;
  m.height_ = height;
  m.width_ = width;
  m.runs_.push_back(height * width);
  return m;
}

std::vector<uint8_t> RleMask::decode() const {
  std::vector<uint8_t> out(uint64_t(height_) * width_, 0);
  uint64_t pos = 0;
  for (size_t i = 0; i < runs_.size(); ++i) {
    if (i & 1) std::fill_n(out.begin() + pos, runs_[i], uint8_t(1));
    pos += runs_[i];
  }
  return out;
}

std::vector<uint32_t> RleMask::foreground_indices() const {
  std::vector<uint32_t> out;
  out.reserve(size_t(area_));
  uint64_t pos = 0;
  for (size_t i = 0; i < runs_.size(); ++i) {
    if (i & 1) {
      for (uint32_t k = 0; k < runs_[i]; ++k) out.push_back(uint32_t(pos + k));
    }
    pos += runs_[i];
  }
  return out;
}

static void require_same_dims(const RleMask& a, const RleMask& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw InputError("RleMask: dimension mismatch");
}

uint64_t intersection_area(const RleMask& a, const RleMask& b) {
  require_same_dims(a, b);
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  size_t ia = 0, ib = 0;
  uint64_t enda = ra[0], endb = rb[0];
  uint64_t pos = 0, inter = 0;
  const uint64_t total = uint64_t(a.height()) * a.width();
  while (pos < total) {
    while (enda <= pos && ia + 1 < ra.size()) enda += ra[++ia];
    while (endb <= pos && ib + 1 < rb.size()) endb += rb[++ib];
    const uint64_t step = std::min(enda, endb);
    if (step <= pos) break;
    if ((ia & 1) && (ib & 1)) inter += step - pos;
    pos = step;
  }
  return inter;
}

double iou(const RleMask& a, const RleMask& b) {
  const uint64_t inter = intersection_area(a, b);
  const uint64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? double(inter) / double(uni) : 0.0;
}

double min_overlap(const RleMask& a, const RleMask& b) {
  if (a.is_empty() || b.is_empty()) return 0.0;
  const uint64_t inter = intersection_area(a, b);
  return double(inter) / double(std::min(a.area(), b.area()));
}

std::optional<BBox2i> bbox(const RleMask& m) {
  if (m.is_empty()) return std::nullopt;
  const uint32_t w = m.width();
  int min_r = int(m.height()), max_r = -1;
  int min_c = int(w), max_c = -1;
  uint64_t pos = 0;
  const auto& runs = m.runs();
  for (size_t i = 0; i < runs.size(); ++i) {
    if ((i & 1) && runs[i] > 0) {
      const uint64_t first = pos, last = pos + runs[i] - 1;
      min_r = std::min(min_r, int(first / w));
      max_r = std::max(max_r, int(last / w));
      if (runs[i] >= w || first / w != last / w) {
        // run spans a row boundary, so it covers a full row of columns
        min_c = 0;
        max_c = int(w) - 1;
      } else {
        min_c = std::min(min_c, int(first % w));
        max_c = std::max(max_c, int(last % w));
      }
    }
    pos += runs[i];
  }
  return BBox2i{min_c, min_r, max_c - min_c + 1, max_r - min_r + 1};
}

}  // namespace camot
