#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "specvit/trace.hpp"

namespace specvit {

/// Sliding-window parameters. The stride is derived from the overlap as
/// round(seg_len * (1 - overlap)), never below 1.
class SegmentationParams {
 public:
  SegmentationParams(std::size_t seg_len, double overlap);

  std::size_t seg_len() const noexcept { return seg_len_; }
  double overlap() const noexcept { return overlap_; }
  std::size_t stride() const noexcept { return stride_; }

 private:
  std::size_t seg_len_;
  double overlap_;
  std::size_t stride_;
};

struct Segment {
  int device_id = 0;
  std::size_t segment_index = 0;
  std::size_t start = 0;  // packet offset within the source trace
  std::vector<double> values;
  bool centered = false;
  double segment_mean = 0.0;
};

std::size_t stride_for(std::size_t seg_len, double overlap);

/// floor((n - seg_len) / stride) + 1, or 0 when n < seg_len.
std::size_t segment_count(std::size_t n, const SegmentationParams& params);

/// Segments of trace packets [begin, end). Segment starts are reported
/// relative to the full trace so held-out regions can be checked for overlap.
std::vector<Segment> segment_trace(const PacketTrace& trace, const SegmentationParams& params,
                                   std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1));

/// Subtracts the per-segment mean. Throws on an already-centered segment.
Segment mean_center(Segment segment);

/// Debug manifest: device_id,segment_index,start,mean
void write_segment_manifest(std::ostream& out, std::span<const Segment> segments);

}  // namespace specvit
