#include "specvit/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"

namespace specvit {

std::size_t stride_for(std::size_t seg_len, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw ValidationError("overlap " + format_double(overlap) + " outside [0, 1)");
  if (seg_len < 1) throw ValidationError("segment length must be >= 1");
  const double s = std::round(static_cast<double>(seg_len) * (1.0 - overlap));
  return std::max<std::size_t>(1, static_cast<std::size_t>(s));
}

SegmentationParams::SegmentationParams(std::size_t seg_len, double overlap)
    : seg_len_(seg_len), overlap_(overlap), stride_(stride_for(seg_len, overlap)) {}

std::size_t segment_count(std::size_t n, const SegmentationParams& params) {
  if (n < params.seg_len()) return 0;
  return (n - params.seg_len()) / params.stride() + 1;
}

std::vector<Segment> segment_trace(const PacketTrace& trace, const SegmentationParams& params,
                                   std::size_t begin, std::size_t end) {
  end = std::min(end, trace.count());
  if (begin > end) throw ValidationError("segment region begins past its end");
  const std::size_t n = end - begin;
  if (n < params.seg_len())
    throw ValidationError("trace too short: device " + std::to_string(trace.device_id) + " has " +
                          std::to_string(n) + " packets, segment length is " +
                          std::to_string(params.seg_len()));

  const std::size_t count = segment_count(n, params);
  std::vector<Segment> segments(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto& seg = segments[i];
    seg.device_id = trace.device_id;
    seg.segment_index = i;
    seg.start = begin + i * params.stride();
    const auto first = trace.lengths.begin() + static_cast<std::ptrdiff_t>(seg.start);
    seg.values.assign(first, first + static_cast<std::ptrdiff_t>(params.seg_len()));
  }
  return segments;
}

Segment mean_center(Segment segment) {
  if (segment.centered) throw ValidationError("segment is already mean-centered");
  if (segment.values.empty()) throw ValidationError("cannot center an empty segment");
  double sum = 0.0;
  for (double v : segment.values) sum += v;
  const double mean = sum / static_cast<double>(segment.values.size());
  for (double& v : segment.values) v -= mean;
  segment.segment_mean = mean;
  segment.centered = true;
  return segment;
}

void write_segment_manifest(std::ostream& out, std::span<const Segment> segments) {
  out << "device_id,segment_index,start,mean\n";
  for (const auto& s : segments) {
    // Raw segments have not recorded their mean yet.
    const double mean = s.centered ? s.segment_mean
                                   : std::accumulate(s.values.begin(), s.values.end(), 0.0) /
                                         static_cast<double>(s.values.size());
    out << s.device_id << ',' << s.segment_index << ',' << s.start << ',' << format_double(mean) << '\n';
  }
}

}  // namespace specvit
