#include "specvit/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>

#include "specvit/errors.hpp"

namespace specvit {
namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

bool parse_int_field(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

struct DeviceRows {
  std::string name;
  std::int64_t last_index = -1;
  std::vector<std::int32_t> lengths;
};

}  // namespace

std::vector<PacketTrace> parse_traces(std::istream& in, const std::string& source) {
  std::string raw;
  std::size_t line_no = 0;
  if (!std::getline(in, raw)) throw ParseError(source, 1, "missing header");
  ++line_no;
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();
  if (raw != kTraceCsvHeader)
    throw ParseError(source, line_no, "expected header '" + std::string(kTraceCsvHeader) + "'");

  std::map<std::int64_t, DeviceRows> devices;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) throw ParseError(source, line_no, "expected 4 fields");

    std::int64_t device_id = 0, packet_index = 0, length = 0;
    if (!parse_int_field(fields[0], device_id) || device_id < 0)
      throw ParseError(source, line_no, "invalid device_id");
    if (!parse_int_field(fields[2], packet_index) || packet_index < 0)
      throw ParseError(source, line_no, "invalid packet_index");
    if (!parse_int_field(fields[3], length))
      throw ParseError(source, line_no, "length_bytes is not an integer");
    if (length < 1) throw ParseError(source, line_no, "length_bytes must be >= 1");
    if (length > std::numeric_limits<std::int32_t>::max())
      throw ParseError(source, line_no, "length_bytes out of range");

    auto& dev = devices[device_id];
    if (dev.lengths.empty()) {
      dev.name = std::string(fields[1]);
    } else if (dev.name != fields[1]) {
      throw ParseError(source, line_no, "device_name changes within device " +
                                            std::to_string(device_id));
    }
    if (packet_index <= dev.last_index)
      throw ParseError(source, line_no, "packet_index not ascending for device " +
                                            std::to_string(device_id));
    dev.last_index = packet_index;
    dev.lengths.push_back(static_cast<std::int32_t>(length));
  }

  std::vector<PacketTrace> traces;
  traces.reserve(devices.size());
  for (auto& [id, dev] : devices)
    traces.push_back(PacketTrace{static_cast<int>(id), std::move(dev.name), std::move(dev.lengths)});
  validate_corpus(traces);
  return traces;
}

std::vector<PacketTrace> load_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open trace file " + path.string());
  return parse_traces(in, path.string());
}

void write_traces(std::ostream& out, std::span<const PacketTrace> traces) {
  out << kTraceCsvHeader << '\n';
  for (const auto& t : traces) {
    if (t.device_name.find_first_of(",\n") != std::string::npos)
      throw ValidationError("device name '" + t.device_name + "' cannot be written as CSV");
    for (std::size_t i = 0; i < t.lengths.size(); ++i)
      out << t.device_id << ',' << t.device_name << ',' << i << ',' << t.lengths[i] << '\n';
  }
}

void save_traces(const std::filesystem::path& path, std::span<const PacketTrace> traces) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write trace file " + path.string());
  write_traces(out, traces);
}

TraceStats trace_stats(const PacketTrace& trace) {
  if (trace.count() < 2) throw ValidationError("insufficient data");
  const auto n = static_cast<double>(trace.count());
  double sum = 0.0;
  for (auto v : trace.lengths) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (auto v : trace.lengths) ss += (v - mean) * (v - mean);
  const auto [lo, hi] = std::minmax_element(trace.lengths.begin(), trace.lengths.end());

  TraceStats s;
  s.mean_bytes = mean;
  s.std_bytes = std::sqrt(ss / n);
  s.cv = s.std_bytes / mean;
  s.min_bytes = *lo;
  s.max_bytes = *hi;
  return s;
}

void validate_corpus(std::span<const PacketTrace> traces) {
  std::vector<bool> seen(traces.size(), false);
  for (const auto& t : traces) {
    if (t.device_id < 0 || static_cast<std::size_t>(t.device_id) >= traces.size() ||
        seen[static_cast<std::size_t>(t.device_id)])
      throw ValidationError("device ids not dense");
    seen[static_cast<std::size_t>(t.device_id)] = true;
    if (t.lengths.empty())
      throw ValidationError("device " + std::to_string(t.device_id) + " has no packets");
    for (auto v : t.lengths)
      if (v < 1) throw ValidationError("device " + std::to_string(t.device_id) +
                                       " has a non-positive packet length");
  }
}

}  // namespace specvit
