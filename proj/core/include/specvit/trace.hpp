#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace specvit {

/// The packet-length sequence emitted by one device, indexed by packet order.
struct PacketTrace {
  int device_id = 0;
  std::string device_name;
  std::vector<std::int32_t> lengths;

  std::size_t count() const noexcept { return lengths.size(); }

  friend bool operator==(const PacketTrace&, const PacketTrace&) = default;
};

struct TraceStats {
  double mean_bytes = 0.0;
  double std_bytes = 0.0;  // population
  double cv = 0.0;
  std::int32_t min_bytes = 0;
  std::int32_t max_bytes = 0;
};

inline constexpr std::string_view kTraceCsvHeader = "device_id,device_name,packet_index,length_bytes";

/// Parses trace-CSV. Throws ParseError (with the 1-based line) on malformed
/// rows and ValidationError when device ids are not dense or a device has no
/// packets. The result is ordered by device_id.
std::vector<PacketTrace> parse_traces(std::istream& in, const std::string& source = "<traces>");
std::vector<PacketTrace> load_traces(const std::filesystem::path& path);

void write_traces(std::ostream& out, std::span<const PacketTrace> traces);
void save_traces(const std::filesystem::path& path, std::span<const PacketTrace> traces);

/// Throws ValidationError("insufficient data") for fewer than two packets.
TraceStats trace_stats(const PacketTrace& trace);

/// Checks the corpus-level invariants: ids dense in [0, n), no empty traces,
/// all lengths >= 1.
void validate_corpus(std::span<const PacketTrace> traces);

}  // namespace specvit
