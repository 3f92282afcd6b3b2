#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specvit/config.hpp"
#include "specvit/trace.hpp"

namespace specvit {

struct PeriodicComponent {
  double frequency = 0.0;  // cycles/packet, (0, 0.5]
  double amplitude = 0.0;  // bytes
};

/// Sinusoids-plus-bursts packet-length model:
///   len[i] = clamp(round(base + sum_j a_j sin(2 pi f_j i) + noise_i + burst_i), 43, 1500)
struct SynthProfile {
  std::string name = "synthetic";
  std::int32_t base_bytes = 300;
  std::vector<PeriodicComponent> periodic_components;
  double burst_prob = 0.0;
  std::int32_t burst_bytes = 0;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr std::int32_t kMinPacketBytes = 43;
inline constexpr std::int32_t kMaxPacketBytes = 1500;

PacketTrace generate_trace(const SynthProfile& profile, std::size_t length, int device_id);

/// Reads `device.<id>.*` profiles from a config:
///   device.0.name, .base_bytes, .components (f:amp,f:amp), .burst_prob,
///   .burst_bytes, .noise_std, .seed
/// Ids must be dense starting at 0.
std::vector<SynthProfile> profiles_from_config(const KeyValueConfig& cfg);

}  // namespace specvit
