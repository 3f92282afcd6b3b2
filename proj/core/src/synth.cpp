#include "specvit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {

void SynthProfile::validate() const {
  for (const auto& c : periodic_components) {
    if (!(c.frequency > 0.0) || c.frequency > 0.5)
      throw ValidationError("periodic component frequency " + format_double(c.frequency) +
                            " outside (0, 0.5]");
    if (!std::isfinite(c.amplitude)) throw ValidationError("non-finite component amplitude");
  }
  if (!(burst_prob >= 0.0 && burst_prob <= 1.0))
    throw ValidationError("burst_prob must lie in [0, 1]");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
}

PacketTrace generate_trace(const SynthProfile& profile, std::size_t length, int device_id) {
  profile.validate();
  if (length < 1) throw ValidationError("trace length must be >= 1");

  // Noise and burst draws come from separate streams so toggling one does not
  // shift the other.
  Rng noise_rng(derive_seed(profile.seed, "synth.noise"));
  Rng burst_rng(derive_seed(profile.seed, "synth.burst"));

  PacketTrace trace;
  trace.device_id = device_id;
  trace.device_name = profile.name;
  trace.lengths.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    double v = profile.base_bytes;
    for (const auto& c : profile.periodic_components)
      v += c.amplitude * std::sin(2.0 * std::numbers::pi * c.frequency * static_cast<double>(i));
    if (profile.noise_std > 0.0) v += profile.noise_std * noise_rng.normal();
    if (profile.burst_prob > 0.0 && burst_rng.bernoulli(profile.burst_prob)) v += profile.burst_bytes;
    const double clamped = std::clamp(std::round(v), static_cast<double>(kMinPacketBytes),
                                      static_cast<double>(kMaxPacketBytes));
    trace.lengths[i] = static_cast<std::int32_t>(clamped);
  }
  return trace;
}

std::vector<SynthProfile> profiles_from_config(const KeyValueConfig& cfg) {
  const auto devices = cfg.subtree("device");
  std::vector<SynthProfile> profiles;
  for (std::size_t id = 0;; ++id) {
    const auto dev = devices.subtree(std::to_string(id));
    if (dev.entries().empty()) break;
    SynthProfile p;
    p.name = dev.get_string("name", "device" + std::to_string(id));
    p.base_bytes = static_cast<std::int32_t>(dev.get_int("base_bytes", p.base_bytes));
    p.burst_prob = dev.get_double("burst_prob", 0.0);
    p.burst_bytes = static_cast<std::int32_t>(dev.get_int("burst_bytes", 0));
    p.noise_std = dev.get_double("noise_std", 0.0);
    p.seed = static_cast<std::uint64_t>(dev.get_int("seed", static_cast<std::int64_t>(id)));
    const auto comps = dev.get_string("components", "");
    std::string_view rest = comps;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = rest.substr(0, comma);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos)
        throw ValidationError("device." + std::to_string(id) +
                              ".components entries must be freq:amplitude");
      p.periodic_components.push_back(
          {parse_double(item.substr(0, colon)), parse_double(item.substr(colon + 1))});
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    p.validate();
    profiles.push_back(std::move(p));
  }
  const auto declared = cfg.child_names("device");
  if (declared.size() != profiles.size()) throw ValidationError("synthetic device ids not dense");
  return profiles;
}

}  // namespace specvit
