#pragma once

#include <filesystem>
#include <iosfwd>

#include "specvit/vit.hpp"

namespace specvit {

inline constexpr int kCheckpointVersion = 1;

/// Text container:
///   specvit-checkpoint <version>
///   config <key>=<value> ...
///   tensor <name> <rows> <cols>
///   <rows*cols values, shortest round-trip decimal>
/// Loading rejects unknown versions, missing or extra tensors, and any shape
/// that disagrees with the stored config.
void write_checkpoint(std::ostream& out, const VitModel& model);
VitModel read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const VitModel& model);
VitModel load_checkpoint(const std::filesystem::path& path);

}  // namespace specvit
