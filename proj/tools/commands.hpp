#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "specvit/config.hpp"

namespace specvit::cli {

struct Common {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::int64_t> seed;
  std::size_t jobs = 1;
  std::vector<std::string> overrides;

  /// Config file, then --set assignments, then --seed. Later sources win.
  KeyValueConfig resolve() const;
};

int cmd_ingest(const Common& c, const std::vector<std::filesystem::path>& trace_files);
int cmd_synth(const Common& c);
int cmd_spectrogram(const Common& c, const std::optional<std::filesystem::path>& traces);
int cmd_train(const Common& c, const std::optional<std::filesystem::path>& traces);
int cmd_evaluate(const Common& c, const std::filesystem::path& run_dir);
int cmd_sweep(const Common& c, const std::optional<std::filesystem::path>& traces);
int cmd_crosseval(const Common& c, const std::filesystem::path& run_dir);

}  // namespace specvit::cli
