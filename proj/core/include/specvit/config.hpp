#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace specvit {

/// Flat key=value configuration. `[section]` headers prefix the keys that
/// follow with `section.`; `#` starts a comment. Later assignments win.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::istream& in, const std::string& source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  /// Applies a single `key=value` override string.
  void set_assignment(std::string_view assignment);
  void merge(const KeyValueConfig& other);

  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;

  std::string get_string(std::string_view key, std::string_view fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<double> get_doubles(std::string_view key, std::vector<double> fallback) const;
  std::vector<std::int64_t> get_ints(std::string_view key,
                                     std::vector<std::int64_t> fallback) const;

  /// Keys under `prefix.`, with the prefix stripped.
  KeyValueConfig subtree(std::string_view prefix) const;
  /// Distinct first components of all keys (e.g. "device" for "device.0.name").
  std::vector<std::string> child_names(std::string_view prefix) const;

  /// Sorted `key=value` lines; the resolved form written into run directories.
  void write(std::ostream& out) const;
  std::string to_string() const;

  const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string, std::less<>> entries_;
};

/// Shortest round-trip decimal representation.
std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

}  // namespace specvit
