#include "specvit/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "specvit/errors.hpp"

namespace specvit {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (!s.empty()) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ValidationError("not a number: '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ValidationError("not an integer: '" + std::string(s) + "'");
  return v;
}

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string section;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(source, line_no, "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    cfg.set(std::move(full), std::string(trim(line.substr(eq + 1))));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(std::string key, std::string value) {
  entries_.insert_or_assign(std::move(key), std::move(value));
}

void KeyValueConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty())
    throw ValidationError("override must be key=value: '" + std::string(assignment) + "'");
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.entries_) set(k, v);
}

bool KeyValueConfig::contains(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::string> KeyValueConfig::find(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
  const auto v = find(key);
  return v ? *v : std::string(fallback);
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return parse_int(*v);
  } catch (const ValidationError& e) {
    throw ValidationError("config key '" + std::string(key) + "': " + e.what());
  }
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const ValidationError& e) {
    throw ValidationError("config key '" + std::string(key) + "': " + e.what());
  }
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes" || *v == "on") return true;
  if (*v == "0" || *v == "false" || *v == "no" || *v == "off") return false;
  throw ValidationError("config key '" + std::string(key) + "': not a boolean: '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(std::string_view key,
                                                std::vector<double> fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (auto item : split_list(*v)) out.push_back(parse_double(item));
  return out;
}

std::vector<std::int64_t> KeyValueConfig::get_ints(std::string_view key,
                                                   std::vector<std::int64_t> fallback) const {
  const auto v = find(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  for (auto item : split_list(*v)) out.push_back(parse_int(item));
  return out;
}

KeyValueConfig KeyValueConfig::subtree(std::string_view prefix) const {
  KeyValueConfig out;
  const std::string p = std::string(prefix) + ".";
  for (const auto& [k, v] : entries_)
    if (k.size() > p.size() && k.compare(0, p.size(), p) == 0) out.set(k.substr(p.size()), v);
  return out;
}

std::vector<std::string> KeyValueConfig::child_names(std::string_view prefix) const {
  std::set<std::string> names;
  for (const auto& [k, v] : subtree(prefix).entries_) names.insert(k.substr(0, k.find('.')));
  return {names.begin(), names.end()};
}

void KeyValueConfig::write(std::ostream& out) const {
  for (const auto& [k, v] : entries_) out << k << '=' << v << '\n';
}

std::string KeyValueConfig::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace specvit
