#pragma once

// Flat `key = value` documents used for source, training and experiment
// configuration. '#' starts a comment line; keys may contain dots.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace linkkit {

class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(std::string_view text, const std::string& origin = "<config>");
  static KvConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string string(const std::string& key) const;
  std::string string_or(const std::string& key, const std::string& fallback) const;
  std::optional<std::string> optional_string(const std::string& key) const;
  std::int64_t integer_or(const std::string& key, std::int64_t fallback) const;
  double number_or(const std::string& key, double fallback) const;
  bool boolean_or(const std::string& key, bool fallback) const;
  /// Comma-separated list, items trimmed, empty items dropped.
  std::vector<std::string> list(const std::string& key) const;

  /// Throws UsageError naming any key outside `known`.
  void require_known(const std::set<std::string>& known) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::string origin_;
  std::map<std::string, std::string> entries_;
};

}  // namespace linkkit
