#include "linkkit/kvconfig.hpp"

#include <cctype>
#include <sstream>

#include "json_util.hpp"
#include "linkkit/error.hpp"

namespace linkkit {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text, const std::string& origin) {
  KvConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (cfg.entries_.count(key)) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    cfg.entries_[key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

KvConfig KvConfig::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_text_file(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  return parse(text, path.string());
}

bool KvConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

void KvConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

std::string KvConfig::string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw UsageError(origin_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string KvConfig::string_or(const std::string& key, const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second;
}

std::optional<std::string> KvConfig::optional_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

std::int64_t KvConfig::integer_or(const std::string& key, std::int64_t fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(origin_ + ": key '" + key + "' expects an integer, got '" + it->second + "'");
}

double KvConfig::number_or(const std::string& key, double fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used == it->second.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(origin_ + ": key '" + key + "' expects a number, got '" + it->second + "'");
}

bool KvConfig::boolean_or(const std::string& key, bool fallback) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(origin_ + ": key '" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> KvConfig::list(const std::string& key) const {
  std::vector<std::string> out;
  auto it = entries_.find(key);
  if (it == entries_.end()) return out;
  std::istringstream in(it->second);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void KvConfig::require_known(const std::set<std::string>& known) const {
  for (const auto& [k, _] : entries_) {
    if (!known.count(k)) throw UsageError(origin_ + ": unknown key '" + k + "'");
  }
}

}  // namespace linkkit
