#pragma once

#include <filesystem>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"
#include "linkkit/error.hpp"

namespace linkkit::detail {

using Json = nlohmann::ordered_json;

inline std::string dump_compact(const Json& j) {
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

inline std::string dump_pretty(const Json& j) {
  return j.dump(2, ' ', false, Json::error_handler_t::replace) + "\n";
}

/// Field accessor that reports the line and field name on failure.
class FieldReader {
 public:
  FieldReader(const Json& obj, std::size_t line, std::string prefix = "")
      : obj_(obj), line_(line), prefix_(std::move(prefix)) {}

  const Json& at(const std::string& key) const {
    if (!obj_.is_object() || !obj_.contains(key)) throw SchemaError(line_, prefix_ + key, "missing");
    return obj_.at(key);
  }

  std::string string(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_string()) throw SchemaError(line_, prefix_ + key, "expected a string");
    return v.get<std::string>();
  }

  std::optional<std::string> optional_string(const std::string& key) const {
    if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
    return string(key);
  }

  std::int64_t integer(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_number_integer()) throw SchemaError(line_, prefix_ + key, "expected an integer");
    return v.get<std::int64_t>();
  }

  std::optional<std::int64_t> optional_integer(const std::string& key) const {
    if (!obj_.contains(key) || obj_.at(key).is_null()) return std::nullopt;
    return integer(key);
  }

  FieldReader object(const std::string& key) const {
    const Json& v = at(key);
    if (!v.is_object()) throw SchemaError(line_, prefix_ + key, "expected an object");
    return FieldReader(v, line_, prefix_ + key + ".");
  }

  /// Runs a parser over a string field, converting its DataError into a
  /// SchemaError that names the field.
  template <typename F>
  auto parse(const std::string& key, F&& f) const {
    std::string raw = string(key);
    try {
      return f(raw);
    } catch (const DataError& e) {
      throw SchemaError(line_, prefix_ + key, e.what());
    }
  }

 private:
  const Json& obj_;
  std::size_t line_;
  std::string prefix_;
};

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  out.close();
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace linkkit::detail
