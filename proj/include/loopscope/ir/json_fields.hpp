#pragma once

#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace loopscope {

/// Reads the members of one JSON object, remembering which keys were
/// consumed so that leftovers can be rejected. Errors are SpecError with a
/// dotted JSON path.
class JsonFields {
 public:
  JsonFields(const nlohmann::json& obj, std::string path);

  const std::string& path() const noexcept { return path_; }
  std::string path_of(std::string_view key) const;

  bool has(std::string_view key) const;
  const nlohmann::json* optional(std::string_view key);
  const nlohmann::json& required(std::string_view key);

  std::string string(std::string_view key);
  std::string string_or(std::string_view key, std::string fallback);
  std::int64_t integer(std::string_view key);
  std::int64_t integer_or(std::string_view key, std::int64_t fallback);
  double number(std::string_view key);
  double number_or(std::string_view key, double fallback);
  bool boolean_or(std::string_view key, bool fallback);

  /// Throws if any key was never read.
  void finish() const;

 private:
  const nlohmann::json& obj_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

/// "line L, column C" for a byte offset into `text`.
std::string describe_offset(std::string_view text, std::size_t byte);

/// Parse JSON text, turning syntax errors into position-annotated SpecError.
nlohmann::json parse_json_text(std::string_view text, const std::string& origin);

}  // namespace loopscope
