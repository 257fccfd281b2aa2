#include "loopscope/ir/json_fields.hpp"

#include <fmt/format.h>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

JsonFields::JsonFields(const nlohmann::json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
  if (!obj_.is_object()) throw SpecError(path_, "expected an object");
}

std::string JsonFields::path_of(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool JsonFields::has(std::string_view key) const { return obj_.contains(std::string(key)); }

const nlohmann::json* JsonFields::optional(std::string_view key) {
  auto it = obj_.find(std::string(key));
  if (it == obj_.end()) return nullptr;
  seen_.emplace(key);
  return &*it;
}

const nlohmann::json& JsonFields::required(std::string_view key) {
  const auto* j = optional(key);
  if (!j) throw SpecError(path_, fmt::format("missing field '{}'", key));
  return *j;
}

std::string JsonFields::string(std::string_view key) {
  const auto& j = required(key);
  if (!j.is_string()) throw SpecError(path_of(key), "expected a string");
  return j.get<std::string>();
}

std::string JsonFields::string_or(std::string_view key, std::string fallback) {
  return has(key) ? string(key) : std::move(fallback);
}

std::int64_t JsonFields::integer(std::string_view key) {
  const auto& j = required(key);
  if (!j.is_number_integer()) throw SpecError(path_of(key), "expected an integer");
  return j.get<std::int64_t>();
}

std::int64_t JsonFields::integer_or(std::string_view key, std::int64_t fallback) {
  return has(key) ? integer(key) : fallback;
}

double JsonFields::number(std::string_view key) {
  const auto& j = required(key);
  if (!j.is_number()) throw SpecError(path_of(key), "expected a number");
  return j.get<double>();
}

double JsonFields::number_or(std::string_view key, double fallback) { return has(key) ? number(key) : fallback; }

bool JsonFields::boolean_or(std::string_view key, bool fallback) {
  const auto* j = optional(key);
  if (!j) return fallback;
  if (!j->is_boolean()) throw SpecError(path_of(key), "expected a boolean");
  return j->get<bool>();
}

void JsonFields::finish() const {
  for (auto it = obj_.begin(); it != obj_.end(); ++it) {
    if (!seen_.count(it.key())) throw SpecError(path_of(it.key()), "unknown field");
  }
}

std::string describe_offset(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return fmt::format("line {}, column {}", line, col);
}

nlohmann::json parse_json_text(std::string_view text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann reports the byte just past the offending token.
    const auto byte = e.byte > 0 ? e.byte - 1 : 0;
    std::string msg = e.what();
    const auto pos = msg.find("syntax error");
    if (pos != std::string::npos) msg = msg.substr(pos);
    throw SpecError(origin + " " + describe_offset(text, byte), msg);
  }
}

}  // namespace loopscope
