#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/word.hpp"

namespace loopscope {

/// Runtime value. Enum values are stored as their label index.
using Value = std::variant<std::int64_t, bool, Word>;

enum class DomainKind { Int, Bool, Enum, Word };

/// A finite domain for inputs and variables.
struct Domain {
  DomainKind kind = DomainKind::Int;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  std::vector<std::string> labels;  // Enum
  std::vector<char> symbols;        // Word
  std::size_t max_len = 0;          // Word

  static Domain integer(std::int64_t lo, std::int64_t hi);
  static Domain boolean();
  static Domain enumeration(std::vector<std::string> labels);
  static Domain words(const Alphabet& alphabet, std::size_t max_len);

  std::uint64_t size() const;
  bool contains(const Value& v) const;
  /// All members, in a fixed order (ascending ints, false<true, label order,
  /// length-lex words).
  std::vector<Value> values() const;
  /// Reduce an integer into [lo, hi] modulo the domain size.
  std::int64_t wrap(std::int64_t v) const;
  Value default_value() const;

  friend bool operator==(const Domain&, const Domain&) = default;
};

struct VarDecl {
  std::string name;
  Domain domain;
  Value init;
};

/// One value per declared input, in declaration order.
using Input = std::vector<Value>;

nlohmann::json value_to_json(const Value& v, const Domain& d);
Value value_from_json(const nlohmann::json& j, const Domain& d);
std::string value_to_string(const Value& v, const Domain& d);

nlohmann::json input_to_json(const Input& input, std::span<const VarDecl> decls);
/// Missing keys are an error; unknown keys are an error.
Input input_from_json(const nlohmann::json& j, std::span<const VarDecl> decls);
/// Cartesian product of all input domains, first declaration varying slowest.
std::vector<Input> enumerate_inputs(std::span<const VarDecl> decls);

}  // namespace loopscope
