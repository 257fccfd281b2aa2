#include "loopscope/ir/value.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

Domain Domain::integer(std::int64_t lo, std::int64_t hi) {
  if (lo > hi) throw DomainError(fmt::format("empty integer domain {}..{}", lo, hi));
  Domain d;
  d.kind = DomainKind::Int;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Domain Domain::boolean() {
  Domain d;
  d.kind = DomainKind::Bool;
  return d;
}

Domain Domain::enumeration(std::vector<std::string> labels) {
  if (labels.empty()) throw DomainError("enum domain needs at least one label");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (labels[i] == labels[j]) throw DomainError("duplicate enum label '" + labels[i] + "'");
    }
  }
  Domain d;
  d.kind = DomainKind::Enum;
  d.labels = std::move(labels);
  return d;
}

Domain Domain::words(const Alphabet& alphabet, std::size_t max_len) {
  Domain d;
  d.kind = DomainKind::Word;
  d.symbols.assign(alphabet.symbols().begin(), alphabet.symbols().end());
  d.max_len = max_len;
  return d;
}

std::uint64_t Domain::size() const {
  switch (kind) {
    case DomainKind::Int:
      return static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
    case DomainKind::Bool:
      return 2;
    case DomainKind::Enum:
      return labels.size();
    case DomainKind::Word:
      return count_words(symbols.size(), max_len);
  }
  return 0;
}

bool Domain::contains(const Value& v) const {
  switch (kind) {
    case DomainKind::Int: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && *i >= lo && *i <= hi;
    }
    case DomainKind::Bool:
      return std::holds_alternative<bool>(v);
    case DomainKind::Enum: {
      const auto* i = std::get_if<std::int64_t>(&v);
      return i && *i >= 0 && static_cast<std::size_t>(*i) < labels.size();
    }
    case DomainKind::Word: {
      const auto* w = std::get_if<Word>(&v);
      if (!w || w->size() > max_len) return false;
      return std::all_of(w->begin(), w->end(), [this](char c) {
        return std::find(symbols.begin(), symbols.end(), c) != symbols.end();
      });
    }
  }
  return false;
}

std::vector<Value> Domain::values() const {
  std::vector<Value> out;
  switch (kind) {
    case DomainKind::Int:
      for (std::int64_t i = lo;; ++i) {
        out.emplace_back(i);
        if (i == hi) break;
      }
      break;
    case DomainKind::Bool:
      out = {Value{false}, Value{true}};
      break;
    case DomainKind::Enum:
      for (std::size_t i = 0; i < labels.size(); ++i) out.emplace_back(static_cast<std::int64_t>(i));
      break;
    case DomainKind::Word:
      for (auto& w : all_words(Alphabet(symbols), max_len)) out.emplace_back(std::move(w));
      break;
  }
  return out;
}

std::int64_t Domain::wrap(std::int64_t v) const {
  const __int128 size = static_cast<__int128>(hi) - lo + 1;
  __int128 r = (static_cast<__int128>(v) - lo) % size;
  if (r < 0) r += size;
  return static_cast<std::int64_t>(r + lo);
}

Value Domain::default_value() const {
  switch (kind) {
    case DomainKind::Int:
      return lo;
    case DomainKind::Bool:
      return false;
    case DomainKind::Enum:
      return std::int64_t{0};
    case DomainKind::Word:
      return Word{};
  }
  return std::int64_t{0};
}

nlohmann::json value_to_json(const Value& v, const Domain& d) {
  switch (d.kind) {
    case DomainKind::Int:
      return std::get<std::int64_t>(v);
    case DomainKind::Bool:
      return std::get<bool>(v);
    case DomainKind::Enum:
      return d.labels.at(static_cast<std::size_t>(std::get<std::int64_t>(v)));
    case DomainKind::Word:
      return std::get<Word>(v);
  }
  return nullptr;
}

Value value_from_json(const nlohmann::json& j, const Domain& d) {
  Value v;
  switch (d.kind) {
    case DomainKind::Int:
      if (!j.is_number_integer()) throw DomainError("expected an integer, got " + j.dump());
      v = j.get<std::int64_t>();
      break;
    case DomainKind::Bool:
      if (!j.is_boolean()) throw DomainError("expected a boolean, got " + j.dump());
      v = j.get<bool>();
      break;
    case DomainKind::Enum: {
      if (!j.is_string()) throw DomainError("expected an enum label, got " + j.dump());
      const auto label = j.get<std::string>();
      auto it = std::find(d.labels.begin(), d.labels.end(), label);
      if (it == d.labels.end()) throw DomainError("unknown enum label '" + label + "'");
      v = static_cast<std::int64_t>(it - d.labels.begin());
      break;
    }
    case DomainKind::Word:
      if (!j.is_string()) throw DomainError("expected a word, got " + j.dump());
      v = j.get<std::string>();
      break;
  }
  if (!d.contains(v)) throw DomainError("value " + j.dump() + " outside declared domain");
  return v;
}

std::string value_to_string(const Value& v, const Domain& d) {
  switch (d.kind) {
    case DomainKind::Int:
      return std::to_string(std::get<std::int64_t>(v));
    case DomainKind::Bool:
      return std::get<bool>(v) ? "true" : "false";
    case DomainKind::Enum:
      return d.labels.at(static_cast<std::size_t>(std::get<std::int64_t>(v)));
    case DomainKind::Word:
      return "\"" + std::get<Word>(v) + "\"";
  }
  return {};
}

nlohmann::json input_to_json(const Input& input, std::span<const VarDecl> decls) {
  if (input.size() != decls.size())
    throw DomainError("expected " + std::to_string(decls.size()) + " input value(s), got " + std::to_string(input.size()));
  auto j = nlohmann::json::object();
  for (std::size_t i = 0; i < decls.size(); ++i) j[decls[i].name] = value_to_json(input.at(i), decls[i].domain);
  return j;
}

Input input_from_json(const nlohmann::json& j, std::span<const VarDecl> decls) {
  if (!j.is_object()) throw DomainError("input must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const bool known = std::any_of(decls.begin(), decls.end(),
                                   [&](const VarDecl& d) { return d.name == it.key(); });
    if (!known) throw DomainError("unknown input '" + it.key() + "'");
  }
  Input out;
  for (const auto& d : decls) {
    if (!j.contains(d.name)) throw DomainError("missing input '" + d.name + "'");
    try {
      out.push_back(value_from_json(j.at(d.name), d.domain));
    } catch (const DomainError& e) {
      throw DomainError("input '" + d.name + "': " + e.what());
    }
  }
  return out;
}

std::vector<Input> enumerate_inputs(std::span<const VarDecl> decls) {
  std::vector<Input> out{Input{}};
  for (const auto& d : decls) {
    std::vector<Input> next;
    const auto vals = d.domain.values();
    next.reserve(out.size() * vals.size());
    for (const auto& prefix : out) {
      for (const auto& v : vals) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace loopscope
