#include "loopscope/ir/process.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"

namespace loopscope {

std::optional<std::size_t> ProcessSpec::slot_of(std::string_view n) const {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name == n) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ProcessSpec::node_of(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

Alphabet parse_alphabet(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw SpecError(path, "expected an array of 1-character strings");
  std::vector<char> symbols;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& s = j[i];
    const auto where = fmt::format("{}[{}]", path, i);
    if (!s.is_string() || s.get<std::string>().size() != 1) throw SpecError(where, "expected a 1-character string");
    const char c = s.get<std::string>()[0];
    if (c == Alphabet::kStop) throw SpecError(where, "'!' is reserved for the emergency stop");
    symbols.push_back(c);
  }
  try {
    return Alphabet(std::move(symbols));
  } catch (const DomainError& e) {
    throw SpecError(path, e.what());
  }
}

VarDecl parse_decl(const nlohmann::json& j, const std::string& path, const Alphabet& alphabet,
                   std::size_t max_len, bool allow_init) {
  JsonFields f(j, path);
  VarDecl d;
  d.name = f.string("name");
  if (!is_identifier(d.name) || d.name.find('-') != std::string::npos)
    throw SpecError(f.path_of("name"), "'" + d.name + "' is not an identifier");
  static const char* kReserved[] = {"true", "false", "concat", "word", "int", "len", "if"};
  for (const char* r : kReserved) {
    if (d.name == r) throw SpecError(f.path_of("name"), "'" + d.name + "' is reserved");
  }
  const auto type = f.string("type");
  try {
    if (type == "int") {
      d.domain = Domain::integer(f.integer("min"), f.integer("max"));
    } else if (type == "bool") {
      d.domain = Domain::boolean();
    } else if (type == "enum") {
      const auto& vals = f.required("values");
      if (!vals.is_array()) throw SpecError(f.path_of("values"), "expected an array of labels");
      std::vector<std::string> labels;
      for (const auto& v : vals) {
        if (!v.is_string()) throw SpecError(f.path_of("values"), "enum labels must be strings");
        labels.push_back(v.get<std::string>());
      }
      d.domain = Domain::enumeration(std::move(labels));
    } else if (type == "word") {
      const auto len = f.integer_or("max_len", static_cast<std::int64_t>(max_len));
      if (len < 0 || static_cast<std::size_t>(len) > max_len)
        throw SpecError(f.path_of("max_len"), fmt::format("must be within 0..{}", max_len));
      d.domain = Domain::words(alphabet, static_cast<std::size_t>(len));
    } else {
      throw SpecError(f.path_of("type"), "unknown type '" + type + "' (int, bool, enum, word)");
    }
  } catch (const DomainError& e) {
    throw SpecError(path, e.what());
  }
  d.init = d.domain.default_value();
  if (allow_init) {
    if (const auto* init = f.optional("init")) {
      try {
        d.init = value_from_json(*init, d.domain);
      } catch (const DomainError& e) {
        throw SpecError(f.path_of("init"), e.what());
      }
    }
  }
  f.finish();
  return d;
}

std::string expr_source(const nlohmann::json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? "true" : "false";
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  throw SpecError(path, "expected an expression string");
}

NodeDuration parse_duration(const nlohmann::json& j, const std::string& path) {
  NodeDuration d;
  if (j.is_string() && j.get<std::string>() == "next-event") {
    d.until_next_event = true;
  } else if (j.is_number() && j.get<double>() >= 0) {
    d.fixed = from_seconds(j.get<double>());
  } else {
    throw SpecError(path, "duration must be a non-negative number of seconds or \"next-event\"");
  }
  return d;
}

Type word_type() {
  Type t;
  t.kind = TypeKind::Word;
  return t;
}

Type bool_type() {
  Type t;
  t.kind = TypeKind::Bool;
  return t;
}

}  // namespace

ProcessSpec parse_process_spec(const nlohmann::json& doc) {
  JsonFields top(doc, "");
  ProcessSpec spec;
  if (const auto* mode = top.optional("mode")) {
    if (*mode != "process") throw SpecError("mode", "expected \"process\" or \"tape\"");
  }
  spec.name = top.string("name");
  if (!is_identifier(spec.name)) throw SpecError("name", "'" + spec.name + "' is not an identifier");
  if (const auto* a = top.optional("alphabet")) spec.alphabet = parse_alphabet(*a, "alphabet");
  const auto len = top.integer("max_answer_len");
  if (len < 1 || len > 16) throw SpecError("max_answer_len", "must be within 1..16");
  spec.max_answer_len = static_cast<std::size_t>(len);

  auto read_decls = [&](std::string_view key, bool allow_init) {
    if (const auto* list = top.optional(key)) {
      if (!list->is_array()) throw SpecError(std::string(key), "expected an array");
      for (std::size_t i = 0; i < list->size(); ++i) {
        auto d = parse_decl((*list)[i], fmt::format("{}[{}]", key, i), spec.alphabet, spec.max_answer_len,
                            allow_init);
        if (spec.slot_of(d.name))
          throw SpecError(fmt::format("{}[{}].name", key, i), "duplicate variable '" + d.name + "'");
        spec.slots.push_back(std::move(d));
      }
    }
  };
  read_decls("inputs", false);
  spec.input_count = spec.slots.size();
  read_decls("vars", true);

  const auto& nodes = top.required("nodes");
  if (!nodes.is_object() || nodes.empty()) throw SpecError("nodes", "expected a non-empty object");
  for (auto it = nodes.begin(); it != nodes.end(); ++it) {
    ProcessNode n;
    n.id = it.key();
    spec.nodes.push_back(std::move(n));
  }
  const auto entry = top.string("entry");
  const auto entry_idx = spec.node_of(entry);
  if (!entry_idx) throw SpecError("entry", "unknown node reference '" + entry + "'");
  spec.entry = *entry_idx;
  top.finish();

  const Scope scope{spec.slots, &spec.alphabet, spec.max_answer_len};
  std::size_t idx = 0;
  for (auto it = nodes.begin(); it != nodes.end(); ++it, ++idx) {
    auto& node = spec.nodes[idx];
    const std::string path = "nodes." + it.key();
    JsonFields f(it.value(), path);
    auto ref = [&](std::string_view key) {
      const auto target = f.string(key);
      const auto i = spec.node_of(target);
      if (!i) throw SpecError(f.path_of(key), "unknown node reference '" + target + "'");
      return *i;
    };
    auto expr = [&](const nlohmann::json& j, const std::string& where, std::optional<Type> expected) {
      return compile_expr(expr_source(j, where), scope, expected, where);
    };

    const auto kind = f.string("kind");
    if (kind == "compute") {
      node.kind = ProcessNode::Kind::Compute;
      const auto& assign = f.required("assign");
      if (!assign.is_object()) throw SpecError(f.path_of("assign"), "expected an object var -> expression");
      for (auto a = assign.begin(); a != assign.end(); ++a) {
        const auto where = f.path_of("assign") + "." + a.key();
        const auto slot = spec.slot_of(a.key());
        if (!slot) throw SpecError(where, "unbound variable '" + a.key() + "'");
        if (*slot < spec.input_count) throw SpecError(where, "cannot assign to input '" + a.key() + "'");
        auto target = Type::of(spec.slots[*slot].domain);
        if (target.kind == TypeKind::Int) {
          // Any integer is accepted and wrapped into the variable's range.
          Expr e = compile_expr(expr_source(a.value(), where), scope, std::nullopt, where);
          if (e.type.kind != TypeKind::Int)
            throw SpecError(where, fmt::format("type mismatch: expected {}, got {}", target.name(), e.type.name()));
          node.assign.emplace_back(*slot, std::move(e));
        } else {
          node.assign.emplace_back(*slot, expr(a.value(), where, target));
        }
      }
      node.next = ref("next");
    } else if (kind == "branch") {
      node.kind = ProcessNode::Kind::Branch;
      node.condition = expr(f.required("if"), f.path_of("if"), bool_type());
      node.then_node = ref("then");
      node.else_node = ref("else");
    } else if (kind == "query") {
      node.kind = ProcessNode::Kind::Query;
      node.prompt = expr(f.required("prompt"), f.path_of("prompt"), word_type());
      const auto bind = f.string("bind");
      const auto slot = spec.slot_of(bind);
      if (!slot) throw SpecError(f.path_of("bind"), "unbound variable '" + bind + "'");
      if (*slot < spec.input_count) throw SpecError(f.path_of("bind"), "cannot bind input '" + bind + "'");
      const auto& dom = spec.slots[*slot].domain;
      if (dom.kind != DomainKind::Word || dom.max_len != spec.max_answer_len)
        throw SpecError(f.path_of("bind"),
                        "'" + bind + "' must be a word variable of length up to max_answer_len");
      node.bind = *slot;
      node.next = ref("next");
      node.tag = f.string_or("tag", "");
      if (const auto* h = f.optional("hazard")) node.hazard = expr(*h, f.path_of("hazard"), bool_type());
      const auto k = f.integer_or("suggest_len", 0);
      if (k < 0 || static_cast<std::size_t>(k) > spec.max_answer_len)
        throw SpecError(f.path_of("suggest_len"), "must be within 0..max_answer_len");
      node.suggest_len = static_cast<std::size_t>(k);
      if (f.has("deadline")) {
        const double d = f.number("deadline");
        if (d < 0) throw SpecError(f.path_of("deadline"), "must be non-negative");
        node.deadline = from_seconds(d);
      }
    } else if (kind == "halt") {
      node.kind = ProcessNode::Kind::Halt;
      node.output = expr(f.required("output"), f.path_of("output"), word_type());
    } else {
      throw SpecError(f.path_of("kind"), "unknown node kind '" + kind + "' (compute, branch, query, halt)");
    }
    if (const auto* d = f.optional("duration")) node.duration = parse_duration(*d, f.path_of("duration"));
    f.finish();
  }

  spec.source = doc;
  spec.hash = fnv1a64(doc.dump());
  return spec;
}

ProcessMachine::ProcessMachine(ProcessSpec spec) : spec_(std::move(spec)) {}

Configuration ProcessMachine::initial(const Input& input) const {
  if (input.size() != spec_.input_count)
    throw DomainError(fmt::format("expected {} input value(s), got {}", spec_.input_count, input.size()));
  Configuration c;
  c.node = spec_.entry;
  c.store.reserve(spec_.slots.size());
  for (std::size_t i = 0; i < spec_.slots.size(); ++i) {
    const auto& decl = spec_.slots[i];
    if (i < spec_.input_count) {
      if (!decl.domain.contains(input[i]))
        throw DomainError("input '" + decl.name + "' outside its declared domain");
      c.store.push_back(input[i]);
    } else {
      c.store.push_back(decl.init);
    }
  }
  return c;
}

StepEffect ProcessMachine::step(const Configuration& config) const {
  const auto& node = spec_.nodes.at(config.node);
  const EvalContext ctx{spec_.alphabet, spec_.max_answer_len, config.store};
  switch (node.kind) {
    case ProcessNode::Kind::Compute: {
      Configuration next = config;
      for (const auto& [slot, e] : node.assign) {
        Value v = eval(e, ctx);
        const auto& dom = spec_.slots[slot].domain;
        if (dom.kind == DomainKind::Int) {
          v = dom.wrap(std::get<std::int64_t>(v));
        } else if (dom.kind == DomainKind::Word) {
          auto& w = std::get<Word>(v);
          if (w.size() > dom.max_len) w.resize(dom.max_len);
        }
        next.store[slot] = std::move(v);
      }
      next.node = node.next;
      ++next.steps;
      return Continue{std::move(next)};
    }
    case ProcessNode::Kind::Branch: {
      Configuration next = config;
      next.node = std::get<bool>(eval(node.condition, ctx)) ? node.then_node : node.else_node;
      ++next.steps;
      return Continue{std::move(next)};
    }
    case ProcessNode::Kind::Query: {
      Query q;
      q.prompt = std::get<Word>(eval(node.prompt, ctx));
      q.at = config;
      if (node.suggest_len > 0) {
        const auto k = std::min(node.suggest_len, q.prompt.size());
        q.suggested = q.prompt.substr(q.prompt.size() - k);
      }
      if (node.hazard) q.hazard = std::get<bool>(eval(*node.hazard, ctx));
      q.tag = node.tag;
      q.deadline = node.deadline;
      return q;
    }
    case ProcessNode::Kind::Halt: {
      Halt h;
      h.output = std::get<Word>(eval(node.output, ctx));
      h.at = config;
      return h;
    }
  }
  return Abort{};
}

StepEffect ProcessMachine::resume(const Configuration& at_query, const Answer& answer) const {
  if (answer.is_stop()) return Abort{};
  const auto& node = spec_.nodes.at(at_query.node);
  if (node.kind != ProcessNode::Kind::Query) throw MachineError("resume on a configuration that is not at a query");
  if (!in_answer_space(answer.word()))
    throw DomainError("answer '" + answer.word() + "' is outside the answer space");
  Configuration next = at_query;
  next.store[node.bind] = answer.word();
  next.node = node.next;
  ++next.queries;
  return Continue{std::move(next)};
}

NodeDuration ProcessMachine::duration(const Configuration& config) const {
  return spec_.nodes.at(config.node).duration;
}

Configuration ProcessMachine::with_var(const Configuration& config, std::size_t slot, const Value& v) const {
  Configuration c = config;
  const auto& dom = spec_.slots.at(slot).domain;
  Value val = v;
  if (dom.kind == DomainKind::Int) val = dom.wrap(std::get<std::int64_t>(v));
  if (!dom.contains(val)) throw DomainError("value outside the domain of '" + spec_.slots[slot].name + "'");
  c.store[slot] = std::move(val);
  return c;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

}  // namespace loopscope
