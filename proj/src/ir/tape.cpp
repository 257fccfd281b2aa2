#include "loopscope/ir/tape.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>
#include <unordered_set>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"

namespace loopscope {

namespace {

char one_char(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string() || j.get<std::string>().size() != 1) throw SpecError(path, "expected a 1-character string");
  return j.get<std::string>()[0];
}

std::vector<char> char_list(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array()) throw SpecError(path, "expected an array of 1-character strings");
  std::vector<char> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(one_char(j[i], fmt::format("{}[{}]", path, i)));
  return out;
}

Move parse_move(const nlohmann::json& j, const std::string& path) {
  const char c = one_char(j, path);
  switch (c) {
    case 'L':
      return Move::Left;
    case 'R':
      return Move::Right;
    case 'S':
      return Move::Stay;
    default:
      throw SpecError(path, "move must be L, R or S");
  }
}

void apply_move(std::size_t& head, Move m) {
  if (m == Move::Right) {
    ++head;
  } else if (m == Move::Left && head > 0) {
    --head;
  }
}

char read_at(const std::string& tape, std::size_t head, char blank) {
  return head < tape.size() ? tape[head] : blank;
}

void write_at(std::string& tape, std::size_t head, char c, char blank) {
  if (head >= tape.size()) tape.resize(head + 1, blank);
  tape[head] = c;
}

}  // namespace

TapeSpec parse_tape_spec(const nlohmann::json& doc) {
  JsonFields top(doc, "");
  TapeSpec spec;
  if (top.string("mode") != "tape") throw SpecError("mode", "expected \"tape\"");
  spec.name = top.string("name");
  if (const auto* a = top.optional("alphabet")) {
    auto symbols = char_list(*a, "alphabet");
    if (std::find(symbols.begin(), symbols.end(), Alphabet::kStop) != symbols.end())
      throw SpecError("alphabet", "'!' is reserved for the emergency stop");
    try {
      spec.alphabet = Alphabet(std::move(symbols));
    } catch (const DomainError& e) {
      throw SpecError("alphabet", e.what());
    }
  }
  const auto len = top.integer("max_answer_len");
  if (len < 1 || len > 16) throw SpecError("max_answer_len", "must be within 1..16");
  spec.max_answer_len = static_cast<std::size_t>(len);
  spec.blank = one_char(top.required("blank"), "blank");
  if (spec.alphabet.contains(spec.blank) || spec.blank == Alphabet::kStop)
    throw SpecError("blank", "blank must differ from the alphabet symbols and '!'");
  spec.work_alphabet = char_list(top.required("work_alphabet"), "work_alphabet");
  auto has_work = [&](char c) {
    return std::find(spec.work_alphabet.begin(), spec.work_alphabet.end(), c) != spec.work_alphabet.end();
  };
  if (!has_work(spec.blank)) spec.work_alphabet.push_back(spec.blank);
  for (char c : spec.alphabet.symbols()) {
    if (!has_work(c)) throw SpecError("work_alphabet", fmt::format("must contain input symbol '{}'", c));
  }
  const auto in_len = top.integer_or("input_max_len", 0);
  if (in_len < 0 || in_len > 16) throw SpecError("input_max_len", "must be within 0..16");
  spec.input_max_len = static_cast<std::size_t>(in_len);

  const auto& states = top.required("states");
  if (!states.is_array() || states.empty()) throw SpecError("states", "expected a non-empty array");
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!states[i].is_string()) throw SpecError(fmt::format("states[{}]", i), "expected a string");
    const auto s = states[i].get<std::string>();
    if (std::find(spec.states.begin(), spec.states.end(), s) != spec.states.end())
      throw SpecError(fmt::format("states[{}]", i), "duplicate state '" + s + "'");
    spec.states.push_back(s);
  }
  auto state_index = [&](const std::string& s, const std::string& path) {
    auto it = std::find(spec.states.begin(), spec.states.end(), s);
    if (it == spec.states.end()) throw SpecError(path, "unknown state '" + s + "'");
    return static_cast<std::size_t>(it - spec.states.begin());
  };
  spec.start = state_index(top.string("start"), "start");
  spec.is_oracle.assign(spec.states.size(), false);
  spec.is_halt.assign(spec.states.size(), false);
  auto mark = [&](std::string_view key, std::vector<bool>& flags) {
    const auto* list = top.optional(key);
    if (!list) return;
    if (!list->is_array()) throw SpecError(std::string(key), "expected an array of state names");
    for (std::size_t i = 0; i < list->size(); ++i) {
      const auto path = fmt::format("{}[{}]", key, i);
      if (!(*list)[i].is_string()) throw SpecError(path, "expected a string");
      flags[state_index((*list)[i].get<std::string>(), path)] = true;
    }
  };
  mark("oracle_states", spec.is_oracle);
  mark("halt_states", spec.is_halt);
  for (std::size_t i = 0; i < spec.states.size(); ++i) {
    if (spec.is_oracle[i] && spec.is_halt[i])
      throw SpecError("oracle_states", "state '" + spec.states[i] + "' is both an oracle and a halt state");
  }

  auto oracle_ok = [&](char c) { return c == spec.blank || spec.alphabet.contains(c); };
  const auto& ts = top.required("transitions");
  if (!ts.is_array()) throw SpecError("transitions", "expected an array");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto path = fmt::format("transitions[{}]", i);
    JsonFields f(ts[i], path);
    const auto from = state_index(f.string("from"), f.path_of("from"));
    if (spec.is_halt[from]) throw SpecError(f.path_of("from"), "halt states have no transitions");
    auto pair = [&](std::string_view key) {
      const auto& j = f.required(key);
      if (!j.is_array() || j.size() != 2) throw SpecError(f.path_of(key), "expected [work, oracle]");
      return std::pair{j[0], j[1]};
    };
    const auto [rw, ro] = pair("read");
    const auto [ww, wo] = pair("write");
    const auto [mw, mo] = pair("move");
    TapeTransition t;
    t.to = state_index(f.string("to"), f.path_of("to"));
    const char read_w = one_char(rw, f.path_of("read") + "[0]");
    const char read_o = one_char(ro, f.path_of("read") + "[1]");
    t.write_work = one_char(ww, f.path_of("write") + "[0]");
    t.write_oracle = one_char(wo, f.path_of("write") + "[1]");
    t.move_work = parse_move(mw, f.path_of("move") + "[0]");
    t.move_oracle = parse_move(mo, f.path_of("move") + "[1]");
    if (!has_work(read_w) || !has_work(t.write_work))
      throw SpecError(path, "work symbol outside work_alphabet");
    if (!oracle_ok(read_o) || !oracle_ok(t.write_oracle))
      throw SpecError(path, "oracle symbol outside alphabet plus blank");
    f.finish();
    if (!spec.transitions.emplace(TapeSpec::Key{from, read_w, read_o}, t).second)
      throw SpecError(path, "duplicate transition for this (state, work, oracle) triple");
  }
  top.finish();
  spec.source = doc;
  spec.hash = fnv1a64(doc.dump());
  return spec;
}

TapeMachine::TapeMachine(TapeSpec spec) : spec_(std::move(spec)) {
  VarDecl d;
  d.name = "input";
  d.domain = Domain::words(spec_.alphabet, spec_.input_max_len);
  d.init = Word{};
  inputs_.push_back(std::move(d));
}

Word TapeMachine::oracle_word(const Configuration& config) const {
  const auto end = config.oracle.find(spec_.blank);
  return end == std::string::npos ? config.oracle : config.oracle.substr(0, end);
}

Configuration TapeMachine::initial(const Input& input) const {
  if (input.size() != 1 || !inputs_[0].domain.contains(input[0]))
    throw DomainError("input must be a single word over the alphabet of length <= " +
                      std::to_string(spec_.input_max_len));
  Configuration c;
  c.node = spec_.start;
  c.work = std::get<Word>(input[0]);
  return c;
}

StepEffect TapeMachine::step(const Configuration& config) const {
  if (spec_.is_halt[config.node]) {
    Word out = oracle_word(config);
    if (!in_answer_space(out))
      throw MachineError(fmt::format("halted with oracle tape '{}' outside the answer space", out));
    return Halt{std::move(out), config};
  }
  if (spec_.is_oracle[config.node] && !config.answered) {
    Query q;
    q.prompt = oracle_word(config);
    q.at = config;
    q.tag = spec_.states[config.node];
    return q;
  }
  const char w = read_at(config.work, config.work_head, spec_.blank);
  const char o = read_at(config.oracle, config.oracle_head, spec_.blank);
  auto it = spec_.transitions.find({config.node, w, o});
  if (it == spec_.transitions.end())
    throw MachineError(fmt::format("no transition for (state '{}', work '{}', oracle '{}')",
                                   spec_.states[config.node], w, o));
  const auto& t = it->second;
  Configuration next = config;
  write_at(next.work, next.work_head, t.write_work, spec_.blank);
  write_at(next.oracle, next.oracle_head, t.write_oracle, spec_.blank);
  apply_move(next.work_head, t.move_work);
  apply_move(next.oracle_head, t.move_oracle);
  next.node = t.to;
  next.answered = false;
  ++next.steps;
  return Continue{std::move(next)};
}

StepEffect TapeMachine::resume(const Configuration& at_query, const Answer& answer) const {
  if (answer.is_stop()) return Abort{};
  if (!spec_.is_oracle[at_query.node]) throw MachineError("resume outside an oracle state");
  if (!in_answer_space(answer.word()))
    throw DomainError("answer '" + answer.word() + "' is outside the answer space");
  Configuration next = at_query;
  next.oracle = answer.word();
  next.oracle_head = 0;
  next.answered = true;
  ++next.queries;
  return Continue{std::move(next)};
}

AdaptedMachine adapt_tape_machine(TapeSpec spec, std::uint64_t max_steps, std::uint64_t max_configs) {
  auto machine = std::make_shared<TapeMachine>(std::move(spec));
  const auto& s = machine->spec();
  std::set<TapeSpec::Key> used;
  std::unordered_set<std::string> seen;
  const auto answers = all_words(s.alphabet, s.max_answer_len);
  bool capped = false;

  auto key_of = [&](const Configuration& c) {
    // Trailing blanks do not distinguish configurations.
    auto trim = [&](std::string t) {
      while (!t.empty() && t.back() == s.blank) t.pop_back();
      return t;
    };
    return fmt::format("{}|{}|{}|{}|{}|{}", c.node, trim(c.work), trim(c.oracle), c.work_head, c.oracle_head,
                       c.answered ? 1 : 0);
  };

  for (const auto& input : enumerate_inputs(machine->inputs())) {
    std::vector<Configuration> stack{machine->initial(input)};
    while (!stack.empty() && !capped) {
      Configuration c = std::move(stack.back());
      stack.pop_back();
      if (!seen.insert(key_of(c)).second) continue;
      if (seen.size() >= max_configs) capped = true;
      if (c.steps >= max_steps) continue;
      StepEffect eff;
      try {
        eff = machine->step(c);
      } catch (const MachineError& e) {
        throw SpecError("transitions", std::string("reachable configuration is stuck: ") + e.what());
      }
      if (auto* cont = std::get_if<Continue>(&eff)) {
        const char w = read_at(c.work, c.work_head, s.blank);
        const char o = read_at(c.oracle, c.oracle_head, s.blank);
        used.insert({c.node, w, o});
        stack.push_back(std::move(cont->next));
      } else if (auto* q = std::get_if<Query>(&eff)) {
        for (const auto& a : answers) {
          auto r = machine->resume(q->at, Answer::word(a));
          stack.push_back(std::move(std::get<Continue>(r).next));
        }
      }
    }
  }

  AdaptedMachine out;
  if (capped)
    out.warnings.push_back(
        fmt::format("totality check stopped after {} configurations; unexplored triples unchecked", max_configs));
  for (const auto& [key, t] : s.transitions) {
    if (!used.count(key)) {
      out.warnings.push_back(fmt::format("transition (state '{}', work '{}', oracle '{}') is unreachable",
                                         s.states[std::get<0>(key)], std::get<1>(key), std::get<2>(key)));
    }
  }
  out.machine = std::move(machine);
  return out;
}

}  // namespace loopscope
