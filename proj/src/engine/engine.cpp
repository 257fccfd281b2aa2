#include "loopscope/engine/engine.hpp"

#include <fmt/format.h>

#include <sstream>
#include <stdexcept>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

using ojson = nlohmann::ordered_json;

void Limits::validate() const {
  if (max_steps == 0 || max_tree_nodes == 0 || max_queries == 0) throw DomainError("all limits must be positive");
}

Limits Limits::parse(std::string_view text) {
  Limits l;
  std::uint64_t* fields[] = {&l.max_steps, &l.max_tree_nodes, &l.max_queries};
  std::size_t i = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    if (i >= 3) throw DomainError("limits take at most three fields: steps,tree-nodes,queries");
    const auto comma = text.find(',', pos);
    const auto part = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (!part.empty()) {
      std::uint64_t v = 0;
      for (char c : part) {
        if (c < '0' || c > '9') throw DomainError("limit '" + std::string(part) + "' is not a positive integer");
        v = v * 10 + static_cast<std::uint64_t>(c - '0');
      }
      *fields[i] = v;
    }
    ++i;
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  l.validate();
  return l;
}

nlohmann::json Limits::to_json() const {
  return {{"max_steps", max_steps}, {"max_tree_nodes", max_tree_nodes}, {"max_queries", max_queries}};
}

Limits Limits::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("limits must be an object");
  Limits l;
  try {
    l.max_steps = j.value("max_steps", l.max_steps);
    l.max_tree_nodes = j.value("max_tree_nodes", l.max_tree_nodes);
    l.max_queries = j.value("max_queries", l.max_queries);
  } catch (const nlohmann::json::exception&) {
    throw DomainError("limits must be positive integers");
  }
  l.validate();
  return l;
}

const char* outcome_kind_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Halt:
      return "halt";
    case OutcomeKind::Abort:
      return "abort";
    case OutcomeKind::StepLimit:
      return "step-limit";
  }
  return "?";
}

std::string Outcome::str() const {
  return kind == OutcomeKind::Halt ? "halt:" + output : std::string(outcome_kind_name(kind));
}

Runner::Runner(const Machine& machine, const Input& input, const Limits& limits, RunHooks hooks,
               std::optional<std::uint64_t> seed)
    : machine_(machine), limits_(limits), hooks_(std::move(hooks)) {
  limits_.validate();
  t_.spec_hash = machine.spec_hash();
  t_.machine = machine.name();
  c_ = machine.initial(input);
  t_.input = input_to_json(input, machine.inputs());
  t_.seed = seed;
  t_.limits = limits_;
  t_.start = hooks_.start;
  now_ = hooks_.start;
}

bool Runner::stopped() const {
  return (hooks_.stop_flag && hooks_.stop_flag->load()) ||
         (hooks_.stop_at_step && c_.steps >= *hooks_.stop_at_step);
}

void Runner::finish(Outcome o, const char* effect) {
  t_.events.push_back({c_.steps, effect, machine_.location(c_), now_});
  t_.outcome = std::move(o);
  t_.steps = c_.steps;
  t_.end = now_;
  finished_ = true;
}

const Query* Runner::advance() {
  if (finished_) return nullptr;
  if (pending_) return &*pending_;
  while (true) {
    if (stopped()) {
      t_.external_stop_step = c_.steps;
      finish(Outcome::abort("external-stop"), "abort");
      return nullptr;
    }
    if (hooks_.before_step) hooks_.before_step(c_, now_);
    const auto d = machine_.duration(c_);
    const auto loc = machine_.location(c_);
    StepEffect eff = machine_.step(c_);
    if (std::holds_alternative<Continue>(eff) && c_.steps >= limits_.max_steps) {
      finish(Outcome::step_limit("max_steps"), "step-limit");
      return nullptr;
    }
    if (auto* q = std::get_if<Query>(&eff); q && t_.queries.size() >= limits_.max_queries) {
      finish(Outcome::step_limit("max_queries"), "step-limit");
      return nullptr;
    }
    if (d.until_next_event && hooks_.next_event) {
      if (auto n = hooks_.next_event(now_)) now_ = *n;
    }
    now_ += d.fixed;

    if (auto* cont = std::get_if<Continue>(&eff)) {
      c_ = std::move(cont->next);
      t_.events.push_back({c_.steps, "continue", loc, now_});
    } else if (auto* q = std::get_if<Query>(&eff)) {
      t_.events.push_back({c_.steps, "query", loc, now_});
      pending_ = std::move(*q);
      return &*pending_;
    } else if (auto* h = std::get_if<Halt>(&eff)) {
      if (stopped()) {
        t_.external_stop_step = c_.steps;
        finish(Outcome::abort("external-stop"), "abort");
        return nullptr;
      }
      finish(Outcome::halt(h->output), "halt");
      return nullptr;
    } else {
      finish(Outcome::abort("machine"), "abort");
      return nullptr;
    }
  }
}

QueryContext Runner::context() const {
  if (!pending_) throw std::logic_error("no pending query");
  return QueryContext{t_.queries.size(), now_, pending_->suggested, pending_->hazard, pending_->tag};
}

void Runner::answer(OracleResponse resp) {
  if (!pending_) throw std::logic_error("no pending query");
  auto q = std::move(*pending_);
  pending_.reset();
  TraceQuery rec;
  rec.index = t_.queries.size();
  rec.prompt = q.prompt;
  rec.step = c_.steps;
  rec.issued_at = now_;
  rec.hazard = q.hazard;
  rec.tag = q.tag;
  rec.answer = resp.answer;
  rec.latency = resp.latency;
  rec.answered_at = now_ + resp.latency;
  rec.flags = std::move(resp.flags);
  rec.late = q.deadline && rec.answered_at > rec.issued_at + *q.deadline;
  now_ = rec.answered_at;
  t_.queries.push_back(std::move(rec));
  StepEffect r = machine_.resume(q.at, t_.queries.back().answer);
  if (std::holds_alternative<Abort>(r)) {
    c_ = q.at;
    finish(Outcome::abort("stop"), "abort");
    return;
  }
  c_ = std::move(std::get<Continue>(r).next);
}

Trace run(const Machine& machine, const Input& input, const OracleStrategy& oracle, const Limits& limits,
          const RunHooks& hooks, std::optional<std::uint64_t> seed) {
  Runner r(machine, input, limits, hooks, seed);
  while (const Query* q = r.advance()) r.answer(oracle(q->prompt, r.context()));
  return r.take();
}

OracleStrategy replay_oracle(const Trace& trace) {
  std::vector<OracleResponse> answers;
  for (const auto& q : trace.queries) answers.push_back({q.answer, q.latency, q.flags});
  return OracleStrategy{"replay", true, [answers = std::move(answers)](const Word&, const QueryContext& ctx) {
                          if (ctx.query_index < answers.size()) return answers[ctx.query_index];
                          return OracleResponse{Answer::stop(), SimDuration{0}, {"replay-exhausted"}};
                        }};
}

Input input_of(const Trace& trace, const Machine& machine) { return input_from_json(trace.input, machine.inputs()); }

Trace replay(const Trace& trace, const Machine& machine, const RunHooks& hooks) {
  if (trace.spec_hash != machine.spec_hash())
    throw Error(fmt::format("spec-hash mismatch: trace {} vs machine {}", hash_hex(trace.spec_hash),
                            hash_hex(machine.spec_hash())));
  RunHooks h = hooks;
  h.start = trace.start;
  h.stop_flag = nullptr;
  h.stop_at_step = trace.external_stop_step;
  return run(machine, input_of(trace, machine), replay_oracle(trace), trace.limits, h, trace.seed);
}

EffectiveTable effective_function(const Machine& machine, const OracleStrategy& oracle, const Limits& limits) {
  if (!oracle.deterministic) throw std::invalid_argument("effective_function needs a deterministic oracle");
  EffectiveTable table;
  table.all_halt = true;
  for (auto& input : enumerate_inputs(machine.inputs())) {
    auto t = run(machine, input, oracle, limits);
    if (t.outcome.kind == OutcomeKind::StepLimit) table.partial = true;
    if (!t.outcome.is_halt()) table.all_halt = false;
    table.rows.push_back({std::move(input), std::move(t.outcome)});
  }
  return table;
}

std::string trace_to_jsonl(const Trace& t) {
  std::ostringstream out;
  ojson header;
  header["type"] = "header";
  header["version"] = 1;
  header["spec_hash"] = hash_hex(t.spec_hash);
  header["machine"] = t.machine;
  header["input"] = t.input;
  header["seed"] = t.seed ? ojson(*t.seed) : ojson(nullptr);
  header["limits"] = t.limits.to_json();
  header["start_ns"] = t.start.count();
  out << header.dump() << '\n';
  for (const auto& e : t.events) {
    ojson j;
    j["type"] = "event";
    j["step"] = e.step;
    j["effect"] = e.effect;
    j["at"] = e.location;
    j["t_ns"] = e.time.count();
    out << j.dump() << '\n';
  }
  for (const auto& q : t.queries) {
    ojson j;
    j["type"] = "query";
    j["index"] = q.index;
    j["prompt"] = q.prompt;
    j["answer"] = q.answer.str();
    j["step"] = q.step;
    j["issued_ns"] = q.issued_at.count();
    j["answered_ns"] = q.answered_at.count();
    j["latency_ns"] = q.latency.count();
    j["hazard"] = q.hazard;
    j["late"] = q.late;
    j["tag"] = q.tag;
    j["flags"] = q.flags;
    out << j.dump() << '\n';
  }
  ojson o;
  o["type"] = "outcome";
  o["kind"] = outcome_kind_name(t.outcome.kind);
  if (t.outcome.is_halt()) o["output"] = t.outcome.output;
  o["reason"] = t.outcome.reason;
  o["steps"] = t.steps;
  o["queries"] = t.queries.size();
  o["end_ns"] = t.end.count();
  o["external_stop_step"] = t.external_stop_step ? ojson(*t.external_stop_step) : ojson(nullptr);
  out << o.dump() << '\n';
  return out.str();
}

Trace trace_from_jsonl(std::string_view text) {
  Trace t;
  bool have_header = false;
  bool have_outcome = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (!have_header && type != "header") throw Error("first line must be the header");
      if (have_outcome) throw Error("lines after the outcome");
      if (type == "header") {
        if (have_header) throw Error("duplicate header");
        have_header = true;
        if (j.at("version").get<int>() != 1) throw Error("unsupported trace version");
        t.spec_hash = std::stoull(j.at("spec_hash").get<std::string>(), nullptr, 16);
        t.machine = j.at("machine").get<std::string>();
        t.input = j.at("input");
        if (!j.at("seed").is_null()) t.seed = j.at("seed").get<std::uint64_t>();
        t.limits = Limits::from_json(j.at("limits"));
        t.start = SimDuration{j.at("start_ns").get<std::int64_t>()};
      } else if (type == "event") {
        t.events.push_back({j.at("step").get<std::uint64_t>(), j.at("effect").get<std::string>(),
                            j.at("at").get<std::string>(), SimDuration{j.at("t_ns").get<std::int64_t>()}});
      } else if (type == "query") {
        TraceQuery q;
        q.index = j.at("index").get<std::uint64_t>();
        if (q.index != t.queries.size()) throw Error("query indices must be gapless");
        q.prompt = j.at("prompt").get<std::string>();
        q.answer = Answer::parse(j.at("answer").get<std::string>());
        q.step = j.at("step").get<std::uint64_t>();
        q.issued_at = SimDuration{j.at("issued_ns").get<std::int64_t>()};
        q.answered_at = SimDuration{j.at("answered_ns").get<std::int64_t>()};
        q.latency = SimDuration{j.at("latency_ns").get<std::int64_t>()};
        q.hazard = j.at("hazard").get<bool>();
        q.late = j.at("late").get<bool>();
        q.tag = j.at("tag").get<std::string>();
        q.flags = j.at("flags").get<std::vector<std::string>>();
        t.queries.push_back(std::move(q));
      } else if (type == "outcome") {
        have_outcome = true;
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "halt") {
          t.outcome = Outcome::halt(j.at("output").get<std::string>());
        } else if (kind == "abort") {
          t.outcome = Outcome::abort();
        } else if (kind == "step-limit") {
          t.outcome = Outcome::step_limit("");
        } else {
          throw Error("unknown outcome kind '" + kind + "'");
        }
        t.outcome.reason = j.at("reason").get<std::string>();
        t.steps = j.at("steps").get<std::uint64_t>();
        t.end = SimDuration{j.at("end_ns").get<std::int64_t>()};
        if (!j.at("external_stop_step").is_null())
          t.external_stop_step = j.at("external_stop_step").get<std::uint64_t>();
      } else {
        throw Error("unknown line type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(fmt::format("trace line {}: {}", line_no, e.what()));
    } catch (const Error& e) {
      throw Error(fmt::format("trace line {}: {}", line_no, e.what()));
    }
  }
  if (!have_header || !have_outcome) throw Error("trace needs a header line and an outcome line");
  return t;
}

std::vector<std::uint64_t> trace_segments(const Trace& trace) {
  std::vector<std::uint64_t> out;
  std::uint64_t prev = 0;
  for (const auto& q : trace.queries) {
    out.push_back(q.step - prev);
    prev = q.step;
  }
  out.push_back(trace.steps - prev);
  return out;
}

}  // namespace loopscope
