#include <doctest.h>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/expr.hpp"
#include "loopscope/ir/process.hpp"
#include "loopscope/ir/spec_io.hpp"
#include "loopscope/ir/tape.hpp"
#include "support.hpp"

using namespace loopscope;
using nlohmann::json;

namespace {

json minimal() {
  return {{"name", "m"}, {"max_answer_len", 1}, {"entry", "n0"}, {"nodes", {{"n0", {{"kind", "halt"}, {"output", "'0'"}}}}}};
}

Value eval_in(const std::string& src, std::vector<VarDecl> decls, std::vector<Value> store, std::size_t max_len) {
  const auto alphabet = Alphabet::binary();
  Scope scope{decls, &alphabet, max_len};
  const auto e = compile_expr(src, scope, std::nullopt, "expr");
  return eval(e, EvalContext{alphabet, max_len, store});
}

std::string spec_error(const json& doc) {
  try {
    parse_spec(doc);
  } catch (const SpecError& e) {
    return e.what();
  }
  return {};
}

json tape_two_state() {
  return {{"mode", "tape"},
          {"name", "ask_once"},
          {"max_answer_len", 1},
          {"blank", "_"},
          {"work_alphabet", {"0", "1"}},
          {"states", {"ask", "done"}},
          {"start", "ask"},
          {"oracle_states", {"ask"}},
          {"halt_states", {"done"}},
          {"transitions",
           {{{"from", "ask"}, {"read", {"_", "_"}}, {"to", "done"}, {"write", {"_", "_"}}, {"move", {"S", "S"}}},
            {{"from", "ask"}, {"read", {"_", "0"}}, {"to", "done"}, {"write", {"_", "0"}}, {"move", {"S", "S"}}},
            {{"from", "ask"}, {"read", {"_", "1"}}, {"to", "done"}, {"write", {"_", "1"}}, {"move", {"S", "S"}}}}}};
}

}  // namespace

TEST_CASE("alphabet rejects the stop symbol, duplicates and emptiness") {
  CHECK_THROWS_AS(Alphabet({'0', '!'}), DomainError);
  CHECK_THROWS_AS(Alphabet({'0', '0'}), DomainError);
  CHECK_THROWS_AS(Alphabet(std::vector<char>{}), DomainError);
  CHECK(Alphabet::binary().size() == 2);
  auto doc = minimal();
  doc["alphabet"] = {"0", "!"};
  CHECK(spec_error(doc).find("reserved") != std::string::npos);
}

TEST_CASE("one-node spec parses to a single node") {
  const auto spec = std::get<ProcessSpec>(parse_spec(minimal()));
  CHECK(spec.nodes.size() == 1);
  CHECK(spec.nodes[0].kind == ProcessNode::Kind::Halt);
}

TEST_CASE("query binding an undeclared variable is rejected") {
  json doc = {{"name", "m"},
              {"max_answer_len", 1},
              {"entry", "q"},
              {"nodes",
               {{"q", {{"kind", "query"}, {"prompt", "'0'"}, {"bind", "ghost"}, {"next", "h"}}},
                {"h", {{"kind", "halt"}, {"output", "'0'"}}}}}};
  const auto msg = spec_error(doc);
  CHECK(msg.find("unbound variable") != std::string::npos);
  CHECK(msg.find("nodes.q.bind") != std::string::npos);
}

TEST_CASE("spec validation errors") {
  SUBCASE("unknown node reference") {
    auto doc = minimal();
    doc["entry"] = "nowhere";
    CHECK(spec_error(doc).find("unknown node reference") != std::string::npos);
  }
  SUBCASE("unknown keys") {
    auto doc = minimal();
    doc["colour"] = "blue";
    CHECK_FALSE(spec_error(doc).empty());
  }
  SUBCASE("type mismatch") {
    auto doc = minimal();
    doc["nodes"]["n0"]["output"] = "1 + 1";
    CHECK(spec_error(doc).find("nodes.n0.output") != std::string::npos);
  }
  SUBCASE("syntax error carries a column") {
    auto doc = minimal();
    doc["nodes"]["n0"]["output"] = "concat('0',";
    const auto msg = spec_error(doc);
    CHECK(msg.find("nodes.n0.output:") != std::string::npos);
    CHECK(msg.find("syntax error") != std::string::npos);
  }
  SUBCASE("JSON syntax error is position-annotated") {
    try {
      parse_spec_text("{\"name\": ", "broken.json");
      FAIL("expected a SpecError");
    } catch (const SpecError& e) {
      CHECK(e.where().rfind("broken.json", 0) == 0);
      CHECK(std::string(e.what()).find("syntax error") != std::string::npos);
    }
  }
}

TEST_CASE("shipped route-endpoint fixture has exactly one query node") {
  const auto doc = testing::read_json(testing::scenario_dir() / "route-endpoint.json");
  const auto spec = std::get<ProcessSpec>(parse_spec(doc["machine"]));
  std::size_t queries = 0;
  for (const auto& n : spec.nodes) queries += n.kind == ProcessNode::Kind::Query;
  CHECK(queries == 1);
}

TEST_CASE("expression evaluation") {
  const VarDecl x{"x", Domain::integer(0, 7), std::int64_t{0}};
  CHECK(std::get<std::int64_t>(eval_in("x + 1", {x}, {std::int64_t{7}}, 3)) == 0);
  CHECK(std::get<std::int64_t>(eval_in("x - 1", {x}, {std::int64_t{0}}, 3)) == 7);
  CHECK(std::get<Word>(eval_in("concat(\"0\", \"1\")", {}, {}, 2)) == "01");
  CHECK(std::get<Word>(eval_in("concat('01', '1')", {}, {}, 2)) == "01");
  CHECK(std::get<bool>(eval_in("if(x > 3, true, false) && !(x == 4)", {x}, {std::int64_t{5}}, 2)));
  CHECK(std::get<std::int64_t>(eval_in("len('101')", {}, {}, 3)) == 3);
}

TEST_CASE("word(n) matches an independent base-2 encoder") {
  CHECK(std::get<Word>(eval_in("word(5)", {}, {}, 3)) == "101");
  const auto alphabet = Alphabet::binary();
  for (std::uint64_t v = 0; v < 64; ++v) {
    CHECK(encode_int(static_cast<std::int64_t>(v), alphabet, 6) == testing::base2(v));
    CHECK(decode_word(testing::base2(v), alphabet) == static_cast<std::int64_t>(v));
  }
  // Out of range keeps the low-order digits.
  CHECK(encode_int(9, alphabet, 3) == "1");
}

TEST_CASE("process step semantics") {
  json doc = {{"name", "m"},
              {"max_answer_len", 2},
              {"vars", {{{"name", "y"}, {"type", "int"}, {"min", 0}, {"max", 3}}, {{"name", "a"}, {"type", "word"}}}},
              {"entry", "inc"},
              {"nodes",
               {{"inc", {{"kind", "compute"}, {"assign", {{"y", "y + 1"}}}, {"next", "ask"}}},
                {"ask", {{"kind", "query"}, {"prompt", "'01'"}, {"bind", "a"}, {"next", "out"}}},
                {"out", {{"kind", "halt"}, {"output", "a"}}}}}};
  const auto m = testing::machine_from_json(doc);
  const auto& pm = dynamic_cast<const ProcessMachine&>(*m);
  auto c = m->initial({});
  auto e1 = m->step(c);
  REQUIRE(std::holds_alternative<Continue>(e1));
  const auto& c1 = std::get<Continue>(e1).next;
  CHECK(std::get<std::int64_t>(c1.store[*pm.spec().slot_of("y")]) == 1);
  CHECK(c1.steps == 1);

  auto e2 = m->step(c1);
  REQUIRE(std::holds_alternative<Query>(e2));
  const auto& q = std::get<Query>(e2);
  CHECK(q.prompt == "01");

  SUBCASE("Stop aborts with no output") {
    CHECK(std::holds_alternative<Abort>(m->resume(q.at, Answer::stop())));
  }
  SUBCASE("every word of the answer space is accepted") {
    for (const auto& w : all_words(m->alphabet(), m->max_answer_len())) {
      auto r = m->resume(q.at, Answer::word(w));
      REQUIRE(std::holds_alternative<Continue>(r));
      auto h = m->step(std::get<Continue>(r).next);
      REQUIRE(std::holds_alternative<Halt>(h));
      CHECK(std::get<Halt>(h).output == w);
    }
  }
  SUBCASE("words outside the answer space are rejected") {
    CHECK_THROWS_AS(m->resume(q.at, Answer::word("011")), DomainError);
    CHECK_THROWS_AS(m->resume(q.at, Answer::word("2")), DomainError);
  }
}

TEST_CASE("spec hash tracks the document") {
  auto a = minimal();
  auto b = minimal();
  b["nodes"]["n0"]["output"] = "'1'";
  CHECK(std::get<ProcessSpec>(parse_spec(a)).hash == std::get<ProcessSpec>(parse_spec(minimal())).hash);
  CHECK(std::get<ProcessSpec>(parse_spec(a)).hash != std::get<ProcessSpec>(parse_spec(b)).hash);
}

TEST_CASE("tape machine: one oracle call then halt") {
  const auto adapted = load_machine(tape_two_state());
  const auto& m = *adapted.machine;
  auto c = m.initial({Value{Word{}}});
  auto e = m.step(c);
  REQUIRE(std::holds_alternative<Query>(e));
  CHECK(std::get<Query>(e).prompt.empty());
  auto r = m.resume(std::get<Query>(e).at, Answer::word("1"));
  REQUIRE(std::holds_alternative<Continue>(r));
  auto h = m.step(std::get<Continue>(r).next);
  REQUIRE(std::holds_alternative<Continue>(h));
  auto out = m.step(std::get<Continue>(h).next);
  REQUIRE(std::holds_alternative<Halt>(out));
  CHECK(std::get<Halt>(out).output == "1");
  CHECK(std::holds_alternative<Abort>(m.resume(std::get<Query>(e).at, Answer::stop())));
}

TEST_CASE("tape machine: the answer replaces the oracle tape in one step") {
  json doc = {{"mode", "tape"},
              {"name", "rewrite"},
              {"max_answer_len", 2},
              {"blank", "_"},
              {"work_alphabet", {"0", "1"}},
              {"states", {"w1", "w2", "ask", "done"}},
              {"start", "w1"},
              {"oracle_states", {"ask"}},
              {"halt_states", {"done"}},
              {"transitions",
               {{{"from", "w1"}, {"read", {"_", "_"}}, {"to", "w2"}, {"write", {"_", "1"}}, {"move", {"S", "R"}}},
                {{"from", "w2"}, {"read", {"_", "_"}}, {"to", "ask"}, {"write", {"_", "0"}}, {"move", {"S", "L"}}},
                {{"from", "ask"}, {"read", {"_", "_"}}, {"to", "done"}, {"write", {"_", "_"}}, {"move", {"S", "S"}}},
                {{"from", "ask"}, {"read", {"_", "0"}}, {"to", "done"}, {"write", {"_", "0"}}, {"move", {"S", "S"}}},
                {{"from", "ask"}, {"read", {"_", "1"}}, {"to", "done"}, {"write", {"_", "1"}}, {"move", {"S", "S"}}}}}};
  const auto adapted = load_machine(doc);
  const auto& tm = dynamic_cast<const TapeMachine&>(*adapted.machine);
  auto c = tm.initial({Value{Word{}}});
  c = std::get<Continue>(tm.step(c)).next;
  c = std::get<Continue>(tm.step(c)).next;
  auto q = tm.step(c);
  REQUIRE(std::holds_alternative<Query>(q));
  CHECK(std::get<Query>(q).prompt == "10");
  const auto after = std::get<Continue>(tm.resume(std::get<Query>(q).at, Answer::word("0"))).next;
  CHECK(tm.oracle_word(after) == "0");
  CHECK(after.oracle_head == 0);
  CHECK(after.steps == c.steps);  // the replacement itself is not a machine step
  const auto halt = tm.step(std::get<Continue>(tm.step(after)).next);
  REQUIRE(std::holds_alternative<Halt>(halt));
  CHECK(std::get<Halt>(halt).output == tm.oracle_word(std::get<Halt>(halt).at));
}

TEST_CASE("tape machine without oracle states never queries") {
  json doc = {{"mode", "tape"},
              {"name", "plain"},
              {"max_answer_len", 1},
              {"blank", "_"},
              {"work_alphabet", {"0", "1"}},
              {"states", {"s", "done"}},
              {"start", "s"},
              {"halt_states", {"done"}},
              {"transitions",
               {{{"from", "s"}, {"read", {"_", "_"}}, {"to", "done"}, {"write", {"_", "1"}}, {"move", {"S", "S"}}}}}};
  const auto adapted = load_machine(doc);
  auto c = adapted.machine->initial({Value{Word{}}});
  for (int i = 0; i < 4; ++i) {
    auto e = adapted.machine->step(c);
    CHECK_FALSE(std::holds_alternative<Query>(e));
    if (auto* k = std::get_if<Continue>(&e)) {
      c = k->next;
    } else {
      REQUIRE(std::holds_alternative<Halt>(e));
      CHECK(std::get<Halt>(e).output == "1");
      break;
    }
  }
}

TEST_CASE("tape machine: stuck reachable configuration is a validation error") {
  auto doc = tape_two_state();
  doc["transitions"].erase(2);  // no move for oracle symbol 1
  CHECK_THROWS_AS(load_machine(doc), SpecError);
}

TEST_CASE("determinism: same answers, same effect sequence") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = testing::machine_from_json(testing::random_process_spec(seed));
    for (const auto& input : enumerate_inputs(m->inputs())) {
      const auto a = testing::brute_outcome(*m, input, {Answer::word("1"), Answer::word("0")}, Answer::word("1"));
      const auto b = testing::brute_outcome(*m, input, {Answer::word("1"), Answer::word("0")}, Answer::word("1"));
      CHECK(a == b);
    }
  }
}
