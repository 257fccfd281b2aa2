#include <doctest.h>

#include <map>

#include "loopscope/analysis/classify.hpp"
#include "loopscope/analysis/flatten.hpp"
#include "loopscope/analysis/metrics.hpp"
#include "loopscope/analysis/tree.hpp"
#include "support.hpp"

using namespace loopscope;
using nlohmann::json;

namespace {

json one_query(const std::string& output) {
  return {{"name", "one"},
          {"max_answer_len", 1},
          {"vars", {{{"name", "a"}, {"type", "word"}}}},
          {"entry", "q"},
          {"nodes",
           {{"q", {{"kind", "query"}, {"prompt", "'1'"}, {"bind", "a"}, {"next", "h"}}},
            {"h", {{"kind", "halt"}, {"output", output}}}}}};
}

std::vector<std::string> path_strings(const ComputationTree& t, std::size_t node) {
  std::vector<std::string> out;
  for (const auto& a : t.path_to(node)) out.push_back(a.str());
  return out;
}

SetupClass class_of(const std::string& id, const std::filesystem::path& dir = testing::scenario_dir()) {
  return classify_setup(*testing::scenario_machine(id, dir)).cls;
}

}  // namespace

TEST_CASE("tree of a single query has one branch per answer") {
  const auto m = testing::machine_from_json(one_query("a"));
  const auto t = build_tree(*m, {});
  REQUIRE(t.root().kind == TreeNode::Kind::Query);
  REQUIRE(t.root().children.size() == 4);  // "", "0", "1", Stop
  CHECK(t.nodes[t.root().children[3]].kind == TreeNode::Kind::Abort);
  CHECK(t.root().outputs == std::set<Word>{"", "0", "1"});
  CHECK(t.count(TreeNode::Kind::Halt) == 3);
  CHECK(t.count(TreeNode::Kind::Abort) == 1);
  CHECK(t.real_query(0).is_real);
}

TEST_CASE("tree of a machine without queries is a single leaf") {
  const auto m = testing::scenario_machine("no-query", testing::fixture_dir());
  for (const auto& input : enumerate_inputs(m->inputs())) {
    const auto t = build_tree(*m, input);
    CHECK(t.nodes.size() == 1);
    CHECK(t.root().kind == TreeNode::Kind::Halt);
    CHECK(t.real_queries().empty());
  }
}

TEST_CASE("parity tree: two levels, only the second is real") {
  const auto m = testing::scenario_machine("parity");
  const auto t = build_tree(*m, {});
  CHECK(t.count(TreeNode::Kind::Query) == 1 + 7);
  CHECK(t.count(TreeNode::Kind::Halt) == 49);
  CHECK(t.count(TreeNode::Kind::Abort) == 8);
  CHECK(real_flags_by_depth(t) == std::vector<bool>{false, true});
  CHECK(t.root().outputs == std::set<Word>{"0", "1"});
  const auto rq = t.real_query(0);
  CHECK_FALSE(rq.is_real);
  CHECK(rq.conclusive);

  const auto omitted = testing::scenario_machine("parity-omitted");
  const auto to = build_tree(*omitted, {});
  CHECK(real_flags_by_depth(to) == std::vector<bool>{false});
  CHECK(to.root().outputs == std::set<Word>{"01"});
}

TEST_CASE("fork without a difference in outputs is not real") {
  // Every answer leads elsewhere, all roads end in the same output.
  json all_roads = {{"name", "all_roads"},
                    {"max_answer_len", 1},
                    {"vars", {{{"name", "a"}, {"type", "word"}}}},
                    {"entry", "q"},
                    {"nodes",
                     {{"q", {{"kind", "query"}, {"prompt", "''"}, {"bind", "a"}, {"next", "b"}}},
                      {"b", {{"kind", "branch"}, {"if", "a == '1'"}, {"then", "long"}, {"else", "h"}}},
                      {"long", {{"kind", "compute"}, {"assign", json::object()}, {"next", "h"}}},
                      {"h", {{"kind", "halt"}, {"output", "'1'"}}}}}};
  const auto m = testing::machine_from_json(all_roads);
  const auto t = build_tree(*m, {});
  const auto f = t.real_query(0);
  CHECK(f.fork_exists);
  CHECK_FALSE(f.outputs_differ);
  CHECK_FALSE(f.is_real);

  const auto ignore = testing::machine_from_json(one_query("'0'"));
  const auto ti = build_tree(*ignore, {});
  CHECK_FALSE(ti.real_query(0).fork_exists);
  CHECK_FALSE(ti.real_query(0).is_real);
}

TEST_CASE("abort-only branches do not make a query real") {
  const auto m = testing::machine_from_json(one_query("'0'"));
  auto t = build_tree(*m, {});
  REQUIRE_FALSE(t.real_query(0).is_real);
  t.graft_abort_branch(0, Answer::word("extra"), 2);
  CHECK(t.root().children.size() == 5);
  CHECK_FALSE(t.real_query(0).is_real);
  CHECK(t.root().outputs == std::set<Word>{"0"});
}

TEST_CASE("route scenarios classify as the three named setups") {
  CHECK(class_of("route-trivial") == SetupClass::TrivialMonitoring);
  CHECK(class_of("route-endpoint") == SetupClass::EndpointAction);
  CHECK(class_of("route-involved") == SetupClass::InvolvedInteraction);
  const auto v = classify_setup(*testing::scenario_machine("route-involved"));
  CHECK(v.conclusive);
  CHECK(v.abort_reachable);
  CHECK_FALSE(v.evidence.empty());
}

TEST_CASE("a machine that never asks is HOOTL") {
  CHECK(class_of("no-query", testing::fixture_dir()) == SetupClass::HOOTL);
  CHECK(classify_setup(*testing::scenario_machine("no-query", testing::fixture_dir())).conclusive);
}

TEST_CASE("step limit makes a verdict inconclusive") {
  const auto v = classify_setup(*testing::scenario_machine("loop-forever", testing::fixture_dir()));
  CHECK_FALSE(v.conclusive);
  const auto tr = classify_setup(*testing::scenario_machine("truncating", testing::fixture_dir()));
  CHECK_FALSE(tr.conclusive);
}

TEST_CASE("threshold clerk turns the endpoint setup into trivial monitoring") {
  const auto m = testing::scenario_machine("schufa-threshold");
  const auto ev = classify_effective(*m, {threshold_human(4, "1", "0", m->alphabet())});
  CHECK(ev.standalone.cls == SetupClass::EndpointAction);
  CHECK(ev.effective.cls == SetupClass::TrivialMonitoring);
  CHECK(ev.total);
  CHECK(ev.single_valued);
}

TEST_CASE("a varying oracle family keeps the standalone class") {
  const auto m = testing::scenario_machine("route-endpoint");
  std::vector<OracleStrategy> family;
  for (const auto& w : all_words(m->alphabet(), m->max_answer_len())) family.push_back(constant_answer(Answer::word(w)));
  const auto ev = classify_effective(*m, family);
  CHECK(ev.total);
  CHECK_FALSE(ev.single_valued);
  CHECK(ev.effective.cls == SetupClass::EndpointAction);
  CHECK(ev.effective.conclusive);
}

TEST_CASE("an always-Stop oracle gives a degenerate, inconclusive composition") {
  const auto m = testing::scenario_machine("schufa-threshold");
  const auto ev = classify_effective(*m, {scripted_answer({Answer::stop()})});
  CHECK_FALSE(ev.total);
  CHECK_FALSE(ev.effective.conclusive);
}

TEST_CASE("predetermined series flattens with a certificate") {
  const auto m = testing::scenario_machine("btt-series");
  const auto r = flatten_bounded_queries(m);
  REQUIRE(std::holds_alternative<Flattened>(r));
  const auto& f = std::get<Flattened>(r);
  CHECK(f.questions == 3);
  CHECK(f.certificate.equal);
  CHECK(f.certificate.cases == 16);
  // Independent re-check through the public comparison.
  CHECK(functions_equal(*m, *f.machine, *f.mapping).equal);
  for (const auto& input : enumerate_inputs(f.machine->inputs()))
    CHECK(build_tree(*f.machine, input).count(TreeNode::Kind::Query) == 1);
}

TEST_CASE("adaptive questions do not flatten") {
  const auto r = flatten_bounded_queries(testing::scenario_machine("route-involved"));
  REQUIRE(std::holds_alternative<NotFlattenable>(r));
  CHECK(std::get<NotFlattenable>(r).reason.find("depends on earlier answers") != std::string::npos);
}

TEST_CASE("zero-query machines flatten to themselves") {
  const auto m = testing::scenario_machine("no-query", testing::fixture_dir());
  const auto r = flatten_bounded_queries(m);
  REQUIRE(std::holds_alternative<Flattened>(r));
  CHECK(std::get<Flattened>(r).machine == m);
  CHECK(std::get<Flattened>(r).mapping == nullptr);
}

TEST_CASE("conglomerate prompts split back") {
  const auto a = Alphabet::binary();
  const std::vector<Word> qs{"10", "", "0"};
  CHECK(split_conglomerate(conglomerate_prompt(qs, a), a) == qs);
  CHECK(conglomerate_prompt({"1", "0"}, a) == "110100");
}

TEST_CASE("functions_equal finds the differing leaf") {
  const auto parity = testing::scenario_machine("parity");
  IdentityMapping id(parity->alphabet(), parity->max_answer_len(), 2);
  const auto self = functions_equal(*parity, *parity, id);
  CHECK(self.equal);
  CHECK(self.cases == 49);

  auto doc = testing::read_json(testing::scenario_dir() / "parity.json")["machine"];
  doc["nodes"]["done"]["output"] = "if(pm == 1 && pk == 1, '11', word(pm + pk))";
  const auto changed = testing::machine_from_json(doc);
  const auto r = functions_equal(*parity, *changed, id);
  CHECK_FALSE(r.equal);
  REQUIRE(r.witness);
  CHECK(r.witness->out_a != r.witness->out_b);
  CHECK(r.witness->out_b == "halt:11");
  std::vector<Answer> tuple;
  for (const auto& s : r.witness->tuple) tuple.push_back(Answer::parse(s));
  CHECK(testing::brute_outcome(*parity, {}, tuple, Answer::stop()) == r.witness->out_a);
  CHECK(testing::brute_outcome(*changed, {}, tuple, Answer::stop()) == r.witness->out_b);
}

TEST_CASE("segment metrics and strip") {
  const auto m = segment_metrics({0, 1, 1, 0}, 3);
  CHECK(m.max_segment == 1);
  CHECK(m.unmasking_ratio == doctest::Approx(0.6));
  CHECK(segment_strip(m.segments) == "[]?[#]?[#]?[]");
  CHECK(segment_strip({6001}) == "[6001]");
  CHECK(segment_metrics({}, 0).unmasking_ratio == 0.0);
}

TEST_CASE("decisive points match an independent counterfactual sweep") {
  const auto m = testing::scenario_machine("route-involved");
  const std::vector<Answer> script{Answer::word("0"), Answer::word("1"), Answer::word("1")};
  const auto oracle = scripted_answer(script);
  const auto input = Input{Value{std::int64_t{1}}, Value{std::int64_t{2}}};
  const auto t = run(*m, input, oracle);
  REQUIRE(t.outcome == Outcome::halt("01"));
  const auto rep = decisive_points(t, *m, &oracle);
  CHECK(rep.decisive == std::vector<std::uint64_t>{1, 2});

  std::vector<std::uint64_t> flips;
  for (std::size_t i = 0; i < t.queries.size(); ++i) {
    for (const auto& w : all_words(m->alphabet(), m->max_answer_len())) {
      if (Answer::word(w) == t.queries[i].answer) continue;
      std::vector<Answer> answers(script.begin(), script.end());
      answers[i] = Answer::word(w);
      if (testing::brute_outcome(*m, input, answers, script.back()) != t.outcome.str()) {
        flips.push_back(i);
        break;
      }
    }
  }
  std::vector<std::uint64_t> both = rep.decisive;
  both.insert(both.end(), rep.counterfactual_only.begin(), rep.counterfactual_only.end());
  std::sort(both.begin(), both.end());
  CHECK(both == flips);
  for (auto i : rep.decisive) CHECK(rep.real_on_path[i]);
  CHECK_THROWS_AS(decisive_points(t, *m, nullptr), std::invalid_argument);
}

TEST_CASE("decisive points are real on random machines") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const auto m = testing::machine_from_json(testing::random_process_spec(seed));
    const auto oracle = constant_answer(Answer::word("1"));
    for (const auto& input : enumerate_inputs(m->inputs())) {
      const auto t = run(*m, input, oracle);
      if (!t.outcome.is_halt()) continue;
      const auto rep = decisive_points(t, *m, &oracle);
      for (auto i : rep.decisive) CHECK(rep.real_on_path[i]);
    }
  }
}

TEST_CASE("tree agrees with a brute-force walk on random machines") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    CAPTURE(seed);
    const auto m = testing::machine_from_json(testing::random_process_spec(seed));
    for (const auto& input : enumerate_inputs(m->inputs())) {
      const auto t = build_tree(*m, input);
      const auto b = testing::brute_explore(*m, input);
      CHECK(t.root().outputs == b.outputs);
      CHECK(t.root().unknown == b.unknown);
      CHECK(t.count(TreeNode::Kind::Halt) == b.halts);
      CHECK(t.count(TreeNode::Kind::Abort) == b.aborts);

      std::map<std::vector<std::string>, const testing::BruteQuery*> by_path;
      for (const auto& q : b.queries) by_path[q.path] = &q;
      const auto flags = t.real_queries();
      CHECK(flags.size() == b.queries.size());
      for (const auto& f : flags) {
        const auto it = by_path.find(path_strings(t, f.node));
        REQUIRE(it != by_path.end());
        CHECK(t.nodes[f.node].prompt == it->second->prompt);
        if (!it->second->unknown) CHECK(f.outputs_differ == it->second->outputs_differ);
        if (f.outputs_differ) CHECK(f.fork_exists);
        CHECK(f.is_real == (f.fork_exists && f.outputs_differ));
      }
    }
  }
}
