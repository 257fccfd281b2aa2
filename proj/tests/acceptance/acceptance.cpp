// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <chrono>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "loopscope/analysis/classify.hpp"
#include "loopscope/analysis/flatten.hpp"
#include "loopscope/analysis/tree.hpp"
#include "loopscope/engine/engine.hpp"
#include "loopscope/failure/timed.hpp"
#include "loopscope/scenario/pack.hpp"
#include "support.hpp"

using namespace loopscope;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::string> path_strings(const ComputationTree& t, std::size_t node) {
  std::vector<std::string> out;
  for (const auto& a : t.path_to(node)) out.push_back(a.str());
  return out;
}

Result parity_pair() {
  const auto t0 = Clock::now();
  const auto full = real_flags_by_depth(build_tree(*testing::scenario_machine("parity"), {}));
  const auto omitted = real_flags_by_depth(build_tree(*testing::scenario_machine("parity-omitted"), {}));
  const double s = seconds_since(t0);
  const bool ok = full == std::vector<bool>{false, true} && omitted == std::vector<bool>{false} && s < 1.0;
  return {ok, fmt::format("parity [{}], omitted [{}], {:.3f} s", fmt::join(full, ","), fmt::join(omitted, ","), s)};
}

Result route_triple() {
  const auto t0 = Clock::now();
  const std::vector<std::pair<const char*, SetupClass>> want{{"route-trivial", SetupClass::TrivialMonitoring},
                                                             {"route-endpoint", SetupClass::EndpointAction},
                                                             {"route-involved", SetupClass::InvolvedInteraction}};
  bool ok = true;
  std::vector<std::string> got;
  for (const auto& [id, cls] : want) {
    const auto v = classify_setup(*testing::scenario_machine(id));
    ok = ok && v.cls == cls && v.conclusive;
    got.push_back(fmt::format("{}{}", setup_class_name(v.cls), v.conclusive ? "" : "?"));
  }
  const double s = seconds_since(t0);
  return {ok && s < 5.0, fmt::format("{}, {:.3f} s", fmt::join(got, " / "), s)};
}

Result abort_exclusion() {
  std::mt19937_64 rng(11);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto m = testing::machine_from_json(testing::random_process_spec(seed));
    bool ok = true;
    for (const auto& input : enumerate_inputs(m->inputs())) {
      const auto base = build_tree(*m, input);
      const auto flags = base.real_queries();
      for (const auto& q : flags) {
        auto t = base;
        t.graft_abort_branch(q.node, Answer::word("#"), rng() % 3);
        ok = ok && t.root().outputs == base.root().outputs;
        for (std::size_t i = 0; i < base.nodes.size(); ++i) ok = ok && t.nodes[i].outputs == base.nodes[i].outputs;
        for (const auto& f : flags) ok = ok && t.real_query(f.node).is_real == f.is_real;
      }
    }
    good += ok;
  }
  return {good == 100, fmt::format("{}/100 specs unchanged", good)};
}

Result flattening() {
  const auto btt = testing::scenario_machine("btt-series");
  const auto r = flatten_bounded_queries(btt);
  bool ok = false;
  std::string detail;
  if (const auto* f = std::get_if<Flattened>(&r)) {
    const auto eq = functions_equal(*btt, *f->machine, *f->mapping);
    const auto inputs = enumerate_inputs(btt->inputs()).size();
    ok = eq.equal && eq.cases == 8 * inputs && f->questions == 3;
    detail = fmt::format("btt: {} questions, {} cases equal={}", f->questions, eq.cases, eq.equal);
  } else {
    detail = "btt: not flattenable";
  }
  const auto ri = flatten_bounded_queries(testing::scenario_machine("route-involved"));
  const auto* nf = std::get_if<NotFlattenable>(&ri);
  ok = ok && nf && !nf->input.is_null() && nf->prompt_a != nf->prompt_b;
  detail += nf ? fmt::format("; route-involved: {} ({} vs {})", nf->reason, nf->prompt_a, nf->prompt_b)
               : "; route-involved flattened";
  return {ok, detail};
}

Result schufa() {
  const auto m = testing::scenario_machine("schufa-threshold");
  const auto ev = classify_effective(*m, {threshold_human(4, "1", "0", m->alphabet())});
  const bool rows = ev.tables.size() == 1 && ev.tables[0].rows.size() == enumerate_inputs(m->inputs()).size();
  const bool ok = ev.standalone.cls == SetupClass::EndpointAction && ev.effective.cls == SetupClass::TrivialMonitoring &&
                  ev.total && ev.single_valued && rows;
  return {ok, fmt::format("standalone {}, effective {}, total={}, single-valued={}", setup_class_name(ev.standalone.cls),
                          setup_class_name(ev.effective.cls), ev.total, ev.single_valued)};
}

double averted_rate(const json& doc, std::uint64_t trials) {
  const auto sc = *make_scenario(doc, nullptr, "acceptance").timed;
  MonteCarloOptions opt;
  opt.attribution = false;
  return monte_carlo(sc, trials, 0, opt).summary["outcomes"]["averted"]["rate"].get<double>();
}

Result uber() {
  const auto base = testing::read_json(testing::scenario_dir() / "uber-timeline.json");
  bool ok = true;
  std::vector<std::string> late;
  for (double r : {0.2, 0.5, 1.2, 3.0}) {
    auto doc = base;
    doc["human"]["reaction"] = {{"type", "fixed"}, {"value", r}};
    const double rate = averted_rate(doc, 10000);
    ok = ok && rate == 0.0;
    late.push_back(fmt::format("r={} {}", r, rate));
  }
  auto early = base;
  json kept = json::array();
  for (const auto& f : base["faults"]) {
    const auto mode = f["mode"].get<std::string>();
    if (mode.rfind("FC1.", 0) && mode.rfind("FC2.", 0) && mode.rfind("FC4.", 0)) kept.push_back(f);
  }
  early["faults"] = kept;
  early["human"]["reaction"] = {{"type", "fixed"}, {"value", 1.2}};
  const double rate = averted_rate(early, 10000);
  ok = ok && rate == 1.0;
  return {ok, fmt::format("lead 0.2 s: {}; lead 5.6 s attentive r=1.2: {}", fmt::join(late, ", "), rate)};
}

Result determinism() {
  const auto cmd = fmt::format("simulate --scenario uber-timeline --seed 7 --trials 10000 --scenario-dir '{}'",
                               testing::scenario_dir().string());
  const auto a = testing::run_cli(cmd);
  const auto b = testing::run_cli(cmd);
  const bool cli = a.exit_code == 0 && !a.out.empty() && a.out == b.out;

  std::mt19937_64 rng(5);
  int same = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = testing::machine_from_json(testing::random_process_spec(500 + seed));
    const auto words = all_words(m->alphabet(), m->max_answer_len());
    std::vector<Answer> script;
    for (int i = 0; i < 4; ++i) script.push_back(Answer::word(words[rng() % words.size()]));
    const auto inputs = enumerate_inputs(m->inputs());
    const auto& input = inputs[rng() % inputs.size()];
    const auto t = run(*m, input, scripted_answer(script));
    const auto r = replay(trace_from_jsonl(trace_to_jsonl(t)), *m);
    same += trace_to_jsonl(r) == trace_to_jsonl(t);
  }
  return {cli && same == 50, fmt::format("cli byte-identical={} ({} bytes), replay identity {}/50", cli, a.out.size(), same)};
}

Result bernoulli() {
  const auto entry = load_scenario("bernoulli", testing::fixture_dir());
  MonteCarloOptions opt;
  opt.attribution = false;
  int within = 0;
  double worst = 0;
  for (std::uint64_t master = 0; master < 100; ++master) {
    const auto rate = monte_carlo(*entry.timed, 10000, master, opt).summary["outcomes"]["harm"]["rate"].get<double>();
    within += std::abs(rate - 0.1) <= 0.01;
    worst = std::max(worst, std::abs(rate - 0.1));
  }
  return {within >= 94, fmt::format("{}/100 master seeds within 0.01 of 0.1 (worst deviation {:.4f})", within, worst)};
}

Result performance() {
  json nodes = json::object();
  json vars = json::array();
  for (int i = 0; i < 4; ++i) {
    vars.push_back({{"name", fmt::format("a{}", i)}, {"type", "word"}});
    nodes[fmt::format("q{}", i)] = {{"kind", "query"},
                                    {"prompt", "'a'"},
                                    {"bind", fmt::format("a{}", i)},
                                    {"next", i < 3 ? fmt::format("q{}", i + 1) : "h"}};
  }
  nodes["h"] = {{"kind", "halt"}, {"output", "a3"}};
  const json doc = {{"name", "wide"},
                    {"alphabet", {"a", "b", "c", "d", "e", "f", "g"}},
                    {"max_answer_len", 1},
                    {"vars", vars},
                    {"entry", "q0"},
                    {"nodes", nodes}};
  const auto m = testing::machine_from_json(doc);
  auto t0 = Clock::now();
  const auto tree = build_tree(*m, {});
  const auto flags = tree.real_queries();
  const double tree_s = seconds_since(t0);
  const auto leaves = tree.count(TreeNode::Kind::Halt);

  t0 = Clock::now();
  bool all_pass = true;
  std::size_t n = 0;
  for (const auto& dir : {testing::scenario_dir(), testing::fixture_dir()}) {
    for (const auto& id : list_scenarios(dir)) {
      all_pass = all_pass && verify_golden(id, dir).pass;
      ++n;
    }
  }
  const double suite_s = seconds_since(t0);
  const bool ok = leaves == 4096 && !tree.truncated && tree_s < 1.0 && all_pass && suite_s < 30.0;
  return {ok, fmt::format("tree {} leaves {} queries in {:.3f} s; golden suite {} scenarios pass={} in {:.2f} s", leaves,
                          flags.size(), tree_s, n, all_pass, suite_s)};
}

Result truncation_soundness() {
  int good = 0;
  const std::vector<std::uint64_t> steps{3, 8, 20, 10'000};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = testing::machine_from_json(testing::random_process_spec(9000 + seed));
    bool ok = true;
    std::vector<SetupVerdict> verdicts;
    for (auto s : steps) {
      ClassifyOptions opt;
      opt.limits.max_steps = s;
      verdicts.push_back(classify_setup(*m, opt));
    }
    for (std::size_t i = 0; i < verdicts.size(); ++i) {
      if (!verdicts[i].conclusive) continue;
      for (std::size_t j = i + 1; j < verdicts.size(); ++j) ok = ok && verdicts[j].cls == verdicts[i].cls;
    }
    for (const auto& input : enumerate_inputs(m->inputs())) {
      std::vector<ComputationTree> trees;
      for (auto s : steps) {
        Limits l;
        l.max_steps = s;
        trees.push_back(build_tree(*m, input, l));
      }
      for (std::size_t i = 0; i + 1 < trees.size(); ++i) {
        std::map<std::vector<std::string>, bool> larger;
        for (const auto& f : trees.back().real_queries()) larger[path_strings(trees.back(), f.node)] = f.is_real;
        for (const auto& f : trees[i].real_queries()) {
          if (!f.conclusive) continue;
          auto it = larger.find(path_strings(trees[i], f.node));
          ok = ok && it != larger.end() && it->second == f.is_real;
        }
      }
    }
    good += ok;
  }
  return {good == 50, fmt::format("{}/50 specs keep every conclusive verdict and flag", good)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Result()>>> criteria{
      {"parity-real-query-pair", parity_pair},
      {"route-triple", route_triple},
      {"abort-exclusion", abort_exclusion},
      {"flattening-equivalence", flattening},
      {"schufa-slip-back", schufa},
      {"uber-timeline", uber},
      {"determinism", determinism},
      {"bernoulli-rate", bernoulli},
      {"performance", performance},
      {"truncation-soundness", truncation_soundness},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Result r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r = {false, std::string("error: ") + e.what()};
    }
    failed += !r.pass;
    fmt::print("{} {}: {}\n", r.pass ? "PASS" : "FAIL", name, r.detail);
    std::fflush(stdout);
  }
  return failed;
}
