#include <doctest.h>

#include <cmath>
#include <set>

#include "loopscope/failure/catalog.hpp"
#include "loopscope/failure/fault.hpp"
#include "loopscope/failure/timed.hpp"
#include "loopscope/ir/errors.hpp"
#include "loopscope/scenario/pack.hpp"
#include "support.hpp"

using namespace loopscope;
using nlohmann::json;

namespace {

TimedScenario timed(const std::string& id) { return *load_scenario(id, testing::scenario_dir()).timed; }

// Warning `lead` seconds before impact, fixed reaction, nothing injected.
TimedScenario warning_grid(double lead, double reaction) {
  auto doc = testing::read_json(testing::scenario_dir() / "uber-timeline.json");
  doc["id"] = "grid";
  doc["start"] = -6.0;
  doc["timeline"] = {{{"t", -lead}, {"event", "pedestrian"}}, {{"t", 0.0}, {"event", "impact"}}};
  doc["faults"] = json::array();
  doc["human"] = {{"reaction", {{"type", "fixed"}, {"value", reaction}}}, {"courage", 1.0}};
  doc["harm"]["strict"] = false;
  return *make_scenario(doc, nullptr, "grid").timed;
}

FaultInjection fault(json j) { return parse_fault(j, "fault"); }

// Independent Wilson score interval, z = 1.96.
std::pair<double, double> wilson(double k, double n) {
  const double z = 1.96, p = k / n, z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {centre - half, centre + half};
}

}  // namespace

TEST_CASE("taxonomy: five categories with their modes in order") {
  const auto& cat = load_taxonomy();
  REQUIRE(cat.categories.size() == 5);
  const std::vector<std::string> names{"Failure of the machine components", "Failure of the process and workflow",
                                       "Failure at the human–machine interface", "Failure of the human component",
                                       "Exogenous circumstances"};
  const std::vector<std::size_t> sizes{10, 11, 9, 12, 10};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(cat.categories[i].id == "FC" + std::to_string(i + 1));
    CHECK(cat.categories[i].name == names[i]);
    CHECK(cat.categories[i].modes.size() == sizes[i]);
  }
  CHECK(cat.categories[0].modes[7].name == "Lacking `common sense'");
  CHECK(cat.categories[1].modes[4].name == "Delayed notification");
  CHECK(cat.categories[2].modes[0].name == "Incomprehensible or incomplete outputs");
  CHECK(cat.categories[3].modes[1].name == "Automation bias");
  CHECK(cat.categories[3].modes[6].name == "Lacking courage");
  CHECK(cat.categories[4].modes[6].name == "Poor safety culture");
}

TEST_CASE("taxonomy ids are unique and resolvable") {
  std::set<std::string> ids;
  for (const auto& c : load_taxonomy().categories) {
    for (const auto& m : c.modes) {
      CHECK(ids.insert(m.id).second);
      CHECK(load_taxonomy().find(m.id) == &m);
      CHECK(m.ablatable == (m.name.rfind("Other ", 0) != 0));
    }
  }
  CHECK(ids.size() == 52);
  CHECK(load_taxonomy().find("FC9.nothing") == nullptr);
  CHECK(mode_slug("Lacking `common sense'") == "lacking-common-sense");
  CHECK(mode_slug("Insufficient self-control/independence") == "insufficient-self-control-independence");
}

TEST_CASE("notification delay adds to the latency and the clock the human sees") {
  const auto f = fault({{"mode", "FC2.delayed-notification"}, {"target", "oracle"}, {"notification_delay", 5.4}});
  const auto o = inject(constant_answer(Answer::word("1")), f);
  QueryContext ctx;
  const auto r = o("1", ctx);
  CHECK(r.latency == from_seconds(5.4));
  CHECK(r.answer == Answer::word("1"));
}

TEST_CASE("prompt truncation shows only the first symbols") {
  const auto f =
      fault({{"mode", "FC3.incomprehensible-or-incomplete-outputs"}, {"target", "oracle"}, {"prompt_truncation", 1}});
  const auto o = inject(echo_answer(2), f);
  CHECK(o("10", {}).answer == Answer::word("1"));
  CHECK(o("0", {}).answer == Answer::word("0"));
}

TEST_CASE("misclassification rewrites the environment stream") {
  const auto sc = timed("uber-timeline");
  const auto& f = sc.faults.at(0);
  REQUIRE(f.kind == FaultKind::MisclassificationMap);
  const auto seen = inject(sc.timeline, f);
  REQUIRE(seen.size() == 5);
  const std::vector<std::pair<double, std::string>> want{
      {-5.6, "vehicle"}, {-4.2, "bicycle"}, {-2.8, "other"}, {-1.5, "pedestrian"}, {0.0, "impact"}};
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(to_seconds(seen[i].t) == doctest::Approx(want[i].first));
    CHECK(seen[i].label == want[i].second);
  }
}

TEST_CASE("faults must fit their mode and target") {
  CHECK_THROWS_AS(fault({{"mode", "FC4.fatigue"}, {"target", "machine"}, {"error_rate", 0.1}}), SpecError);
  CHECK_THROWS_AS(fault({{"mode", "FC1.hallucinations"}, {"target", "machine"}, {"notification_delay", 1}}),
                  SpecError);
  CHECK_THROWS_AS(fault({{"mode", "FC7.unknown"}, {"target", "oracle"}}), SpecError);
  const auto delay = fault({{"mode", "FC2.delayed-notification"}, {"target", "oracle"}, {"notification_delay", 1}});
  CHECK_THROWS_AS(inject(testing::scenario_machine("parity"), delay), DomainError);
  CHECK_THROWS_AS(inject(HumanModelParams{}, delay), DomainError);
}

TEST_CASE("set fault rebuilds the machine with new initial values") {
  const auto sc = timed("notre-dame");
  const auto base = simulate_timed(sc, 0);
  const auto fixed = simulate_timed(sc.without_modes({"FC5.unreasonable-laws"}), 0);
  CHECK(base.outcome == TrialOutcome::Harm);
  CHECK(fixed.outcome == TrialOutcome::Averted);
}

TEST_CASE("a warning is acted on in time iff the reaction fits the lead") {
  for (double lead : {0.2, 0.5, 1.2, 2.0, 5.6}) {
    for (double reaction : {0.2, 0.5, 1.0, 1.2, 3.0}) {
      CAPTURE(lead);
      CAPTURE(reaction);
      const auto r = simulate_timed(warning_grid(lead, reaction), 0);
      CHECK((r.outcome == TrialOutcome::Averted) == (reaction <= lead));
      REQUIRE(r.action_at);
      CHECK(to_seconds(*r.action_at) == doctest::Approx(reaction - lead));
    }
  }
}

TEST_CASE("uber: harm with every fault, averted when the warning comes early") {
  const auto sc = timed("uber-timeline");
  const auto r = simulate_timed(sc, 0);
  CHECK(r.outcome == TrialOutcome::Harm);
  CHECK(r.run_outcome == "abort");
  CHECK(simulate_timed(sc.without_modes({"FC1.unexpected-inputs-or-outputs"}), 0).outcome == TrialOutcome::Averted);
  CHECK(simulate_timed(sc.without_modes({"FC2.delayed-notification"}), 0).outcome == TrialOutcome::Averted);
  CHECK(simulate_timed(sc.without_modes({"FC4.incongruous-intentions"}), 0).outcome == TrialOutcome::Harm);
}

TEST_CASE("attribution agrees with one-at-a-time ablation") {
  for (const auto* id : {"uber-timeline", "notre-dame"}) {
    const auto sc = timed(id);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto r = simulate_timed(sc, seed);
      const auto attr = attribute(r, sc);
      std::size_t ablatable = 0;
      for (const auto& f : sc.faults) ablatable += f.mode().ablatable;
      CHECK(attr.size() == ablatable);
      for (const auto& a : attr) {
        const auto alt = simulate_timed(sc.without_modes({a.mode_id}), seed);
        CHECK(a.decisive == (alt.outcome != r.outcome));
      }
    }
  }
}

TEST_CASE("no faults, no attribution") {
  const auto r = simulate_timed(warning_grid(2.0, 1.0), 3);
  CHECK(attribute(r, warning_grid(2.0, 1.0)).empty());
}

TEST_CASE("trials are a pure function of the seed") {
  const auto sc = timed("uber-timeline");
  for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) CHECK(simulate_timed(sc, seed).to_json() == simulate_timed(sc, seed).to_json());
}

TEST_CASE("notre-dame call-out comes more than thirty minutes late") {
  const auto r = simulate_timed(timed("notre-dame"), 0);
  CHECK(r.outcome == TrialOutcome::Harm);
  CHECK(r.run_outcome == "halt:1");
  REQUIRE(r.action_at);
  CHECK(to_seconds(*r.action_at) == doctest::Approx(1860.0));
  CHECK(to_seconds(*r.action_at) > 30 * 60);
}

TEST_CASE("Wilson interval") {
  for (auto [k, n] : {std::pair{0, 10}, {5, 10}, {10, 10}, {37, 1000}, {1, 1}}) {
    const auto got = wilson95(k, n);
    const auto want = wilson(k, n);
    CHECK(got.lo == doctest::Approx(want.first).epsilon(1e-3));
    CHECK(got.hi == doctest::Approx(want.second).epsilon(1e-3));
    CHECK(got.lo >= 0.0);
    CHECK(got.hi <= 1.0);
  }
}

TEST_CASE("monte carlo does not depend on the thread count") {
  const auto sc = timed("uber-timeline");
  MonteCarloOptions one;
  one.threads = 1;
  MonteCarloOptions three;
  three.threads = 3;
  const auto a = monte_carlo(sc, 300, 7, one);
  const auto b = monte_carlo(sc, 300, 7, three);
  CHECK(a.summary.dump() == b.summary.dump());
  CHECK(records_to_jsonl(a.records) == records_to_jsonl(b.records));
  CHECK(a.records.size() == 300);
  CHECK(a.records[5].seed == trial_seed(7, 5));
  CHECK(a.summary["outcomes"]["averted"]["count"] == 0);
}

TEST_CASE("monte carlo needs trials") {
  CHECK_THROWS_AS(monte_carlo(timed("uber-timeline"), 0, 1), DomainError);
}

TEST_CASE("error-rate fault drives the answer mismatch rate") {
  const auto entry = load_scenario("bernoulli", testing::fixture_dir());
  MonteCarloOptions opt;
  opt.attribution = false;
  const auto mc = monte_carlo(*entry.timed, 4000, 1, opt);
  const double rate = mc.summary["outcomes"]["harm"]["rate"].get<double>();
  CHECK(std::abs(rate - 0.1) < 0.025);
}
