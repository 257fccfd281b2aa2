#include "loopscope/scenario/pack.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>

#include "loopscope/analysis/classify.hpp"
#include "loopscope/analysis/flatten.hpp"
#include "loopscope/analysis/metrics.hpp"
#include "loopscope/analysis/tree.hpp"
#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"
#include "loopscope/ir/spec_io.hpp"

#ifndef LOOPSCOPE_SCENARIO_DIR
#define LOOPSCOPE_SCENARIO_DIR "scenarios/v1"
#endif

namespace loopscope {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kExpectedSuffix = ".expected.json";

ojson ordered(const nlohmann::json& j) { return ojson::parse(j.dump()); }

bool is_golden_file(const fs::path& p) {
  const auto name = p.filename().string();
  return name.size() > std::string(kExpectedSuffix).size() &&
         name.compare(name.size() - std::string(kExpectedSuffix).size(), std::string::npos, kExpectedSuffix) == 0;
}

void check_golden(const nlohmann::json& golden, const std::string& origin) {
  JsonFields f(golden, origin);
  f.string_or("id", "");
  if (const auto* p = f.optional("params"); p && !p->is_object()) throw SpecError(f.path_of("params"), "expected an object");
  const auto& exp = f.required("expected");
  if (!exp.is_object() || exp.empty()) throw SpecError(f.path_of("expected"), "expected a non-empty object");
  for (auto it = exp.begin(); it != exp.end(); ++it) {
    JsonFields ef(it.value(), f.path_of("expected") + "." + it.key());
    ef.required("value");
    const auto src = ef.string("source");
    if (std::find_if(std::begin(kGoldenSources), std::end(kGoldenSources),
                     [&](const char* s) { return src == s; }) == std::end(kGoldenSources))
      throw SpecError(ef.path_of("source"), "source must be worked-example, by-construction or computed");
    ef.string_or("note", "");
    ef.finish();
  }
  f.finish();
}

nlohmann::json param(const ScenarioEntry& e, const std::string& key, nlohmann::json fallback) {
  if (e.golden.is_object() && e.golden.contains("params") && e.golden["params"].contains(key))
    return e.golden["params"][key];
  return fallback;
}

Input fixture_input(const ScenarioEntry& e) {
  if (e.input.is_null()) {
    if (!e.machine->inputs().empty()) throw Error("scenario " + e.id + " has inputs but no \"input\" binding");
    return {};
  }
  return input_from_json(e.input, e.machine->inputs());
}

const OracleStrategy& fixture_oracle(const ScenarioEntry& e) {
  if (!e.oracle) throw Error("scenario " + e.id + " has no oracle binding");
  return *e.oracle;
}

nlohmann::json flatten_value(const ScenarioEntry& e) {
  auto r = flatten_bounded_queries(e.machine);
  if (auto* nf = std::get_if<NotFlattenable>(&r)) return {{"flattenable", false}, {"reason", nf->reason}};
  const auto& fl = std::get<Flattened>(r);
  return {{"flattenable", true},
          {"questions", fl.questions},
          {"equal", fl.certificate.equal},
          {"cases", fl.certificate.cases}};
}

/// Fields that differ, descending into objects.
void diff_into(const std::string& field, const nlohmann::json& want, const nlohmann::json& got,
               std::vector<GoldenMismatch>& out) {
  if (want.is_object() && got.is_object()) {
    for (auto it = want.begin(); it != want.end(); ++it) {
      const auto sub = field + "." + it.key();
      if (!got.contains(it.key()))
        out.push_back({sub, it.value(), nullptr});
      else
        diff_into(sub, it.value(), got[it.key()], out);
    }
    for (auto it = got.begin(); it != got.end(); ++it) {
      if (!want.contains(it.key())) out.push_back({field + "." + it.key(), nullptr, it.value()});
    }
    return;
  }
  const bool same = (want.is_number() && got.is_number()) ? std::abs(want.get<double>() - got.get<double>()) < 1e-9
                                                          : want == got;
  if (!same) out.push_back({field, want, got});
}

}  // namespace

const char* scenario_kind_name(ScenarioKind k) {
  return k == ScenarioKind::TimedScenario ? "timed-scenario" : "classification-fixture";
}

nlohmann::json ScenarioEntry::expected(const std::string& key) const {
  if (!golden.is_object() || !golden["expected"].contains(key)) return nullptr;
  return golden["expected"][key]["value"];
}

fs::path default_scenario_dir() {
  if (const char* env = std::getenv("LOOPSCOPE_SCENARIOS"); env && *env) return env;
  return LOOPSCOPE_SCENARIO_DIR;
}

std::vector<std::string> list_scenarios(const fs::path& dir) {
  std::vector<std::string> ids;
  std::error_code ec;
  for (const auto& de : fs::directory_iterator(dir, ec)) {
    const auto& p = de.path();
    if (p.extension() != ".json" || is_golden_file(p)) continue;
    ids.push_back(p.stem().string());
  }
  if (ec) throw Error("cannot read scenario directory " + dir.string() + ": " + ec.message());
  std::sort(ids.begin(), ids.end());
  return ids;
}

OracleStrategy oracle_from_json(const nlohmann::json& j, const Machine& m, const std::string& path) {
  JsonFields f(j, path);
  std::optional<OracleStrategy> out;
  auto once = [&](const char* key) {
    if (out) throw SpecError(path, "an oracle binding has exactly one kind");
    return f.path_of(key);
  };
  if (const auto* s = f.optional("script")) {
    const auto p = once("script");
    if (!s->is_array() || s->empty()) throw SpecError(p, "expected a non-empty list of answers");
    std::vector<Answer> script;
    for (std::size_t i = 0; i < s->size(); ++i)
      script.push_back(answer_from_json((*s)[i], m.alphabet(), m.max_answer_len(), fmt::format("{}[{}]", p, i)));
    out = scripted_answer(std::move(script));
  }
  if (const auto* c = f.optional("constant")) {
    const auto p = once("constant");
    out = constant_answer(answer_from_json(*c, m.alphabet(), m.max_answer_len(), p));
  }
  if (const auto* e = f.optional("echo")) {
    once("echo");
    if (*e != true) throw SpecError(f.path_of("echo"), "expected true");
    out = echo_answer(m.max_answer_len());
  }
  if (const auto* t = f.optional("threshold")) {
    const auto p = once("threshold");
    JsonFields tf(*t, p);
    const auto at = tf.integer("at");
    const auto accept = tf.string("accept");
    const auto reject = tf.string("reject");
    tf.finish();
    for (const auto& w : {accept, reject}) {
      if (!m.in_answer_space(w)) throw SpecError(p, "'" + w + "' is outside the answer space");
    }
    out = threshold_human(at, accept, reject, m.alphabet());
  }
  f.finish();
  if (!out) throw SpecError(path, "expected script, constant, echo or threshold");
  return *out;
}

ScenarioEntry make_scenario(const nlohmann::json& doc, const nlohmann::json& golden, const std::string& origin) {
  if (!doc.is_object()) throw SpecError(origin, "expected a JSON object");
  ScenarioEntry e;
  e.document = doc;
  e.golden = golden;
  const auto kind = doc.value("kind", std::string{"classification-fixture"});
  if (kind == "timed-scenario") {
    e.kind = ScenarioKind::TimedScenario;
    e.timed = parse_timed_scenario(doc, origin);
    e.machine = e.timed->machine;
    e.id = e.timed->id;
  } else if (kind == "classification-fixture") {
    JsonFields f(doc, origin);
    e.id = f.string_or("id", "");
    f.optional("kind");
    auto adapted = load_machine(f.required("machine"));
    e.machine = adapted.machine;
    e.warnings = adapted.warnings;
    if (const auto* in = f.optional("input")) {
      e.input = *in;
      try {
        input_from_json(e.input, e.machine->inputs());
      } catch (const DomainError& err) {
        throw SpecError(f.path_of("input"), err.what());
      }
    }
    if (const auto* o = f.optional("oracle")) e.oracle = oracle_from_json(*o, *e.machine, f.path_of("oracle"));
    f.optional("title");
    f.optional("description");
    f.finish();
  } else {
    throw SpecError(origin + ".kind", "unknown scenario kind '" + kind + "'");
  }
  e.title = doc.value("title", std::string{});
  e.description = doc.value("description", std::string{});
  if (e.id.empty()) e.id = e.machine->name();
  if (!golden.is_null()) check_golden(golden, origin + kExpectedSuffix);
  return e;
}

ScenarioEntry load_scenario_file(const fs::path& path) {
  const auto origin = path.filename().string();
  const auto doc = parse_json_text(read_text_file(path), origin);
  nlohmann::json golden;
  auto gpath = path;
  gpath.replace_extension();
  gpath += kExpectedSuffix;
  if (fs::exists(gpath)) golden = parse_json_text(read_text_file(gpath), gpath.filename().string());
  auto e = make_scenario(doc, golden, origin);
  return e;
}

ScenarioEntry load_scenario(const std::string& id, const fs::path& dir) {
  const auto path = dir / (id + ".json");
  if (id.empty() || id.find('/') != std::string::npos || !fs::exists(path))
    throw Error("unknown scenario id '" + id + "'");
  auto e = load_scenario_file(path);
  if (e.golden.is_null()) throw SpecError(id, "missing golden file " + id + kExpectedSuffix);
  return e;
}

ScenarioEntry resolve_scenario(const std::string& arg, const fs::path& dir) {
  if (fs::exists(dir / (arg + ".json")) && arg.find('/') == std::string::npos) return load_scenario(arg, dir);
  if (!fs::exists(arg)) throw Error("no scenario id or file named '" + arg + "'");
  const auto doc = parse_json_text(read_text_file(arg), fs::path(arg).filename().string());
  if (doc.is_object() && doc.contains("machine")) return load_scenario_file(arg);
  // A bare machine spec.
  ScenarioEntry e;
  auto adapted = load_machine(doc);
  e.machine = adapted.machine;
  e.warnings = adapted.warnings;
  e.document = doc;
  e.id = e.machine->name();
  return e;
}

nlohmann::json compute_golden_value(const ScenarioEntry& e, const std::string& key) {
  const auto& m = *e.machine;
  if (e.timed) {
    const auto& sc = *e.timed;
    const auto seed = param(e, "seed", 0).get<std::uint64_t>();
    if (key == "outcome") return trial_outcome_name(simulate_timed(sc, seed).outcome);
    if (key == "run_outcome") return simulate_timed(sc, seed).run_outcome;
    if (key == "action_at") {
      const auto r = simulate_timed(sc, seed);
      return r.action_at ? nlohmann::json(to_seconds(*r.action_at)) : nlohmann::json(nullptr);
    }
    if (key == "end_at") return to_seconds(simulate_timed_trace(sc, seed).end);
    if (key == "decisive_modes") {
      const auto r = simulate_timed(sc, seed);
      auto out = nlohmann::json::array();
      for (const auto& a : attribute(r, sc)) {
        if (a.decisive) out.push_back(a.mode_id);
      }
      return out;
    }
    if (key == "ablated") {
      auto out = nlohmann::json::object();
      for (std::size_t i = 0; i < sc.faults.size(); ++i) {
        if (!sc.faults[i].mode().ablatable) continue;
        out[sc.faults[i].mode_id] = trial_outcome_name(simulate_timed(sc.without({i}), seed).outcome);
      }
      return out;
    }
    if (key == "averted_rate" || key == "averted_rate_attentive") {
      auto run_sc = sc;
      if (key == "averted_rate_attentive") {
        const auto drop = param(e, "ablate", nlohmann::json::array()).get<std::vector<std::string>>();
        run_sc = sc.without_modes(drop);
      }
      const auto trials = param(e, "trials", 1000).get<std::uint64_t>();
      MonteCarloOptions opt;
      opt.attribution = false;
      opt.threads = 1;
      const auto mc = monte_carlo(run_sc, trials, seed, opt);
      return mc.summary["outcomes"]["averted"]["rate"];
    }
    throw Error("unknown golden key '" + key + "' for a timed scenario");
  }

  if (key == "class" || key == "conclusive" || key == "abort_reachable") {
    const auto v = classify_setup(m);
    if (key == "class") return setup_class_name(v.cls);
    if (key == "conclusive") return v.conclusive;
    return v.abort_reachable;
  }
  if (key == "real_flags") {
    auto flags = real_flags_by_depth(build_tree(m, fixture_input(e)));
    return nlohmann::json(std::vector<bool>(flags.begin(), flags.end()));
  }
  if (key == "outputs") {
    const auto tree = build_tree(m, fixture_input(e));
    return nlohmann::json(std::vector<std::string>(tree.nodes[0].outputs.begin(), tree.nodes[0].outputs.end()));
  }
  if (key == "flatten") return flatten_value(e);
  if (key == "standalone_class" || key == "effective_class" || key == "total" || key == "single_valued") {
    const auto v = classify_effective(m, {fixture_oracle(e)});
    if (key == "standalone_class") return setup_class_name(v.standalone.cls);
    if (key == "effective_class") return setup_class_name(v.effective.cls);
    if (key == "total") return v.total;
    return v.single_valued;
  }
  if (key == "run_outcome" || key == "segments" || key == "decisive") {
    const auto& oracle = fixture_oracle(e);
    const auto t = run(m, fixture_input(e), oracle);
    if (key == "run_outcome") return t.outcome.str();
    if (key == "segments") return trace_segments(t);
    return decisive_points(t, m, &oracle).decisive;
  }
  throw Error("unknown golden key '" + key + "' for a classification fixture");
}

GoldenResult verify_golden(const ScenarioEntry& e) {
  GoldenResult r;
  r.id = e.id;
  if (!e.golden.is_object()) {
    r.diff.push_back({"expected", "golden file", nullptr});
    return r;
  }
  for (auto it = e.golden["expected"].begin(); it != e.golden["expected"].end(); ++it) {
    nlohmann::json got;
    try {
      got = compute_golden_value(e, it.key());
    } catch (const std::exception& ex) {
      got = std::string("error: ") + ex.what();
    }
    r.actual[it.key()] = ordered(got);
    diff_into(it.key(), it.value()["value"], got, r.diff);
    ++r.checked;
  }
  r.pass = r.diff.empty();
  return r;
}

GoldenResult verify_golden(const std::string& id, const fs::path& dir) { return verify_golden(load_scenario(id, dir)); }

nlohmann::ordered_json GoldenResult::to_json() const {
  ojson j;
  j["id"] = id;
  j["pass"] = pass;
  j["checked"] = checked;
  auto d = ojson::array();
  for (const auto& m : diff) d.push_back(ojson{{"field", m.field}, {"expected", ordered(m.expected)}, {"actual", ordered(m.actual)}});
  j["diff"] = d;
  return j;
}

}  // namespace loopscope
