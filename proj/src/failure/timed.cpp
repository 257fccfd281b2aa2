#include "loopscope/failure/timed.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <thread>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"
#include "loopscope/ir/spec_io.hpp"
#include "loopscope/oracle/rng.hpp"

namespace loopscope {

namespace {

using ojson = nlohmann::ordered_json;

const char* kSeedDerivation =
    "trial_seed(master, i) = splitmix64(splitmix64(master) ^ splitmix64(i + 0x632be59bd9b4e019))";

SimDuration seconds_field(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw SpecError(path, "expected seconds");
  return from_seconds(j.get<double>());
}

HarmRule parse_harm(const nlohmann::json& j, const std::string& path, const Timeline& timeline,
                    const Machine& machine) {
  JsonFields f(j, path);
  HarmRule h;
  const auto kind = f.string("kind");
  if (kind == "deadline") {
    h.kind = HarmRule::Kind::Deadline;
    const auto& by = f.required("by");
    if (by.is_number()) {
      h.by = from_seconds(by.get<double>());
    } else {
      JsonFields bf(by, f.path_of("by"));
      h.by_event = bf.string("event");
      bf.finish();
      const bool found = std::any_of(timeline.begin(), timeline.end(),
                                     [&](const TimelineEvent& e) { return e.label == h.by_event; });
      if (!found) throw SpecError(f.path_of("by"), "event '" + h.by_event + "' is not on the timeline");
    }
    const auto& actions = f.required("actions");
    if (!actions.is_array() || actions.empty()) throw SpecError(f.path_of("actions"), "expected a non-empty list");
    for (const auto& a : actions) {
      const auto s = a.is_string() ? a.get<std::string>() : std::string{};
      const bool ok = s == "stop" || (s.rfind("halt:", 0) == 0 && machine.in_answer_space(s.substr(5)));
      if (!ok) throw SpecError(f.path_of("actions"), "actions are \"stop\" or \"halt:<word>\", got " + a.dump());
      h.actions.push_back(s);
    }
    h.strict = f.boolean_or("strict", true);
  } else if (kind == "answer-mismatch") {
    h.kind = HarmRule::Kind::AnswerMismatch;
    h.expected = f.string("expected");
    if (!machine.in_answer_space(h.expected))
      throw SpecError(f.path_of("expected"), "expected output outside the answer space");
  } else {
    throw SpecError(f.path_of("kind"), "unknown harm rule '" + kind + "' (deadline, answer-mismatch)");
  }
  f.finish();
  return h;
}

struct Prepared {
  MachinePtr machine;
  Timeline timeline;
  OracleStrategy oracle;
  HarmRule harm;
};

Prepared prepare(const TimedScenario& sc, std::uint64_t seed) {
  Prepared p{sc.machine, sc.timeline, {}, sc.harm};
  HumanModelParams human = sc.human;
  // Set rebuilds the process machine, so it goes before any wrapper.
  for (const auto& f : sc.faults) {
    if (f.kind == FaultKind::Set) p.machine = inject(p.machine, f, seed);
  }
  std::vector<const FaultInjection*> oracle_faults;
  for (const auto& f : sc.faults) {
    switch (f.kind) {
      case FaultKind::Set:
      case FaultKind::Description:
        break;
      case FaultKind::ExtraDelay:
      case FaultKind::OutputError:
        p.machine = inject(p.machine, f, seed);
        break;
      case FaultKind::MisclassificationMap:
        p.timeline = inject(p.timeline, f);
        break;
      case FaultKind::Human:
      case FaultKind::ErrorRate:
        human = inject(human, f);
        break;
      case FaultKind::NotificationDelay:
      case FaultKind::PromptTruncation:
        oracle_faults.push_back(&f);
        break;
      case FaultKind::Deadline:
        p.harm.by = f.seconds;
        p.harm.by_event.clear();
        break;
    }
  }
  p.oracle = stochastic_human(human, seed, sc.intent, p.machine->alphabet(), p.machine->max_answer_len());
  for (const auto* f : oracle_faults) p.oracle = inject(std::move(p.oracle), *f);
  return p;
}

Trace run_prepared(const TimedScenario& sc, const Prepared& p, std::uint64_t seed) {
  RunHooks hooks;
  hooks.start = sc.start;
  const Timeline& tl = p.timeline;
  if (sc.observe_slot) {
    const auto slot = *sc.observe_slot;
    const auto& labels = sc.machine->spec().slots[slot].domain.labels;
    hooks.before_step = [&tl, &labels, slot](Configuration& c, SimDuration now) {
      const TimelineEvent* latest = nullptr;
      for (const auto& e : tl) {
        if (e.t > now) break;
        latest = &e;
      }
      if (!latest) return;
      const auto it = std::find(labels.begin(), labels.end(), latest->label);
      c.store[slot] = static_cast<std::int64_t>(it - labels.begin());
    };
  }
  hooks.next_event = [&tl](SimDuration now) -> std::optional<SimDuration> {
    for (const auto& e : tl) {
      if (e.t > now) return e.t;
    }
    return std::nullopt;
  };
  return run(*p.machine, sc.input, p.oracle, sc.limits, hooks, seed);
}

std::optional<SimDuration> deadline_of(const HarmRule& h, const Timeline& original) {
  if (h.by) return h.by;
  for (const auto& e : original) {
    if (e.label == h.by_event) return e.t;
  }
  return std::nullopt;
}

}  // namespace

const char* trial_outcome_name(TrialOutcome o) {
  switch (o) {
    case TrialOutcome::Harm:
      return "harm";
    case TrialOutcome::Averted:
      return "averted";
    case TrialOutcome::Aborted:
      return "aborted";
    case TrialOutcome::Completed:
      return "completed";
  }
  return "?";
}

TimedScenario TimedScenario::without(const std::vector<std::size_t>& fault_indices) const {
  TimedScenario s = *this;
  s.faults.clear();
  for (std::size_t i = 0; i < faults.size(); ++i) {
    if (std::find(fault_indices.begin(), fault_indices.end(), i) == fault_indices.end()) s.faults.push_back(faults[i]);
  }
  return s;
}

TimedScenario TimedScenario::without_modes(const std::vector<std::string>& mode_ids) const {
  std::vector<std::size_t> drop;
  for (std::size_t i = 0; i < faults.size(); ++i) {
    if (std::find(mode_ids.begin(), mode_ids.end(), faults[i].mode_id) != mode_ids.end()) drop.push_back(i);
  }
  return without(drop);
}

TimedScenario parse_timed_scenario(const nlohmann::json& doc, const std::string& path) {
  JsonFields f(doc, path);
  TimedScenario sc;
  sc.id = f.string_or("id", "");
  for (const char* k : {"kind", "title", "description"}) f.optional(k);

  auto spec = parse_spec(f.required("machine"));
  auto* ps = std::get_if<ProcessSpec>(&spec);
  if (!ps) throw SpecError(f.path_of("machine"), "timed scenarios need a process-mode machine");
  sc.machine = std::make_shared<ProcessMachine>(std::move(*ps));
  const auto& m = *sc.machine;

  sc.input_json = f.has("input") ? f.required("input") : nlohmann::json::object();
  try {
    sc.input = input_from_json(sc.input_json, m.inputs());
  } catch (const DomainError& e) {
    throw SpecError(f.path_of("input"), e.what());
  }

  sc.start = f.has("start") ? seconds_field(f.required("start"), f.path_of("start")) : SimDuration{0};
  const auto& tl = f.required("timeline");
  if (!tl.is_array()) throw SpecError(f.path_of("timeline"), "expected a list of {t, event}");
  for (std::size_t i = 0; i < tl.size(); ++i) {
    const auto p = fmt::format("{}.timeline[{}]", path, i);
    JsonFields ef(tl[i], p);
    TimelineEvent e{seconds_field(ef.required("t"), ef.path_of("t")), ef.string("event")};
    ef.finish();
    if (!sc.timeline.empty() && e.t < sc.timeline.back().t) throw SpecError(p, "timeline must be sorted by t");
    sc.timeline.push_back(std::move(e));
  }

  std::vector<std::string> labels;
  if (const auto* o = f.optional("observe")) {
    sc.observe = o->is_string() ? o->get<std::string>() : "";
    const auto slot = m.spec().slot_of(sc.observe);
    if (!slot || *slot < m.spec().input_count || m.spec().slots[*slot].domain.kind != DomainKind::Enum)
      throw SpecError(f.path_of("observe"), "observe must name an enum variable of the machine");
    sc.observe_slot = slot;
    labels = m.spec().slots[*slot].domain.labels;
    for (std::size_t i = 0; i < sc.timeline.size(); ++i) {
      if (std::find(labels.begin(), labels.end(), sc.timeline[i].label) == labels.end())
        throw SpecError(fmt::format("{}.timeline[{}]", path, i),
                        "event '" + sc.timeline[i].label + "' is not a label of " + sc.observe);
    }
  }

  sc.human = f.has("human") ? human_params_from_json(f.required("human"), f.path_of("human")) : HumanModelParams{};
  sc.intent_json = f.required("intent");
  sc.intent = intent_from_json(sc.intent_json, m.alphabet(), m.max_answer_len(), f.path_of("intent"));

  if (const auto* faults = f.optional("faults")) {
    if (!faults->is_array()) throw SpecError(f.path_of("faults"), "expected a list");
    for (std::size_t i = 0; i < faults->size(); ++i) {
      const auto p = fmt::format("{}.faults[{}]", path, i);
      auto fault = parse_fault((*faults)[i], p);
      if (fault.kind == FaultKind::MisclassificationMap && sc.observe_slot) {
        for (const auto& l : fault.misclassification.labels) {
          if (std::find(labels.begin(), labels.end(), l) == labels.end())
            throw SpecError(p, "label '" + l + "' is not a label of " + sc.observe);
        }
      }
      sc.faults.push_back(std::move(fault));
    }
  }
  sc.harm = parse_harm(f.required("harm"), f.path_of("harm"), sc.timeline, m);
  if (const auto* l = f.optional("limits")) {
    try {
      sc.limits = Limits::from_json(*l);
    } catch (const DomainError& e) {
      throw SpecError(f.path_of("limits"), e.what());
    }
  }
  f.finish();

  // Catch unknown variables or nodes in faults now rather than per trial.
  try {
    prepare(sc, 0);
  } catch (const DomainError& e) {
    throw SpecError(f.path_of("faults"), e.what());
  }
  return sc;
}

Trace simulate_timed_trace(const TimedScenario& sc, std::uint64_t seed) {
  const auto p = prepare(sc, seed);
  return run_prepared(sc, p, seed);
}

TrialRecord simulate_timed(const TimedScenario& sc, std::uint64_t seed) {
  const auto p = prepare(sc, seed);
  const auto t = run_prepared(sc, p, seed);

  TrialRecord r;
  r.seed = seed;
  for (const auto& f : sc.faults) {
    if (std::find(r.triggered_modes.begin(), r.triggered_modes.end(), f.mode_id) == r.triggered_modes.end())
      r.triggered_modes.push_back(f.mode_id);
  }
  r.run_outcome = t.outcome.str();
  r.queries = t.queries.size();
  for (const auto& q : t.queries) {
    r.response_latency.push_back(q.answered_at - q.issued_at);
    r.flags.push_back(q.flags);
    if (std::find(q.flags.begin(), q.flags.end(), "fatigue-error") != q.flags.end()) ++r.wrong_answers;
  }

  const auto& harm = p.harm;
  if (harm.kind == HarmRule::Kind::Deadline) {
    r.deadline = deadline_of(harm, sc.timeline);
    auto has = [&](const std::string& a) { return std::find(harm.actions.begin(), harm.actions.end(), a) != harm.actions.end(); };
    if (has("stop")) {
      for (const auto& q : t.queries) {
        if (q.answer.is_stop()) {
          r.action_at = q.answered_at;
          break;
        }
      }
    }
    if (!r.action_at && t.outcome.is_halt() && has("halt:" + t.outcome.output)) r.action_at = t.end;
    const bool in_time = r.action_at && r.deadline && (harm.strict ? *r.action_at < *r.deadline
                                                                    : *r.action_at <= *r.deadline);
    r.outcome = in_time ? TrialOutcome::Averted : TrialOutcome::Harm;
  } else if (t.outcome.is_halt()) {
    r.outcome = t.outcome.output == harm.expected ? TrialOutcome::Completed : TrialOutcome::Harm;
  } else {
    r.outcome = TrialOutcome::Aborted;
  }
  return r;
}

std::vector<Attribution> attribute(const TrialRecord& trial, const TimedScenario& sc) {
  std::vector<Attribution> out;
  for (std::size_t i = 0; i < sc.faults.size(); ++i) {
    if (!sc.faults[i].mode().ablatable) continue;
    const auto ablated = simulate_timed(sc.without({i}), trial.seed);
    out.push_back({sc.faults[i].mode_id, ablated.outcome != trial.outcome});
  }
  return out;
}

Interval wilson95(std::uint64_t successes, std::uint64_t n) {
  if (n == 0) return {0, 1};
  const double z = 1.959963984540054;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1 + z * z / nn;
  const double centre = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

nlohmann::ordered_json TrialRecord::to_json() const {
  ojson j;
  j["seed"] = seed;
  j["outcome"] = trial_outcome_name(outcome);
  j["run_outcome"] = run_outcome;
  auto lat = ojson::array();
  for (auto l : response_latency) lat.push_back(to_seconds(l));
  j["response_latency"] = lat;
  j["triggered_modes"] = triggered_modes;
  j["action_at"] = action_at ? ojson(to_seconds(*action_at)) : ojson(nullptr);
  j["deadline"] = deadline ? ojson(to_seconds(*deadline)) : ojson(nullptr);
  j["queries"] = queries;
  j["wrong_answers"] = wrong_answers;
  j["flags"] = flags;
  if (attribution) {
    auto a = ojson::array();
    for (const auto& x : *attribution) a.push_back(ojson{{"mode", x.mode_id}, {"decisive", x.decisive}});
    j["attribution"] = a;
  }
  return j;
}

MonteCarloResult monte_carlo(const TimedScenario& sc, std::uint64_t trials, std::uint64_t master_seed,
                             const MonteCarloOptions& options) {
  if (trials == 0) throw DomainError("monte carlo needs at least one trial");
  MonteCarloResult res;
  res.records.resize(trials);

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, trials));
  auto work = [&](unsigned w) {
    for (std::uint64_t i = w; i < trials; i += threads) {
      auto r = simulate_timed(sc, trial_seed(master_seed, i));
      if (options.attribution) r.attribution = attribute(r, sc);
      res.records[i] = std::move(r);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  // Aggregation walks records in trial order, so the summary does not
  // depend on the thread count.
  std::map<TrialOutcome, std::uint64_t> counts;
  std::uint64_t wrong = 0, queries = 0;
  std::map<std::string, std::uint64_t> by_mode;
  std::map<std::string, std::uint64_t> by_category;
  const auto& catalog = load_taxonomy();
  for (const auto& r : res.records) {
    ++counts[r.outcome];
    wrong += r.wrong_answers;
    queries += r.queries;
    if (!r.attribution) continue;
    std::set<std::string> cats;
    for (const auto& a : *r.attribution) {
      if (!a.decisive) continue;
      ++by_mode[a.mode_id];
      cats.insert(catalog.categories[catalog.find(a.mode_id)->category].id);
    }
    for (const auto& c : cats) ++by_category[c];
  }

  ojson s;
  s["scenario"] = sc.id;
  s["machine"] = sc.machine->name();
  s["spec_hash"] = hash_hex(sc.machine->spec_hash());
  s["limits"] = sc.limits.to_json();
  s["trials"] = trials;
  s["master_seed"] = master_seed;
  s["seed_derivation"] = kSeedDerivation;
  ojson outcomes;
  for (auto o : {TrialOutcome::Harm, TrialOutcome::Averted, TrialOutcome::Aborted, TrialOutcome::Completed}) {
    const auto n = counts[o];
    const auto ci = wilson95(n, trials);
    outcomes[trial_outcome_name(o)] = ojson{{"count", n},
                                            {"rate", static_cast<double>(n) / static_cast<double>(trials)},
                                            {"wilson95", {ci.lo, ci.hi}}};
  }
  s["outcomes"] = outcomes;
  const auto wci = wilson95(wrong, queries);
  s["wrong_answers"] = ojson{{"count", wrong},
                             {"queries", queries},
                             {"rate", queries ? static_cast<double>(wrong) / static_cast<double>(queries) : 0.0},
                             {"wilson95", {wci.lo, wci.hi}}};
  auto faults = ojson::array();
  for (const auto& f : sc.faults) faults.push_back(f.to_json());
  s["faults"] = faults;
  if (options.attribution) {
    ojson attr;
    ojson modes = ojson::object();
    for (const auto& f : sc.faults) {
      if (f.mode().ablatable) modes[f.mode_id] = by_mode[f.mode_id];
    }
    ojson cats = ojson::object();
    for (const auto& c : catalog.categories) cats[c.id] = by_category[c.id];
    attr["method"] = "single-fault ablation, same seed";
    attr["decisive_trials_by_mode"] = modes;
    attr["decisive_trials_by_category"] = cats;
    s["attribution"] = attr;
  }
  auto notes = ojson::array();
  if (trials == 1) notes.push_back("degenerate interval: a single trial bounds each rate only loosely");
  for (const auto& f : sc.faults) {
    if (!f.mode().ablatable) notes.push_back(f.mode_id + " is descriptive only and excluded from ablation");
  }
  s["notes"] = notes;
  res.summary = std::move(s);
  return res;
}

std::string records_to_jsonl(const std::vector<TrialRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

std::string summary_markdown(const nlohmann::ordered_json& s) {
  std::string out = fmt::format("# Monte Carlo: {}\n\n", s.value("scenario", std::string{}));
  out += fmt::format("- machine: {} (spec {})\n", s["machine"].get<std::string>(), s["spec_hash"].get<std::string>());
  out += fmt::format("- limits: {}\n", s["limits"].dump());
  out += fmt::format("- trials: {}, master seed {}\n", s["trials"].get<std::uint64_t>(),
                     s["master_seed"].get<std::uint64_t>());
  out += fmt::format("- seeds: {}\n\n", s["seed_derivation"].get<std::string>());
  out += "| outcome | count | rate | Wilson 95% |\n|---|---|---|---|\n";
  for (const auto& [name, o] : s["outcomes"].items()) {
    out += fmt::format("| {} | {} | {:.4f} | [{:.4f}, {:.4f}] |\n", name, o["count"].get<std::uint64_t>(),
                       o["rate"].get<double>(), o["wilson95"][0].get<double>(), o["wilson95"][1].get<double>());
  }
  const auto& w = s["wrong_answers"];
  out += fmt::format("\nWrong answers: {} of {} queries, rate {:.4f} [{:.4f}, {:.4f}]\n",
                     w["count"].get<std::uint64_t>(), w["queries"].get<std::uint64_t>(), w["rate"].get<double>(),
                     w["wilson95"][0].get<double>(), w["wilson95"][1].get<double>());
  if (s.contains("attribution")) {
    out += "\n## Attribution (" + s["attribution"]["method"].get<std::string>() + ")\n\n";
    out += "| mode | decisive trials |\n|---|---|\n";
    for (const auto& [mode, n] : s["attribution"]["decisive_trials_by_mode"].items())
      out += fmt::format("| {} | {} |\n", mode, n.get<std::uint64_t>());
    out += "\n| category | decisive trials |\n|---|---|\n";
    for (const auto& [cat, n] : s["attribution"]["decisive_trials_by_category"].items())
      out += fmt::format("| {} | {} |\n", cat, n.get<std::uint64_t>());
  }
  if (!s["notes"].empty()) {
    out += "\n## Notes\n\n";
    for (const auto& n : s["notes"]) out += "- " + n.get<std::string>() + "\n";
  }
  return out;
}

}  // namespace loopscope
