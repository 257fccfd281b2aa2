// loopscope: command-line entry point.
//
// Exit codes: 0 success, 1 a check failed (golden mismatch, replay
// divergence), 2 invalid arguments or input files, 3 inconclusive verdict
// under --strict.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "loopscope/analysis/classify.hpp"
#include "loopscope/analysis/flatten.hpp"
#include "loopscope/analysis/metrics.hpp"
#include "loopscope/analysis/tree.hpp"
#include "loopscope/engine/engine.hpp"
#include "loopscope/failure/timed.hpp"
#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/spec_io.hpp"
#include "loopscope/oracle/rng.hpp"
#include "loopscope/scenario/pack.hpp"
#include "loopscope/session/server.hpp"
#include "loopscope/session/session.hpp"
#include "report.hpp"

namespace fs = std::filesystem;
using namespace loopscope;
using cli::ojson;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInvalid = 2;
constexpr int kInconclusive = 3;

/// Flags shared by the subcommands; each subcommand registers the ones it uses.
struct Common {
  std::string target;  // --spec / --scenario
  std::string limits;
  std::string format = "json";
  std::string out;
  std::string input;
  std::string scenario_dir;
  bool strict = false;
};

struct Usage : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ojson ordered(const nlohmann::json& j) { return ojson::parse(j.dump()); }

fs::path scenario_dir(const Common& c) {
  return c.scenario_dir.empty() ? default_scenario_dir() : fs::path(c.scenario_dir);
}

Limits limits_of(const Common& c, const Limits& fallback = {}) {
  return c.limits.empty() ? fallback : Limits::parse(c.limits);
}

ScenarioEntry target_of(const Common& c) {
  if (c.target.empty()) throw Usage("one of --spec or --scenario is required");
  return resolve_scenario(c.target, scenario_dir(c));
}

/// --input wins over the scenario's own binding.
nlohmann::json input_json_of(const Common& c, const ScenarioEntry& e) {
  if (!c.input.empty()) {
    auto j = nlohmann::json::parse(c.input, nullptr, false);
    if (j.is_discarded()) throw Usage("--input is not valid JSON");
    return j;
  }
  if (!e.input.is_null()) return e.input;
  if (e.machine->inputs().empty()) return nlohmann::json::object();
  throw Usage("machine '" + e.machine->name() + "' has inputs; pass --input");
}

void stamp(ojson& r, const std::string& command, const ScenarioEntry& e, const Limits& limits) {
  r["command"] = command;
  r["scenario"] = e.id;
  r["machine"] = e.machine->name();
  r["spec_hash"] = hash_hex(e.machine->spec_hash());
  r["limits"] = ordered(limits.to_json());
  if (!e.warnings.empty()) r["warnings"] = e.warnings;
}

void emit(const Common& c, const ojson& report, std::string (*md)(const ojson&)) {
  std::string text = c.format == "md" ? md(report) : report.dump(2) + "\n";
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  if (!f) throw Error("cannot write " + c.out);
  f << text;
}

ojson run_json(const Trace& t, const Machine& m, const OracleStrategy* oracle, const Limits& limits,
               const std::optional<ComputationTree>& tree) {
  ojson r;
  r["outcome"] = t.outcome.str();
  if (!t.outcome.reason.empty()) r["reason"] = t.outcome.reason;
  r["steps"] = t.steps;
  r["end_at"] = to_seconds(t.end);
  const auto seg = segment_metrics(t);
  r["segments"] = segment_json(seg);
  r["strip"] = segment_strip(seg.segments);

  std::vector<Answer> answers;
  for (const auto& q : t.queries) answers.push_back(q.answer);
  std::vector<std::size_t> visited;
  std::vector<RealQueryFlags> flags;
  if (tree) {
    visited = tree->follow(answers);
    for (auto n : visited) flags.push_back(tree->real_query(n));
  }
  auto qs = ojson::array();
  for (std::size_t i = 0; i < t.queries.size(); ++i) {
    const auto& q = t.queries[i];
    ojson j;
    j["index"] = q.index;
    j["prompt"] = q.prompt;
    j["answer"] = q.answer.str();
    j["step"] = q.step;
    j["issued_at"] = to_seconds(q.issued_at);
    j["answered_at"] = to_seconds(q.answered_at);
    if (!q.tag.empty()) j["tag"] = q.tag;
    if (q.late) j["late"] = true;
    if (i < flags.size()) {
      j["real"] = flags[i].is_real;
      j["real_conclusive"] = flags[i].conclusive;
    }
    qs.push_back(std::move(j));
  }
  r["queries"] = std::move(qs);
  if (t.outcome.is_halt() && oracle) {
    r["decisive"] = decisive_json(decisive_points(t, m, oracle, limits));
  } else if (!t.outcome.is_halt()) {
    r["notes"] = {"no output: an abort or a limit is not a computational outcome, so no query is decisive"};
  }
  return r;
}

ojson flatten_json(const ScenarioEntry& e, const Limits& limits) {
  auto res = flatten_bounded_queries(e.machine, limits);
  ojson j;
  if (auto* nf = std::get_if<NotFlattenable>(&res)) {
    j["flattenable"] = false;
    j["reason"] = nf->reason;
    j["witness"] = {{"input", ordered(nf->input)},
                    {"path_a", nf->path_a},
                    {"prompt_a", nf->prompt_a},
                    {"path_b", nf->path_b},
                    {"prompt_b", nf->prompt_b}};
    return j;
  }
  const auto& fl = std::get<Flattened>(res);
  j["flattenable"] = true;
  j["questions"] = fl.questions;
  j["mapping"] = fl.mapping ? fl.mapping->describe() : "unchanged";
  j["equal"] = fl.certificate.equal;
  j["cases"] = fl.certificate.cases;
  if (fl.certificate.witness) {
    const auto& w = *fl.certificate.witness;
    j["witness"] = {{"input", ordered(w.input)}, {"tuple", w.tuple}, {"out_a", w.out_a}, {"out_b", w.out_b}};
  }
  return j;
}

OracleStrategy oracle_of(const std::string& answers, const ScenarioEntry& e) {
  if (answers.empty()) {
    if (!e.oracle) throw Usage("scenario '" + e.id + "' binds no oracle; pass --answers");
    return *e.oracle;
  }
  auto list = nlohmann::json::array();
  std::string cur;
  for (char ch : answers + ",") {
    if (ch == ',') {
      list.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return oracle_from_json({{"script", list}}, *e.machine, "--answers");
}

// --- classify ---------------------------------------------------------------

int cmd_classify(const Common& c, bool lenient, bool effective) {
  const auto e = target_of(c);
  if (e.timed) throw Usage("'" + e.id + "' is a timed scenario; use simulate");
  ClassifyOptions opt;
  opt.limits = limits_of(c);
  opt.strict = !lenient;
  ojson r;
  stamp(r, "classify", e, opt.limits);
  bool conclusive;
  if (effective) {
    if (!e.oracle) throw Usage("--effective needs a scenario with an oracle binding");
    const auto v = classify_effective(*e.machine, {*e.oracle}, opt);
    r["class"] = setup_class_name(v.effective.cls);
    r["conclusive"] = v.effective.conclusive;
    r["effective"] = v.to_json(*e.machine);
    conclusive = v.effective.conclusive;
  } else {
    const auto v = classify_setup(*e.machine, opt);
    r["class"] = setup_class_name(v.cls);
    r["conclusive"] = v.conclusive;
    r["evidence"] = v.to_json()["evidence"];
    r["verdict"] = v.to_json();
    conclusive = v.conclusive;
  }
  emit(c, r, cli::verdict_md);
  return c.strict && !conclusive ? kInconclusive : kOk;
}

// --- analyze ----------------------------------------------------------------

int cmd_analyze(const Common& c, const std::string& answers, bool dump_tree) {
  const auto e = target_of(c);
  const auto limits = limits_of(c, e.timed ? e.timed->limits : Limits{});
  const auto& m = *e.machine;
  const auto in_json = input_json_of(c, e);
  const auto input = input_from_json(in_json, m.inputs());
  ojson r;
  stamp(r, "analyze", e, limits);
  r["input"] = ordered(input_from_json(in_json, m.inputs()).empty() ? nlohmann::json::object()
                                                                    : input_to_json(input, m.inputs()));

  std::optional<ComputationTree> tree = build_tree(m, input, limits);
  const auto& root = tree->root();
  ojson t;
  t["nodes"] = tree->nodes.size();
  t["queries"] = tree->count(TreeNode::Kind::Query);
  t["halts"] = tree->count(TreeNode::Kind::Halt);
  t["aborts"] = tree->count(TreeNode::Kind::Abort);
  t["truncated"] = tree->count(TreeNode::Kind::Truncated);
  t["outputs"] = std::vector<std::string>(root.outputs.begin(), root.outputs.end());
  t["unknown"] = root.unknown;
  r["tree"] = std::move(t);

  auto rq = ojson::array();
  for (const auto& f : tree->real_queries()) {
    const auto& n = tree->nodes[f.node];
    ojson q;
    q["node"] = f.node;
    q["depth"] = n.query_depth;
    auto path = ojson::array();
    for (const auto& a : tree->path_to(f.node)) path.push_back(a.str());
    q["path"] = std::move(path);
    q["prompt"] = n.prompt;
    if (!n.tag.empty()) q["tag"] = n.tag;
    q["fork_exists"] = f.fork_exists;
    q["outputs_differ"] = f.outputs_differ;
    q["is_real"] = f.is_real;
    q["conclusive"] = f.conclusive;
    rq.push_back(std::move(q));
  }
  r["real_queries"] = std::move(rq);
  const auto by_depth = real_flags_by_depth(*tree);
  r["real_flags_by_depth"] = std::vector<bool>(by_depth.begin(), by_depth.end());

  ClassifyOptions opt;
  opt.limits = limits;
  const auto v = classify_setup(m, opt);
  r["verdict"] = v.to_json();
  r["flatten"] = flatten_json(e, limits);

  if (!answers.empty() || e.oracle) {
    const auto oracle = oracle_of(answers, e);
    const auto trace = run(m, input, oracle, limits);
    r["run"] = run_json(trace, m, oracle.deterministic ? &oracle : nullptr, limits, tree);
  }
  if (dump_tree) r["tree"]["detail"] = tree_to_json(*tree);
  emit(c, r, cli::analysis_md);
  return c.strict && !v.conclusive ? kInconclusive : kOk;
}

// --- simulate ---------------------------------------------------------------

struct SimulateFlags {
  std::uint64_t seed = 0;
  std::uint64_t trials = 1000;
  unsigned threads = 0;
  bool no_attribution = false;
  std::string records;
  std::string trace_out;
  std::string answers;
};

int cmd_simulate(const Common& c, const SimulateFlags& s) {
  const auto e = target_of(c);
  if (e.timed) {
    auto sc = *e.timed;
    if (!c.limits.empty()) sc.limits = Limits::parse(c.limits);
    if (!c.input.empty()) {
      sc.input_json = input_json_of(c, e);
      sc.input = input_from_json(sc.input_json, sc.machine->inputs());
    }
    MonteCarloOptions opt;
    opt.attribution = !s.no_attribution;
    opt.threads = s.threads;
    auto mc = monte_carlo(sc, s.trials, s.seed, opt);
    ojson r;
    r["command"] = "simulate";
    for (auto it = mc.summary.begin(); it != mc.summary.end(); ++it) r[it.key()] = it.value();
    if (!s.records.empty()) {
      std::ofstream f(s.records, std::ios::binary);
      if (!f) throw Error("cannot write " + s.records);
      f << records_to_jsonl(mc.records);
    }
    if (!s.trace_out.empty()) {
      std::ofstream f(s.trace_out, std::ios::binary);
      if (!f) throw Error("cannot write " + s.trace_out);
      f << trace_to_jsonl(simulate_timed_trace(sc, trial_seed(s.seed, 0)));
    }
    emit(c, r, cli::run_md);
    return kOk;
  }

  const auto limits = limits_of(c);
  const auto& m = *e.machine;
  const auto input = input_from_json(input_json_of(c, e), m.inputs());
  const auto oracle = oracle_of(s.answers, e);
  const auto trace = run(m, input, oracle, limits, {}, s.seed);
  ojson r;
  stamp(r, "simulate", e, limits);
  r["input"] = ordered(trace.input);
  r["oracle"] = oracle.descriptor;
  r["seed"] = s.seed;
  r["run"] = run_json(trace, m, oracle.deterministic ? &oracle : nullptr, limits, build_tree(m, input, limits));
  if (!s.trace_out.empty()) {
    std::ofstream f(s.trace_out, std::ios::binary);
    if (!f) throw Error("cannot write " + s.trace_out);
    f << trace_to_jsonl(trace);
  }
  emit(c, r, cli::run_md);
  return kOk;
}

// --- replay -----------------------------------------------------------------

int cmd_replay(const Common& c, const std::string& file) {
  const auto text = read_text_file(file);
  const auto first = nlohmann::json::parse(text.substr(0, text.find('\n')), nullptr, false);
  if (first.is_discarded() || !first.is_object()) throw SpecError(file, "not a transcript or trace file");

  ojson r;
  Trace trace;
  std::string recorded;
  std::optional<ScenarioEntry> e;
  if (first.contains("dir")) {
    // Session transcript.
    const auto lines = read_transcript(file);
    const auto& header = lines.front()["msg"];
    Common cc = c;
    if (cc.target.empty()) cc.target = header.value("scenario", "");
    e = target_of(cc);
    if (hash_hex(e->machine->spec_hash()) != header.value("spec_hash", ""))
      throw Error("transcript was recorded against a different spec (hash " + header.value("spec_hash", "") + ")");
    trace = trace_from_transcript(lines, *e->machine);
    for (const auto& l : lines) {
      const auto type = l["msg"].value("type", "");
      if (type == "halt") recorded = "halt:" + l["msg"].value("output", "");
      if (type == "abort") recorded = "abort";
    }
    if (recorded.empty()) throw Error("transcript has no outcome: the session did not finish");
    r["kind"] = "transcript";
  } else if (first.value("type", "") == "header") {
    e = target_of(c);
    const auto recorded_trace = trace_from_jsonl(text);
    recorded = recorded_trace.outcome.str();
    trace = replay(recorded_trace, *e->machine);
    r["kind"] = "trace";
  } else {
    throw SpecError(file, "not a transcript or trace file");
  }

  const auto& m = *e->machine;
  r["command"] = "replay";
  r["source"] = fs::path(file).filename().string();
  r["scenario"] = e->id;
  r["machine"] = m.name();
  r["spec_hash"] = hash_hex(m.spec_hash());
  r["limits"] = ordered(trace.limits.to_json());
  r["input"] = ordered(trace.input);
  r["recorded"] = recorded;
  r["match"] = recorded == trace.outcome.str();
  const auto input = input_of(trace, m);
  const auto oracle = replay_oracle(trace);
  r["run"] = run_json(trace, m, &oracle, trace.limits, build_tree(m, input, trace.limits));
  emit(c, r, cli::replay_md);
  return r["match"].get<bool>() ? kOk : kFailed;
}

// --- scenarios --------------------------------------------------------------

int cmd_scenarios(const Common& c, bool verify, const std::vector<std::string>& ids) {
  const auto dir = scenario_dir(c);
  const auto selected = ids.empty() ? list_scenarios(dir) : ids;
  ojson r;
  r["command"] = "scenarios";
  r["dir"] = dir.string();
  if (!verify) {
    auto list = ojson::array();
    for (const auto& id : selected) {
      const auto e = load_scenario(id, dir);
      list.push_back({{"id", e.id},
                      {"kind", scenario_kind_name(e.kind)},
                      {"title", e.title},
                      {"machine", e.machine->name()},
                      {"spec_hash", hash_hex(e.machine->spec_hash())},
                      {"golden_keys", e.golden["expected"].size()}});
    }
    r["scenarios"] = std::move(list);
    emit(c, r, [](const ojson& j) {
      std::string out = "| id | kind | title |\n|---|---|---|\n";
      for (const auto& s : j["scenarios"])
        out += fmt::format("| {} | {} | {} |\n", s["id"].get<std::string>(), s["kind"].get<std::string>(),
                           s["title"].get<std::string>());
      return out;
    });
    return kOk;
  }
  bool all = true;
  auto results = ojson::array();
  for (const auto& id : selected) {
    const auto g = verify_golden(id, dir);
    all = all && g.pass;
    results.push_back(g.to_json());
  }
  r["pass"] = all;
  r["results"] = std::move(results);
  emit(c, r, cli::golden_md);
  return all ? kOk : kFailed;
}

// --- serve ------------------------------------------------------------------

int cmd_serve(const Common& c, const std::optional<std::string>& addr, const std::string& transcripts,
              unsigned io_threads) {
  SessionOptions opt;
  opt.transcript_dir = transcripts;
  opt.scenario_dir = scenario_dir(c);
  opt.limits = limits_of(c);
  fs::create_directories(opt.transcript_dir);
  SessionManager manager(opt);
  Server server(manager, resolve_endpoint(addr), io_threads);
  server.start();
  std::cerr << fmt::format("loopscope: serving sessions on {}:{} (transcripts in {})\n",
                           resolve_endpoint(addr).host, server.port(), opt.transcript_dir.string());
  server.wait(true);
  server.stop();
  return kOk;
}

void add_target(CLI::App* sub, Common& c) {
  auto* spec = sub->add_option("--spec", c.target, "Machine spec or scenario file, or a scenario id");
  sub->add_option("--scenario", c.target, "Scenario id or file")->excludes(spec);
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--limits", c.limits, "steps,tree-nodes,queries (empty fields keep defaults)");
  sub->add_option("--format", c.format, "json or md")->check(CLI::IsMember({"json", "md"}));
  sub->add_option("--out", c.out, "Write the report here instead of stdout");
  sub->add_option("--scenario-dir", c.scenario_dir, "Scenario pack directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"loopscope: human-in-the-loop machines, analysed and simulated"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "loopscope 1.0.0");

  Common c;
  bool lenient = false;
  bool effective = false;
  bool dump_tree = false;
  SimulateFlags sim;
  std::string replay_file;
  bool verify = false;
  std::vector<std::string> ids;
  std::optional<std::string> addr;
  std::string transcripts = "transcripts";
  unsigned io_threads = 2;

  auto* classify = app.add_subcommand("classify", "Classify the setup of a machine");
  add_target(classify, c);
  add_common(classify, c);
  classify->add_flag("--strict", c.strict, "Exit 3 when the verdict is inconclusive");
  classify->add_flag("--lenient-endpoint", lenient, "Allow computation after the endpoint answer");
  classify->add_flag("--effective", effective, "Classify together with the scenario's bound oracle");

  auto* analyze = app.add_subcommand("analyze", "Computation tree, real queries, flattening and a sample run");
  add_target(analyze, c);
  add_common(analyze, c);
  analyze->add_option("--input", c.input, "Input as a JSON object");
  analyze->add_option("--answers", sim.answers, "Comma-separated answers for the sample run ('!' is stop)");
  analyze->add_flag("--strict", c.strict, "Exit 3 when the verdict is inconclusive");
  analyze->add_flag("--tree", dump_tree, "Include every tree node");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo over a timed scenario, or one run of a fixture");
  add_target(simulate, c);
  add_common(simulate, c);
  simulate->add_option("--input", c.input, "Input as a JSON object");
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--trials", sim.trials, "Number of trials")->check(CLI::PositiveNumber);
  simulate->add_option("--threads", sim.threads, "Worker threads (0: all cores)");
  simulate->add_flag("--no-attribution", sim.no_attribution, "Skip per-trial ablation");
  simulate->add_option("--records", sim.records, "Write one JSON line per trial");
  simulate->add_option("--trace", sim.trace_out, "Write the trace of the first trial (or the run) as JSON lines");
  simulate->add_option("--answers", sim.answers, "Comma-separated answers for a fixture run ('!' is stop)");

  auto* serve = app.add_subcommand("serve", "Serve live sessions (NDJSON and WebSocket on one port)");
  add_common(serve, c);
  serve->add_option("--addr", addr, "host:port (default: LOOPSCOPE_ADDR or 127.0.0.1:7878)");
  serve->add_option("--transcripts", transcripts, "Directory for session transcripts");
  serve->add_option("--io-threads", io_threads, "Network threads")->check(CLI::PositiveNumber);

  auto* replay_cmd = app.add_subcommand("replay", "Re-derive a run from a session transcript or a trace file");
  replay_cmd->add_option("file", replay_file, "Transcript (.jsonl) or trace file")->required()->check(CLI::ExistingFile);
  add_target(replay_cmd, c);
  add_common(replay_cmd, c);

  auto* scenarios = app.add_subcommand("scenarios", "List the scenario pack or verify its golden values");
  scenarios->add_option("ids", ids, "Scenario ids (default: all)");
  scenarios->add_flag("--verify", verify, "Recompute and compare every golden value");
  add_common(scenarios, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInvalid;
  }

  try {
    if (*classify) return cmd_classify(c, lenient, effective);
    if (*analyze) return cmd_analyze(c, sim.answers, dump_tree);
    if (*simulate) return cmd_simulate(c, sim);
    if (*serve) return cmd_serve(c, addr, transcripts, io_threads);
    if (*replay_cmd) return cmd_replay(c, replay_file);
    if (*scenarios) return cmd_scenarios(c, verify, ids);
  } catch (const Usage& e) {
    std::cerr << "loopscope: " << e.what() << "\n";
    return kInvalid;
  } catch (const SpecError& e) {
    std::cerr << "loopscope: invalid spec: " << e.what() << "\n";
    return kInvalid;
  } catch (const DomainError& e) {
    std::cerr << "loopscope: " << e.what() << "\n";
    return kInvalid;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "loopscope: bad JSON: " << e.what() << "\n";
    return kInvalid;
  } catch (const MachineError& e) {
    std::cerr << "loopscope: machine error: " << e.what() << "\n";
    return kFailed;
  } catch (const Error& e) {
    std::cerr << "loopscope: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "loopscope: " << e.what() << "\n";
    return kFailed;
  }
  return kOk;
}
