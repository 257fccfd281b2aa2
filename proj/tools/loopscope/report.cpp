#include "report.hpp"

#include <fmt/format.h>

#include "loopscope/failure/timed.hpp"

namespace loopscope::cli {

namespace {

std::string str(const ojson& j) { return j.is_string() ? j.get<std::string>() : j.dump(); }

std::string path_text(const ojson& path) {
  if (!path.is_array() || path.empty()) return "(root)";
  std::string out;
  for (const auto& a : path) {
    if (!out.empty()) out += " ";
    out += str(a).empty() ? "ε" : "`" + str(a) + "`";
  }
  return out;
}

void header(std::string& out, const ojson& r) {
  out += fmt::format("- machine: `{}`\n- spec_hash: `{}`\n", str(r["machine"]), str(r["spec_hash"]));
  const auto& l = r["limits"];
  out += fmt::format("- limits: steps {}, tree nodes {}, queries {}\n", l["max_steps"].dump(),
                     l["max_tree_nodes"].dump(), l["max_queries"].dump());
}

void verdict_body(std::string& out, const ojson& v) {
  out += fmt::format("**{}** ({}, {} endpoint rule)\n\n", str(v["class"]),
                     v["conclusive"].get<bool>() ? "conclusive" : "inconclusive", str(v["mode"]));
  if (!v["evidence"].empty()) {
    out += "Witnesses:\n\n";
    for (const auto& e : v["evidence"])
      out += fmt::format("- input `{}`, answers {}: {}\n", e["input"].dump(), path_text(e["path"]), str(e["note"]));
    out += "\n";
  }
  if (!v["census"].empty()) {
    out += "| input | real queries (min..max) | outputs | truncated |\n|---|---|---|---|\n";
    for (const auto& c : v["census"]) {
      std::string outs;
      for (const auto& o : c["outputs"]) outs += (outs.empty() ? "`" : ", `") + str(o) + "`";
      out += fmt::format("| `{}` | {}..{} | {} | {} |\n", c["input"].dump(), c["min_real"].dump(), c["max_real"].dump(),
                         outs.empty() ? "none" : outs, c["unknown"].get<bool>() ? "yes" : "no");
    }
    out += "\n";
  }
  for (const auto& n : v["notes"]) out += "> " + str(n) + "\n";
  if (!v["notes"].empty()) out += "\n";
}

void run_body(std::string& out, const ojson& run) {
  out += fmt::format("Outcome: `{}`\n\n", str(run["outcome"]));
  out += fmt::format("Segments: `{}`\n\n", str(run["strip"]));
  const auto& segs = run["segments"]["segments"];
  const auto& qs = run["queries"];
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto& q = qs[i];
    std::string real = "-";
    if (q.contains("real")) real = q["real"].get<bool>() ? "real" : "not real";
    out += fmt::format("- segment {} steps, then query {} `{}` answered `{}` ({})\n", segs[i].dump(), i,
                       str(q["prompt"]), str(q["answer"]), real);
  }
  if (!segs.empty()) out += fmt::format("- segment {} steps, then {}\n", segs.back().dump(), str(run["outcome"]));
  out += "\n";
  if (run.contains("decisive")) {
    const auto& d = run["decisive"];
    out += fmt::format("Decisive queries: {}\n", d["decisive"].empty() ? "none" : d["decisive"].dump());
    if (!d["counterfactual_only"].empty())
      out += fmt::format("Outcome-changing but not real: {}\n", d["counterfactual_only"].dump());
    out += "\n";
  }
  if (run.contains("notes"))
    for (const auto& n : run["notes"]) out += "> " + str(n) + "\n";
}

}  // namespace

std::string verdict_md(const ojson& r) {
  std::string out = fmt::format("# Setup verdict: {}\n\n", str(r["scenario"]));
  header(out, r);
  out += "\n";
  if (r.contains("effective")) {
    const auto& e = r["effective"];
    out += "## Machine alone\n\n";
    verdict_body(out, e["standalone"]);
    out += "## With the bound human\n\n";
    verdict_body(out, e["effective"]);
    out += fmt::format("Total: {}. Single-valued: {}.\n", e["total"].get<bool>() ? "yes" : "no",
                       e["single_valued"].get<bool>() ? "yes" : "no");
  } else {
    verdict_body(out, r["verdict"]);
  }
  return out;
}

std::string analysis_md(const ojson& r) {
  std::string out = fmt::format("# Analysis: {}\n\n", str(r["scenario"]));
  header(out, r);
  out += fmt::format("- input: `{}`\n\n", r["input"].dump());
  const auto& t = r["tree"];
  out += fmt::format("## Computation tree\n\n{} nodes: {} queries, {} halts, {} aborts, {} truncated.\n\n",
                     t["nodes"].dump(), t["queries"].dump(), t["halts"].dump(), t["aborts"].dump(),
                     t["truncated"].dump());
  std::string outs;
  for (const auto& o : t["outputs"]) outs += (outs.empty() ? "`" : ", `") + str(o) + "`";
  out += fmt::format("Outputs: {}\n\n", outs.empty() ? "none" : outs);
  if (!r["real_queries"].empty()) {
    out += "| depth | answers so far | prompt | fork | outputs differ | real |\n|---|---|---|---|---|---|\n";
    for (const auto& q : r["real_queries"]) {
      std::string real = q["is_real"].get<bool>() ? "yes" : "no";
      if (!q["conclusive"].get<bool>()) real += " (unknown below)";
      out += fmt::format("| {} | {} | `{}` | {} | {} | {} |\n", q["depth"].dump(), path_text(q["path"]),
                         str(q["prompt"]), q["fork_exists"].get<bool>() ? "yes" : "no",
                         q["outputs_differ"].get<bool>() ? "yes" : "no", real);
    }
    out += "\n";
  }
  out += "## Verdict\n\n";
  verdict_body(out, r["verdict"]);
  const auto& f = r["flatten"];
  out += "## Flattening\n\n";
  if (f["flattenable"].get<bool>())
    out += fmt::format("{} question(s) fold into one query; equal over {} cases: {}.\n\n", f["questions"].dump(),
                       f["cases"].dump(), f["equal"].get<bool>() ? "yes" : "no");
  else
    out += fmt::format("Not flattenable: {}.\n\n", str(f["reason"]));
  if (r.contains("run")) {
    out += "## Run with the bound oracle\n\n";
    run_body(out, r["run"]);
  }
  return out;
}

std::string run_md(const ojson& r) {
  if (r.contains("outcomes")) return summary_markdown(r);
  std::string out = fmt::format("# Run: {}\n\n", str(r["scenario"]));
  header(out, r);
  out += fmt::format("- input: `{}`\n- oracle: {}\n\n", r["input"].dump(), str(r["oracle"]));
  run_body(out, r["run"]);
  return out;
}

std::string replay_md(const ojson& r) {
  std::string out = fmt::format("# Replay: {}\n\n", str(r["source"]));
  header(out, r);
  out += fmt::format("- recorded outcome: `{}`\n- replayed outcome: `{}`\n- match: {}\n\n", str(r["recorded"]),
                     str(r["run"]["outcome"]), r["match"].get<bool>() ? "yes" : "no");
  run_body(out, r["run"]);
  return out;
}

std::string golden_md(const ojson& r) {
  std::string out = "# Golden suite\n\n| scenario | keys | result |\n|---|---|---|\n";
  for (const auto& g : r["results"]) {
    out += fmt::format("| {} | {} | {} |\n", str(g["id"]), g["checked"].dump(), g["pass"].get<bool>() ? "pass" : "FAIL");
  }
  out += "\n";
  for (const auto& g : r["results"]) {
    for (const auto& d : g["diff"])
      out += fmt::format("- {}: `{}` expected {}, got {}\n", str(g["id"]), str(d["field"]), d["expected"].dump(),
                         d["actual"].dump());
  }
  return out;
}

}  // namespace loopscope::cli
