#include "loopscope/analysis/classify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>

namespace loopscope {

const char* setup_class_name(SetupClass c) {
  switch (c) {
    case SetupClass::HOOTL:
      return "HOOTL";
    case SetupClass::TrivialMonitoring:
      return "TrivialMonitoring";
    case SetupClass::EndpointAction:
      return "EndpointAction";
    case SetupClass::InvolvedInteraction:
      return "InvolvedInteraction";
    case SetupClass::Intermediate:
      return "Intermediate";
  }
  return "?";
}

std::optional<SetupClass> setup_class_from_name(std::string_view name) {
  for (auto c : {SetupClass::HOOTL, SetupClass::TrivialMonitoring, SetupClass::EndpointAction,
                 SetupClass::InvolvedInteraction, SetupClass::Intermediate}) {
    if (name == setup_class_name(c)) return c;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> path_strings(const ComputationTree& tree, std::size_t node) {
  std::vector<std::string> out;
  for (const auto& a : tree.path_to(node)) out.push_back(a.str());
  return out;
}

struct TreeFacts {
  bool has_query = false;
  bool has_real = false;
  std::optional<std::size_t> involved_at;  // node reached after the second real query
  bool endpoint_ok = true;
  bool post_processed = false;  // one last real query per path, but output is not the bare answer
  std::string endpoint_failure;
  std::optional<std::size_t> endpoint_query;
  bool single_output = false;
  std::uint64_t min_real = UINT64_MAX;
  std::uint64_t max_real = 0;
  std::size_t real_nodes = 0;
};

TreeFacts examine(const ComputationTree& tree, bool strict) {
  TreeFacts f;
  std::vector<char> real(tree.nodes.size(), 0);
  for (const auto& q : tree.real_queries()) {
    f.has_query = true;
    if (q.is_real) {
      real[q.node] = 1;
      f.has_real = true;
      ++f.real_nodes;
    }
  }
  const auto& root = tree.root();
  f.single_output = !root.unknown && root.outputs.size() == 1;

  // Depth-first over paths carrying the number of real queries so far and
  // the last real query node.
  struct Frame {
    std::size_t node;
    std::uint64_t reals;
    std::size_t last_real;
    bool query_after_real;
  };
  std::vector<Frame> stack{{0, 0, SIZE_MAX, false}};
  while (!stack.empty()) {
    const Frame fr = stack.back();
    stack.pop_back();
    const auto& n = tree.nodes[fr.node];
    f.max_real = std::max(f.max_real, fr.reals);
    if (fr.reals >= 2 && !f.involved_at) f.involved_at = fr.node;
    if (n.kind == TreeNode::Kind::Query) {
      const bool r = real[fr.node];
      for (auto c : n.children) {
        stack.push_back({c, fr.reals + (r ? 1 : 0), r ? fr.node : fr.last_real,
                         r ? false : (fr.last_real != SIZE_MAX)});
      }
      continue;
    }
    if (n.kind == TreeNode::Kind::Truncated) {
      if (f.endpoint_ok) f.endpoint_failure = "truncated path";
      f.endpoint_ok = false;
      continue;
    }
    if (n.kind != TreeNode::Kind::Halt) continue;
    f.min_real = std::min(f.min_real, fr.reals);
    if (!f.endpoint_ok) continue;
    if (fr.reals != 1) {
      f.endpoint_ok = false;
      f.endpoint_failure = fmt::format("a halting path has {} real queries", fr.reals);
      continue;
    }
    if (fr.query_after_real || n.parent != fr.last_real) {
      f.endpoint_ok = false;
      f.endpoint_failure = "the real query is not the last oracle call";
      continue;
    }
    const auto& q = tree.nodes[fr.last_real];
    f.endpoint_query = fr.last_real;
    for (auto c : q.children) {
      const auto& ch = tree.nodes[c];
      if (ch.via.is_stop()) continue;
      const bool direct = ch.kind == TreeNode::Kind::Halt && ch.output == ch.via.word();
      const bool immediate = !strict || ch.step_depth == q.step_depth;
      if (!direct || !immediate) {
        f.endpoint_ok = false;
        f.post_processed = true;
        f.endpoint_failure = direct ? "steps taken between the answer and the halt (strict mode)"
                                    : "the output is not the answer itself";
        break;
      }
    }
  }
  if (f.min_real == UINT64_MAX) f.min_real = 0;
  return f;
}

}  // namespace

SetupVerdict classify_trees(const Machine& machine, const std::vector<ComputationTree>& trees,
                            const ClassifyOptions& options) {
  SetupVerdict v;
  v.strict = options.strict;
  v.spec_hash = machine.spec_hash();
  v.limits = options.limits;
  v.machine = machine.name();

  bool any_query = false;
  bool any_real = false;
  bool all_endpoint = !trees.empty();
  bool all_single = true;
  bool any_truncated = false;
  bool any_post = false;
  std::vector<Evidence> involved, endpoint, trivial, odd;
  std::vector<std::string> endpoint_failures;

  for (const auto& tree : trees) {
    const auto f = examine(tree, options.strict);
    any_query = any_query || f.has_query;
    any_real = any_real || f.has_real;
    any_truncated = any_truncated || tree.truncated;
    v.abort_reachable = v.abort_reachable || tree.count(TreeNode::Kind::Abort) > 0;
    if (!f.single_output) all_single = false;

    CensusRow row;
    row.input = tree.input_json;
    row.min_real = f.min_real;
    row.max_real = f.max_real;
    row.outputs.assign(tree.root().outputs.begin(), tree.root().outputs.end());
    row.unknown = tree.root().unknown;
    row.query_nodes = tree.count(TreeNode::Kind::Query);
    row.real_nodes = f.real_nodes;
    v.census.push_back(std::move(row));

    if (f.involved_at) {
      involved.push_back({tree.input_json, path_strings(tree, *f.involved_at),
                          "path with two or more real queries"});
    }
    if (f.endpoint_ok && f.endpoint_query) {
      endpoint.push_back({tree.input_json, path_strings(tree, *f.endpoint_query),
                          fmt::format("single real query '{}' is the last oracle call and its answer is the output",
                                      tree.nodes[*f.endpoint_query].prompt)});
    } else {
      all_endpoint = false;
      any_post = any_post || f.post_processed;
      if (!f.endpoint_failure.empty()) endpoint_failures.push_back(f.endpoint_failure);
    }
    if (f.single_output) {
      trivial.push_back({tree.input_json, {}, fmt::format("output '{}' whatever the answers", *tree.root().outputs.begin())});
    } else {
      odd.push_back({tree.input_json, {},
                     tree.root().unknown ? "output set unknown (truncated)"
                                         : fmt::format("{} possible outputs", tree.root().outputs.size())});
    }
  }

  if (!involved.empty()) {
    v.cls = SetupClass::InvolvedInteraction;
    v.evidence = std::move(involved);
    v.conclusive = true;  // real flags are only set when certain
  } else if (all_endpoint && any_query) {
    v.cls = SetupClass::EndpointAction;
    v.evidence = std::move(endpoint);
  } else if (any_query && !any_real && all_single) {
    v.cls = SetupClass::TrivialMonitoring;
    v.evidence = std::move(trivial);
  } else if (!any_query) {
    v.cls = SetupClass::HOOTL;
    v.notes.push_back("no query is reachable on any input");
  } else {
    v.cls = SetupClass::Intermediate;
    if (any_post) v.notes.push_back("one real query per path whose answer is post-processed before the output");
    for (const auto& s : endpoint_failures) {
      if (std::find(v.notes.begin(), v.notes.end(), s) == v.notes.end()) v.notes.push_back(s);
    }
    if (!any_real) v.notes.push_back("no real query, but some input has no single output");
    v.evidence = odd.empty() ? std::move(endpoint) : std::move(odd);
    if (v.evidence.empty()) {
      for (const auto& row : v.census)
        v.evidence.push_back({row.input, {}, fmt::format("real queries per path {}..{}", row.min_real, row.max_real)});
    }
  }
  if (v.cls != SetupClass::InvolvedInteraction) v.conclusive = !any_truncated;
  if (any_truncated)
    v.notes.push_back(v.conclusive ? "some trees were truncated; the witness does not depend on the cut parts"
                                   : "some trees were truncated; the verdict may change with larger limits");
  v.notes.push_back(fmt::format("endpoint check in {} mode", options.strict ? "strict" : "lenient"));
  v.notes.push_back(fmt::format("scope: alphabet of {} symbols, answers up to length {}", machine.alphabet().size(),
                                machine.max_answer_len()));
  return v;
}

SetupVerdict classify_setup(const Machine& machine, const ClassifyOptions& options) {
  std::vector<ComputationTree> trees;
  for (const auto& input : enumerate_inputs(machine.inputs()))
    trees.push_back(build_tree(machine, input, options.limits));
  return classify_trees(machine, trees, options);
}

EffectiveVerdict classify_effective(const Machine& machine, const std::vector<OracleStrategy>& family,
                                    const ClassifyOptions& options) {
  EffectiveVerdict ev;
  ev.standalone = classify_setup(machine, options);
  for (const auto& o : family) {
    ev.oracles.push_back(o.descriptor);
    ev.tables.push_back(effective_function(machine, o, options.limits));
  }
  ev.total = !ev.tables.empty() && std::all_of(ev.tables.begin(), ev.tables.end(),
                                               [](const EffectiveTable& t) { return t.all_halt && !t.partial; });
  bool all_abort = !ev.tables.empty();
  bool partial = false;
  std::optional<Evidence> varying;
  ev.single_valued = ev.total;
  const std::size_t rows = ev.tables.empty() ? 0 : ev.tables.front().rows.size();
  for (std::size_t r = 0; r < rows; ++r) {
    std::set<std::string> outs;
    for (const auto& t : ev.tables) {
      outs.insert(t.rows[r].outcome.str());
      if (t.rows[r].outcome.kind != OutcomeKind::Abort) all_abort = false;
      if (t.rows[r].outcome.kind == OutcomeKind::StepLimit) partial = true;
    }
    if (outs.size() > 1) {
      ev.single_valued = false;
      if (!varying) {
        varying = Evidence{input_to_json(ev.tables.front().rows[r].input, machine.inputs()),
                           std::vector<std::string>(outs.begin(), outs.end()),
                           "different outcomes across the oracle family"};
      }
    }
  }

  SetupVerdict e;
  e.strict = options.strict;
  e.spec_hash = machine.spec_hash();
  e.limits = options.limits;
  e.machine = machine.name();
  e.abort_reachable = ev.standalone.abort_reachable;
  if (ev.total && ev.single_valued) {
    e.cls = SetupClass::TrivialMonitoring;
    e.conclusive = true;
    for (const auto& row : ev.tables.front().rows) {
      e.evidence.push_back({input_to_json(row.input, machine.inputs()), {},
                            fmt::format("composed output '{}'", row.outcome.output)});
    }
    e.notes.push_back("the composed system computes a total function of the input alone");
  } else if (all_abort) {
    e.cls = SetupClass::Intermediate;
    e.conclusive = false;
    e.notes.push_back("degenerate composition: every run aborted, no output");
  } else {
    e.cls = ev.standalone.cls;
    e.conclusive = ev.standalone.conclusive && !partial;
    e.evidence = ev.standalone.evidence;
    if (varying) e.evidence.insert(e.evidence.begin(), *varying);
    e.notes.push_back(ev.total ? "composed table varies across the oracle family"
                               : "composed table is not total (abort or limit on some input)");
  }
  e.notes.push_back(fmt::format("standalone class {}", setup_class_name(ev.standalone.cls)));
  ev.effective = std::move(e);
  return ev;
}

namespace {

nlohmann::ordered_json evidence_json(const Evidence& e) {
  nlohmann::ordered_json j;
  j["input"] = e.input;
  j["path"] = e.path;
  j["note"] = e.note;
  return j;
}

}  // namespace

nlohmann::ordered_json SetupVerdict::to_json() const {
  nlohmann::ordered_json j;
  j["class"] = setup_class_name(cls);
  j["conclusive"] = conclusive;
  auto ev = nlohmann::ordered_json::array();
  for (const auto& e : evidence) ev.push_back(evidence_json(e));
  j["evidence"] = std::move(ev);
  j["mode"] = strict ? "strict" : "lenient";
  j["abort_reachable"] = abort_reachable;
  auto census_j = nlohmann::ordered_json::array();
  for (const auto& r : census) {
    nlohmann::ordered_json c;
    c["input"] = r.input;
    c["min_real"] = r.min_real;
    c["max_real"] = r.max_real;
    c["outputs"] = r.outputs;
    c["unknown"] = r.unknown;
    c["query_nodes"] = r.query_nodes;
    c["real_nodes"] = r.real_nodes;
    census_j.push_back(std::move(c));
  }
  j["census"] = std::move(census_j);
  j["notes"] = notes;
  j["machine"] = machine;
  j["spec_hash"] = hash_hex(spec_hash);
  j["limits"] = limits.to_json();
  return j;
}

nlohmann::ordered_json EffectiveVerdict::to_json(const Machine& machine) const {
  nlohmann::ordered_json j;
  j["standalone"] = standalone.to_json();
  j["effective"] = effective.to_json();
  j["oracles"] = oracles;
  j["total"] = total;
  j["single_valued"] = single_valued;
  auto tabs = nlohmann::ordered_json::array();
  for (const auto& t : tables) {
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : t.rows) {
      nlohmann::ordered_json row;
      row["input"] = input_to_json(r.input, machine.inputs());
      row["outcome"] = r.outcome.str();
      rows.push_back(std::move(row));
    }
    tabs.push_back(std::move(rows));
  }
  j["tables"] = std::move(tabs);
  return j;
}

}  // namespace loopscope
