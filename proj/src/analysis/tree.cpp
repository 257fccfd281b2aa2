#include "loopscope/analysis/tree.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <map>

#include "loopscope/oracle/oracle.hpp"

namespace loopscope {

namespace {

struct Pending {
  std::size_t node;
  Configuration config;
};

}  // namespace

ComputationTree build_tree(const Machine& machine, const Input& input, const Limits& limits) {
  limits.validate();
  ComputationTree tree;
  tree.input = input;
  tree.input_json = input_to_json(input, machine.inputs());
  tree.spec_hash = machine.spec_hash();
  tree.limits = limits;
  const auto answers = enumeration_answers(machine.alphabet(), machine.max_answer_len());

  std::deque<Pending> queue;
  tree.nodes.emplace_back();
  queue.push_back({0, machine.initial(input)});

  while (!queue.empty()) {
    Pending p = std::move(queue.front());
    queue.pop_front();
    auto& c = p.config;
    // Run the deterministic segment up to the next query or leaf.
    StepEffect eff;
    while (true) {
      eff = machine.step(c);
      if (auto* cont = std::get_if<Continue>(&eff)) {
        if (c.steps >= limits.max_steps) break;
        c = std::move(cont->next);
        continue;
      }
      break;
    }
    TreeNode& n = tree.nodes[p.node];
    n.step_depth = c.steps;
    n.query_depth = c.queries;
    if (std::holds_alternative<Continue>(eff)) {
      n.kind = TreeNode::Kind::Truncated;
      n.truncation = "max_steps";
      tree.truncated = true;
    } else if (auto* h = std::get_if<Halt>(&eff)) {
      n.kind = TreeNode::Kind::Halt;
      n.output = h->output;
    } else if (std::holds_alternative<Abort>(eff)) {
      n.kind = TreeNode::Kind::Abort;
    } else {
      auto& q = std::get<Query>(eff);
      if (c.queries >= limits.max_queries) {
        n.kind = TreeNode::Kind::Truncated;
        n.truncation = "max_queries";
        tree.truncated = true;
        continue;
      }
      if (tree.nodes.size() + answers.size() > limits.max_tree_nodes) {
        n.kind = TreeNode::Kind::Truncated;
        n.truncation = "max_tree_nodes";
        tree.truncated = true;
        continue;
      }
      n.kind = TreeNode::Kind::Query;
      n.prompt = q.prompt;
      n.tag = q.tag;
      const auto parent_steps = c.steps;
      const auto parent_queries = c.queries;
      for (const auto& a : answers) {
        const std::size_t child = tree.nodes.size();
        tree.nodes[p.node].children.push_back(child);
        TreeNode leaf;
        leaf.parent = p.node;
        leaf.via = a;
        leaf.step_depth = parent_steps;
        leaf.query_depth = parent_queries + 1;
        StepEffect r = machine.resume(q.at, a);
        if (std::holds_alternative<Abort>(r)) {
          leaf.kind = TreeNode::Kind::Abort;
          leaf.query_depth = parent_queries;
          tree.nodes.push_back(std::move(leaf));
        } else {
          tree.nodes.push_back(std::move(leaf));
          queue.push_back({child, std::move(std::get<Continue>(r).next)});
        }
      }
    }
  }
  tree.recompute();
  return tree;
}

void ComputationTree::recompute() {
  std::map<std::string, std::uint64_t> ids;
  std::uint64_t fresh = 0;
  auto intern = [&](const std::string& key) {
    auto [it, inserted] = ids.emplace(key, fresh);
    if (inserted) ++fresh;
    return it->second;
  };
  // Children always have larger indices than their parents.
  for (std::size_t i = nodes.size(); i-- > 0;) {
    auto& n = nodes[i];
    n.outputs.clear();
    n.unknown = false;
    n.abort_only = false;
    switch (n.kind) {
      case TreeNode::Kind::Halt:
        n.outputs.insert(n.output);
        n.canon = intern(fmt::format("H{}|{}", n.step_depth, n.output));
        break;
      case TreeNode::Kind::Abort:
        n.abort_only = true;
        n.canon = intern("A");
        break;
      case TreeNode::Kind::Truncated:
        n.unknown = true;
        n.canon = intern(fmt::format("T{}", i));  // never equal to another subtree
        break;
      case TreeNode::Kind::Query: {
        n.abort_only = true;
        std::string key = fmt::format("Q{}|{}|", n.step_depth, n.prompt);
        for (auto c : n.children) {
          const auto& ch = nodes[c];
          n.outputs.insert(ch.outputs.begin(), ch.outputs.end());
          n.unknown = n.unknown || ch.unknown;
          n.abort_only = n.abort_only && ch.abort_only;
          key += fmt::format("{}={};", ch.via.str(), ch.canon);
        }
        n.canon = intern(key);
        break;
      }
    }
  }
}

std::size_t ComputationTree::graft_abort_branch(std::size_t query_node, Answer label, std::size_t depth) {
  std::size_t attach = query_node;
  Answer via = std::move(label);
  std::size_t first = SIZE_MAX;
  for (std::size_t d = 0; d <= depth; ++d) {
    TreeNode n;
    n.parent = attach;
    n.via = via;
    n.step_depth = nodes[attach].step_depth;
    n.query_depth = nodes[attach].query_depth + 1;
    n.kind = d == depth ? TreeNode::Kind::Abort : TreeNode::Kind::Query;
    n.prompt = fmt::format("graft{}", d);
    const auto idx = nodes.size();
    nodes.push_back(std::move(n));
    nodes[attach].children.push_back(idx);
    if (first == SIZE_MAX) first = idx;
    attach = idx;
    via = Answer::stop();
  }
  recompute();
  return first;
}

bool sets_definitely_differ(const TreeNode& a, const TreeNode& b) {
  auto escapes = [](const TreeNode& exact, const TreeNode& other) {
    return std::any_of(other.outputs.begin(), other.outputs.end(),
                       [&](const Word& w) { return !exact.outputs.count(w); });
  };
  if (!a.unknown && !b.unknown) return a.outputs != b.outputs;
  if (!a.unknown) return escapes(a, b);
  if (!b.unknown) return escapes(b, a);
  return false;
}

RealQueryFlags ComputationTree::real_query(std::size_t node) const {
  RealQueryFlags f;
  f.node = node;
  const auto& n = nodes.at(node);
  std::vector<const TreeNode*> live;
  for (auto c : n.children) {
    const auto& ch = nodes[c];
    if (ch.via.is_stop() || ch.abort_only) continue;
    live.push_back(&ch);
  }
  bool maybe_differ = false;
  for (std::size_t i = 0; i < live.size(); ++i) {
    for (std::size_t j = i + 1; j < live.size(); ++j) {
      if (live[i]->canon != live[j]->canon) f.fork_exists = true;
      if (sets_definitely_differ(*live[i], *live[j])) f.outputs_differ = true;
      if (live[i]->unknown || live[j]->unknown) maybe_differ = true;
    }
  }
  f.is_real = f.fork_exists && f.outputs_differ;
  f.conclusive = f.is_real || !(maybe_differ || n.unknown);
  return f;
}

std::vector<RealQueryFlags> ComputationTree::real_queries() const {
  std::vector<RealQueryFlags> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == TreeNode::Kind::Query) out.push_back(real_query(i));
  }
  return out;
}

std::vector<Answer> ComputationTree::path_to(std::size_t node) const {
  std::vector<Answer> out;
  for (std::size_t i = node; i != 0 && i != SIZE_MAX; i = nodes[i].parent) out.push_back(nodes[i].via);
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> ComputationTree::follow(const std::vector<Answer>& answers) const {
  std::vector<std::size_t> out;
  std::size_t cur = 0;
  for (const auto& a : answers) {
    if (nodes[cur].kind != TreeNode::Kind::Query) break;
    out.push_back(cur);
    auto it = std::find_if(nodes[cur].children.begin(), nodes[cur].children.end(),
                           [&](std::size_t c) { return nodes[c].via == a; });
    if (it == nodes[cur].children.end()) return out;
    cur = *it;
  }
  if (out.size() < answers.size() && nodes[cur].kind == TreeNode::Kind::Query) out.push_back(cur);
  return out;
}

std::size_t ComputationTree::count(TreeNode::Kind k) const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [k](const TreeNode& n) { return n.kind == k; }));
}

std::vector<bool> real_flags_by_depth(const ComputationTree& tree) {
  std::vector<bool> out;
  for (const auto& f : tree.real_queries()) {
    const auto d = tree.nodes[f.node].query_depth;
    if (out.size() <= d) out.resize(d + 1, false);
    if (f.is_real) out[d] = true;
  }
  return out;
}

namespace {

const char* kind_name(TreeNode::Kind k) {
  switch (k) {
    case TreeNode::Kind::Query:
      return "query";
    case TreeNode::Kind::Halt:
      return "halt";
    case TreeNode::Kind::Abort:
      return "abort";
    case TreeNode::Kind::Truncated:
      return "truncated";
  }
  return "?";
}

}  // namespace

nlohmann::ordered_json tree_to_json(const ComputationTree& tree) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& n = tree.nodes[i];
    nlohmann::ordered_json j;
    j["id"] = i;
    j["kind"] = kind_name(n.kind);
    if (i != 0) {
      j["parent"] = n.parent;
      j["via"] = n.via.str();
    }
    j["step_depth"] = n.step_depth;
    if (n.kind == TreeNode::Kind::Query) {
      j["prompt"] = n.prompt;
      j["children"] = n.children;
    }
    if (n.kind == TreeNode::Kind::Halt) j["output"] = n.output;
    if (n.kind == TreeNode::Kind::Truncated) j["limit"] = n.truncation;
    j["outputs"] = std::vector<Word>(n.outputs.begin(), n.outputs.end());
    j["unknown"] = n.unknown;
    nodes.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["input"] = tree.input_json;
  out["truncated"] = tree.truncated;
  out["nodes"] = std::move(nodes);
  return out;
}

}  // namespace loopscope
