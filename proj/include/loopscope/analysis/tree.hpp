#pragma once

#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/engine/engine.hpp"
#include "loopscope/ir/machine.hpp"

namespace loopscope {

struct TreeNode {
  enum class Kind { Query, Halt, Abort, Truncated };

  Kind kind = Kind::Truncated;
  std::size_t parent = SIZE_MAX;
  Answer via;                      // answer on the edge from the parent
  std::uint64_t step_depth = 0;    // machine steps taken on reaching this node
  std::uint64_t query_depth = 0;   // queries answered before this node
  Word prompt;                     // Query
  std::string tag;                 // Query
  Word output;                     // Halt
  std::string truncation;          // Truncated: which limit
  std::vector<std::size_t> children;  // Query: one per enumeration answer, same order

  // Filled by ComputationTree::recompute().
  std::set<Word> outputs;
  bool unknown = false;        // a TruncatedLeaf lies below
  bool abort_only = false;     // every leaf below is an AbortLeaf
  std::uint64_t canon = 0;     // equal iff structurally equal subtrees
};

struct RealQueryFlags {
  std::size_t node = 0;
  bool fork_exists = false;
  bool outputs_differ = false;
  bool is_real = false;
  bool conclusive = true;
};

/// All behaviours of a machine on one input over the bounded answer space.
class ComputationTree {
 public:
  Input input;
  nlohmann::json input_json;
  std::vector<TreeNode> nodes;  // nodes[0] is the root; children follow parents
  bool truncated = false;
  std::uint64_t spec_hash = 0;
  Limits limits;

  const TreeNode& root() const { return nodes.front(); }

  /// Output sets, abort-only marks and canonical subtree ids.
  void recompute();

  /// Attach an extra branch to a query node whose subtree contains only
  /// AbortLeafs (`depth` nested single-branch query nodes ending in Abort).
  /// Returns the new child index. Caches are recomputed.
  std::size_t graft_abort_branch(std::size_t query_node, Answer label, std::size_t depth = 0);

  /// Real-query flags of every query node, in node order.
  std::vector<RealQueryFlags> real_queries() const;
  RealQueryFlags real_query(std::size_t node) const;

  /// Answers along the path from the root to `node`.
  std::vector<Answer> path_to(std::size_t node) const;
  /// Follow recorded answers from the root; returns the query nodes visited.
  std::vector<std::size_t> follow(const std::vector<Answer>& answers) const;

  std::size_t count(TreeNode::Kind k) const;
};

/// Breadth-first expansion of every query over enumeration_answers. Runs
/// longer than limits.max_steps, deeper than limits.max_queries, or beyond
/// limits.max_tree_nodes nodes become TruncatedLeafs.
ComputationTree build_tree(const Machine& machine, const Input& input, const Limits& limits = {});

/// Whether two output sets certainly differ (unknown parts considered).
bool sets_definitely_differ(const TreeNode& a, const TreeNode& b);

/// One flag per query depth: whether any query node at that depth is real.
std::vector<bool> real_flags_by_depth(const ComputationTree& tree);

nlohmann::ordered_json tree_to_json(const ComputationTree& tree);

}  // namespace loopscope
