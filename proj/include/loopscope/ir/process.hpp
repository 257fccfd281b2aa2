#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/expr.hpp"
#include "loopscope/ir/machine.hpp"

namespace loopscope {

struct ProcessNode {
  enum class Kind { Compute, Branch, Query, Halt };

  std::string id;
  Kind kind = Kind::Halt;
  std::vector<std::pair<std::size_t, Expr>> assign;  // Compute: slot, value
  Expr condition;                                    // Branch
  std::size_t then_node = 0;
  std::size_t else_node = 0;
  std::size_t next = 0;  // Compute, Query
  Expr prompt;           // Query
  std::size_t bind = 0;  // Query: slot of a word variable
  std::string tag;
  std::optional<Expr> hazard;
  std::size_t suggest_len = 0;
  std::optional<SimDuration> deadline;
  Expr output;  // Halt
  NodeDuration duration;
};

/// A validated process-DSL machine definition.
struct ProcessSpec {
  std::string name;
  Alphabet alphabet = Alphabet::binary();
  std::size_t max_answer_len = 1;
  std::size_t input_count = 0;
  std::vector<VarDecl> slots;  // inputs first, then vars
  std::size_t entry = 0;
  std::vector<ProcessNode> nodes;
  nlohmann::json source;  // the document as parsed
  std::uint64_t hash = 0;

  std::optional<std::size_t> slot_of(std::string_view name) const;
  std::optional<std::size_t> node_of(std::string_view id) const;
};

/// Parse and validate a process spec document (object form).
ProcessSpec parse_process_spec(const nlohmann::json& doc);

class ProcessMachine final : public Machine {
 public:
  explicit ProcessMachine(ProcessSpec spec);

  const std::string& name() const override { return spec_.name; }
  const Alphabet& alphabet() const override { return spec_.alphabet; }
  std::size_t max_answer_len() const override { return spec_.max_answer_len; }
  std::span<const VarDecl> inputs() const override {
    return std::span<const VarDecl>(spec_.slots).first(spec_.input_count);
  }
  std::uint64_t spec_hash() const override { return spec_.hash; }

  Configuration initial(const Input& input) const override;
  StepEffect step(const Configuration& config) const override;
  StepEffect resume(const Configuration& at_query, const Answer& answer) const override;
  NodeDuration duration(const Configuration& config) const override;
  std::string location(const Configuration& config) const override { return spec_.nodes.at(config.node).id; }

  const ProcessSpec& spec() const { return spec_; }

  /// Copy of `config` with one variable replaced (wrapped into its domain
  /// for integers). Used by the timed simulator to feed observations.
  Configuration with_var(const Configuration& config, std::size_t slot, const Value& v) const;

 private:
  ProcessSpec spec_;
};

}  // namespace loopscope
