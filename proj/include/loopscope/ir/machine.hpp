#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "loopscope/ir/time.hpp"
#include "loopscope/ir/value.hpp"
#include "loopscope/ir/word.hpp"

namespace loopscope {

/// Snapshot of a machine between steps. Process machines use `node` and
/// `store`; tape machines use `node` (state index), the tapes and heads.
/// Wrapper machines keep the wrapped configuration in `inner`.
struct Configuration {
  std::size_t node = 0;
  std::vector<Value> store;
  std::string work;
  std::string oracle;
  std::size_t work_head = 0;
  std::size_t oracle_head = 0;
  std::uint64_t steps = 0;
  std::uint64_t queries = 0;
  bool answered = false;
  std::int64_t phase = 0;
  std::vector<Word> scratch;
  std::shared_ptr<const Configuration> inner;
};

/// How long executing a node takes in timed runs.
struct NodeDuration {
  SimDuration fixed{0};
  bool until_next_event = false;
};

struct Continue {
  Configuration next;
};

struct Query {
  Word prompt;
  Configuration at;
  std::optional<Word> suggested;
  bool hazard = false;
  std::string tag;
  std::optional<SimDuration> deadline;
};

struct Halt {
  Word output;
  Configuration at;
};

/// Halted with no output.
struct Abort {};

using StepEffect = std::variant<Continue, Query, Halt, Abort>;

/// A deterministic oracle machine. Implementations are immutable; every
/// member function is safe to call concurrently.
class Machine {
 public:
  virtual ~Machine() = default;

  virtual const std::string& name() const = 0;
  virtual const Alphabet& alphabet() const = 0;
  virtual std::size_t max_answer_len() const = 0;
  virtual std::span<const VarDecl> inputs() const = 0;
  virtual std::uint64_t spec_hash() const = 0;

  /// Throws DomainError when `input` is outside the declared domains.
  virtual Configuration initial(const Input& input) const = 0;

  /// One step from a configuration that is not awaiting an answer.
  /// Continue costs one step; Query, Halt and Abort cost none.
  virtual StepEffect step(const Configuration& config) const = 0;

  /// Deliver an answer to the configuration carried by a Query effect.
  /// Stop yields Abort; a word yields Continue with queries + 1 and the
  /// step count unchanged. Words outside the answer space throw DomainError.
  virtual StepEffect resume(const Configuration& at_query, const Answer& answer) const = 0;

  /// Simulated time spent executing the node `config` is about to step.
  virtual NodeDuration duration(const Configuration&) const { return {}; }

  /// Human-readable position (node id or state name) for traces.
  virtual std::string location(const Configuration&) const { return {}; }

  /// Every answer a query accepts besides Stop.
  bool in_answer_space(const Word& w) const {
    return w.size() <= max_answer_len() && alphabet().is_word(w);
  }
};

using MachinePtr = std::shared_ptr<const Machine>;

/// FNV-1a, 64 bit.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

}  // namespace loopscope
