#pragma once

#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/machine.hpp"

namespace loopscope {

enum class Move { Left, Right, Stay };

struct TapeTransition {
  std::size_t to = 0;
  char write_work = 0;
  char write_oracle = 0;
  Move move_work = Move::Stay;
  Move move_oracle = Move::Stay;
};

/// Oracle Turing machine with one work tape and one oracle tape. The input
/// word is written left-justified on the work tape; both heads start at
/// cell 0. An oracle call replaces the oracle tape with the answer and
/// moves the oracle head back to cell 0.
struct TapeSpec {
  std::string name;
  Alphabet alphabet = Alphabet::binary();
  std::size_t max_answer_len = 1;
  char blank = '_';
  std::vector<char> work_alphabet;
  std::size_t input_max_len = 0;
  std::vector<std::string> states;
  std::size_t start = 0;
  std::vector<bool> is_oracle;
  std::vector<bool> is_halt;
  using Key = std::tuple<std::size_t, char, char>;
  std::map<Key, TapeTransition> transitions;
  nlohmann::json source;
  std::uint64_t hash = 0;
};

TapeSpec parse_tape_spec(const nlohmann::json& doc);

class TapeMachine final : public Machine {
 public:
  explicit TapeMachine(TapeSpec spec);

  const std::string& name() const override { return spec_.name; }
  const Alphabet& alphabet() const override { return spec_.alphabet; }
  std::size_t max_answer_len() const override { return spec_.max_answer_len; }
  std::span<const VarDecl> inputs() const override { return inputs_; }
  std::uint64_t spec_hash() const override { return spec_.hash; }

  Configuration initial(const Input& input) const override;
  StepEffect step(const Configuration& config) const override;
  StepEffect resume(const Configuration& at_query, const Answer& answer) const override;
  std::string location(const Configuration& config) const override { return spec_.states.at(config.node); }

  const TapeSpec& spec() const { return spec_; }
  /// Oracle tape content from cell 0 up to the first blank.
  Word oracle_word(const Configuration& config) const;

 private:
  TapeSpec spec_;
  std::vector<VarDecl> inputs_;
};

struct AdaptedMachine {
  MachinePtr machine;
  std::vector<std::string> warnings;
};

/// Validate reachability-based totality and wrap the spec as a Machine.
/// Every input and every answer sequence is explored up to `max_steps`
/// steps per run and `max_configs` distinct configurations in total; a
/// reachable (state, work, oracle) triple without a transition is a
/// SpecError, transitions never used are reported as warnings.
AdaptedMachine adapt_tape_machine(TapeSpec spec, std::uint64_t max_steps = 10000,
                                  std::uint64_t max_configs = 200000);

}  // namespace loopscope
