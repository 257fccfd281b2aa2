#pragma once

// Shared test helpers: fixture loading, a seeded random process-spec
// generator, and a brute-force explorer that walks a machine through the
// Machine interface only (no engine, no tree), used as an independent
// oracle for the analysis code.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/machine.hpp"

namespace testing {

using loopscope::Answer;
using loopscope::Input;
using loopscope::Machine;
using loopscope::MachinePtr;
using loopscope::Word;

std::filesystem::path fixture_dir();
std::filesystem::path scenario_dir();
std::filesystem::path cli_path();

nlohmann::json read_json(const std::filesystem::path& path);
MachinePtr machine_from_json(const nlohmann::json& spec);
/// The "machine" block of a scenario or fixture file.
MachinePtr scenario_machine(const std::string& id, const std::filesystem::path& dir = scenario_dir());

struct RandomSpecOptions {
  std::size_t max_queries = 3;
  bool loops = true;  // allow bounded counter loops (long segments)
};

/// A small, valid process spec; same seed, same document.
nlohmann::json random_process_spec(std::uint64_t seed, const RandomSpecOptions& options = {});

/// Exhaustive walk of one input's behaviours, straight from step/resume.
struct BruteQuery {
  std::vector<std::string> path;  // answers from the root, Answer::str()
  Word prompt;
  bool outputs_differ = false;    // two non-Stop answers, different output sets
  bool unknown = false;           // a step limit was hit below
};

struct BruteResult {
  std::set<Word> outputs;
  bool unknown = false;
  std::size_t halts = 0;
  std::size_t aborts = 0;
  std::vector<BruteQuery> queries;  // depth-first order
};

BruteResult brute_explore(const Machine& m, const Input& input, std::uint64_t max_steps = 10'000,
                          std::uint64_t max_queries = 64);

/// Outcome string ("halt:<w>", "abort", "step-limit") of feeding `answers`
/// in order, then `tail` for every later query.
std::string brute_outcome(const Machine& m, const Input& input, const std::vector<Answer>& answers,
                          const Answer& tail, std::uint64_t max_steps = 10'000);

/// Base-2 numeral, minimal length, independent of the library's encoder.
std::string base2(std::uint64_t v);

struct CommandResult {
  int exit_code = -1;
  std::string out;
};
/// Run the loopscope CLI with `args` (shell-quoted by the caller).
CommandResult run_cli(const std::string& args);

}  // namespace testing
