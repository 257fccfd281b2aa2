#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/engine/engine.hpp"
#include "loopscope/failure/fault.hpp"
#include "loopscope/ir/process.hpp"

namespace loopscope {

/// When does the scenario count as harmful. Deadline: harm unless one of
/// `actions` ("stop" or "halt:<w>") happens before the deadline (strictly
/// before when `strict`). AnswerMismatch: harm when the run halts with an
/// output other than `expected`.
struct HarmRule {
  enum class Kind { Deadline, AnswerMismatch };
  Kind kind = Kind::Deadline;
  std::optional<SimDuration> by;
  std::string by_event;
  std::vector<std::string> actions;
  bool strict = true;
  Word expected;
};

struct TimedScenario {
  std::string id;
  std::shared_ptr<const ProcessMachine> machine;
  Input input;
  nlohmann::json input_json;
  std::string observe;  // enum variable fed from the timeline, if any
  std::optional<std::size_t> observe_slot;
  SimDuration start{0};
  Timeline timeline;
  HumanModelParams human;
  nlohmann::json intent_json;
  OracleStrategy intent;
  std::vector<FaultInjection> faults;
  HarmRule harm;
  Limits limits;

  /// Copy without the listed faults (by index into `faults`).
  TimedScenario without(const std::vector<std::size_t>& fault_indices) const;
  /// Copy without every fault of the listed modes.
  TimedScenario without_modes(const std::vector<std::string>& mode_ids) const;
};

/// Fields: machine (process spec), input?, observe?, start?, timeline,
/// human, intent, faults?, harm, limits?.
TimedScenario parse_timed_scenario(const nlohmann::json& doc, const std::string& path);

enum class TrialOutcome { Harm, Averted, Aborted, Completed };
const char* trial_outcome_name(TrialOutcome o);

struct Attribution {
  std::string mode_id;
  bool decisive = false;
};

struct TrialRecord {
  std::uint64_t seed = 0;
  TrialOutcome outcome = TrialOutcome::Harm;
  std::vector<SimDuration> response_latency;  // per query, issue to answer
  std::vector<std::string> triggered_modes;
  std::string run_outcome;  // halt:<w>, abort or step-limit
  std::optional<SimDuration> action_at;
  std::optional<SimDuration> deadline;
  std::uint64_t queries = 0;
  std::uint64_t wrong_answers = 0;  // answers flagged as human error
  std::vector<std::vector<std::string>> flags;
  std::optional<std::vector<Attribution>> attribution;

  nlohmann::ordered_json to_json() const;
};

/// One trial. A pure function of (scenario, seed).
TrialRecord simulate_timed(const TimedScenario& scenario, std::uint64_t seed);
/// The trace behind a trial, for reports.
Trace simulate_timed_trace(const TimedScenario& scenario, std::uint64_t seed);

/// For each ablatable fault: re-simulate without it under the same seed;
/// decisive when the outcome changes.
std::vector<Attribution> attribute(const TrialRecord& trial, const TimedScenario& scenario);

struct Interval {
  double lo = 0;
  double hi = 0;
};

/// Wilson score interval at 95%.
Interval wilson95(std::uint64_t successes, std::uint64_t n);

struct MonteCarloOptions {
  bool attribution = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct MonteCarloResult {
  std::vector<TrialRecord> records;
  nlohmann::ordered_json summary;
};

/// Trial i runs with trial_seed(master_seed, i). Throws DomainError when
/// trials is 0.
MonteCarloResult monte_carlo(const TimedScenario& scenario, std::uint64_t trials, std::uint64_t master_seed,
                             const MonteCarloOptions& options = {});

std::string records_to_jsonl(const std::vector<TrialRecord>& records);
std::string summary_markdown(const nlohmann::ordered_json& summary);

}  // namespace loopscope
