#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/machine.hpp"
#include "loopscope/oracle/oracle.hpp"

namespace loopscope {

struct Limits {
  std::uint64_t max_steps = 10'000;
  std::uint64_t max_tree_nodes = 1'000'000;
  std::uint64_t max_queries = 64;

  /// Throws DomainError unless every limit is positive.
  void validate() const;
  /// "steps,tree-nodes,queries"; empty fields keep the defaults.
  static Limits parse(std::string_view text);
  nlohmann::json to_json() const;
  static Limits from_json(const nlohmann::json& j);
  friend bool operator==(const Limits&, const Limits&) = default;
};

enum class OutcomeKind { Halt, Abort, StepLimit };

struct Outcome {
  OutcomeKind kind = OutcomeKind::Abort;
  Word output;         // Halt only
  std::string reason;  // StepLimit: which limit; Abort: who stopped

  static Outcome halt(Word w) { return {OutcomeKind::Halt, std::move(w), {}}; }
  static Outcome abort(std::string why = "stop") { return {OutcomeKind::Abort, {}, std::move(why)}; }
  static Outcome step_limit(std::string which) { return {OutcomeKind::StepLimit, {}, std::move(which)}; }

  bool is_halt() const { return kind == OutcomeKind::Halt; }
  /// "halt:<w>", "abort" or "step-limit".
  std::string str() const;
  friend bool operator==(const Outcome& a, const Outcome& b) {
    return a.kind == b.kind && a.output == b.output;
  }
};

const char* outcome_kind_name(OutcomeKind k);

struct TraceEvent {
  std::uint64_t step = 0;
  std::string effect;  // continue | query | halt | abort | step-limit
  std::string location;
  SimDuration time{0};
};

struct TraceQuery {
  std::uint64_t index = 0;
  Word prompt;
  Answer answer;
  std::uint64_t step = 0;  // steps taken when the query was issued
  SimDuration issued_at{0};
  SimDuration answered_at{0};
  SimDuration latency{0};
  bool hazard = false;
  bool late = false;  // answered after the node's deadline
  std::string tag;
  std::vector<std::string> flags;
};

/// The chain of computations of one run.
struct Trace {
  std::uint64_t spec_hash = 0;
  std::string machine;
  nlohmann::json input;  // by declared name
  std::optional<std::uint64_t> seed;
  Limits limits;
  SimDuration start{0};
  std::vector<TraceEvent> events;
  std::vector<TraceQuery> queries;
  Outcome outcome;
  std::uint64_t steps = 0;
  SimDuration end{0};
  /// Set when the run was ended by the stop flag rather than by an answer.
  std::optional<std::uint64_t> external_stop_step;
};

/// Optional hooks for timed runs. All default to untimed behaviour.
struct RunHooks {
  SimDuration start{0};
  /// Called before every step; may rewrite the configuration (observations).
  std::function<void(Configuration&, SimDuration now)> before_step;
  /// Time of the first environment event strictly after `now`.
  std::function<std::optional<SimDuration>(SimDuration now)> next_event;
  /// Checked before every step; when set the run ends in Abort.
  const std::atomic<bool>* stop_flag = nullptr;
  /// Ends the run in Abort once this many steps have been taken (replay of
  /// an externally stopped run).
  std::optional<std::uint64_t> stop_at_step;
};

/// Resumable run: advance() steps until a query is pending or the run has
/// ended; answer() delivers the reply. run() drives one of these with an
/// oracle, the live session service drives one with a person.
class Runner {
 public:
  /// Throws DomainError for an out-of-domain input or invalid limits.
  Runner(const Machine& machine, const Input& input, const Limits& limits = {}, RunHooks hooks = {},
         std::optional<std::uint64_t> seed = std::nullopt);

  /// The pending query, or nullptr once finished.
  const Query* advance();
  /// What the oracle is told about the pending query.
  QueryContext context() const;
  /// Answer the pending query; the clock moves on by the latency.
  void answer(OracleResponse response);

  bool finished() const { return finished_; }
  SimDuration now() const { return now_; }
  std::uint64_t steps() const { return c_.steps; }
  const Trace& trace() const { return t_; }
  Trace take() { return std::move(t_); }

 private:
  bool stopped() const;
  void finish(Outcome o, const char* effect);

  const Machine& machine_;
  Limits limits_;
  RunHooks hooks_;
  Trace t_;
  Configuration c_;
  SimDuration now_{0};
  std::optional<Query> pending_;
  bool finished_ = false;
};

/// Run `machine` on `input` with `oracle` answering queries.
/// Throws DomainError for an out-of-domain input.
Trace run(const Machine& machine, const Input& input, const OracleStrategy& oracle, const Limits& limits = {},
          const RunHooks& hooks = {}, std::optional<std::uint64_t> seed = std::nullopt);

/// Answers, latencies and flags from the trace, by query index.
OracleStrategy replay_oracle(const Trace& trace);

/// Re-run with the recorded answers. Throws Error on spec-hash mismatch.
Trace replay(const Trace& trace, const Machine& machine, const RunHooks& hooks = {});

struct EffectiveRow {
  Input input;
  Outcome outcome;
};

struct EffectiveTable {
  std::vector<EffectiveRow> rows;
  bool partial = false;  // some input hit a limit
  bool all_halt = false;
};

/// Machine composed with a deterministic oracle over every input.
/// Throws std::invalid_argument for a non-deterministic oracle.
EffectiveTable effective_function(const Machine& machine, const OracleStrategy& oracle, const Limits& limits = {});

/// JSON-lines: a header line, one line per event, one per query, then the
/// outcome line. Times are integer nanoseconds.
std::string trace_to_jsonl(const Trace& trace);
Trace trace_from_jsonl(std::string_view text);

/// Steps between consecutive queries: before the first query, between each
/// pair, and after the last one (queries + 1 entries).
std::vector<std::uint64_t> trace_segments(const Trace& trace);

Input input_of(const Trace& trace, const Machine& machine);

}  // namespace loopscope
