#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/failure/catalog.hpp"
#include "loopscope/ir/machine.hpp"
#include "loopscope/oracle/human.hpp"
#include "loopscope/oracle/oracle.hpp"

namespace loopscope {

struct TimelineEvent {
  SimDuration t{0};
  std::string label;
};

using Timeline = std::vector<TimelineEvent>;

/// Every occurrence of `event` is seen as `labels[0]` for `dwell[0]`, then
/// `labels[1]` and so on; the true label appears once the dwell times end.
struct Misclassification {
  std::string event;
  std::vector<std::string> labels;
  std::vector<SimDuration> dwell;
};

struct FaultInjection {
  std::string mode_id;
  FaultTarget target = FaultTarget::Machine;
  FaultKind kind = FaultKind::Description;
  nlohmann::json params;  // the kind's value as written

  SimDuration seconds{0};  // NotificationDelay, Deadline
  std::size_t keep = 0;    // PromptTruncation
  double probability = 0;  // OutputError, ErrorRate
  Misclassification misclassification;
  std::map<std::string, nlohmann::json> set;
  std::map<std::string, SimDuration> extra_delay;  // by node id
  nlohmann::json human;                            // partial HumanModelParams
  std::string description;

  const FailureMode& mode() const;
  nlohmann::ordered_json to_json() const;
};

/// {"mode": id, "target": t, <kind>: params}. Checks the mode exists, the
/// kind belongs to the mode's schema and acts on the target.
FaultInjection parse_fault(const nlohmann::json& j, const std::string& path);

/// Wrap a machine. Set rebuilds a process machine with new initial values;
/// ExtraDelay lengthens node durations; OutputError replaces halt outputs
/// with probability p, keyed by `seed`. Description leaves it unchanged.
/// Throws DomainError for other kinds or unknown variables and nodes.
MachinePtr inject(MachinePtr machine, const FaultInjection& fault, std::uint64_t seed = 0);

/// NotificationDelay shifts when the human sees the query; PromptTruncation
/// shortens the prompt the human sees.
OracleStrategy inject(OracleStrategy oracle, const FaultInjection& fault);

/// MisclassificationMap rewrites the environment stream the machine sees.
Timeline inject(const Timeline& timeline, const FaultInjection& fault);

/// Human and ErrorRate override the human model.
HumanModelParams inject(const HumanModelParams& params, const FaultInjection& fault);

}  // namespace loopscope
