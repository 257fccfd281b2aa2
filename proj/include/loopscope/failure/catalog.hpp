#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace loopscope {

enum class FaultTarget { Machine, Oracle, Workflow };

const char* fault_target_name(FaultTarget t);
FaultTarget fault_target_from_name(const std::string& s);

/// Parameter kinds a fault may carry. Each kind acts on a fixed set of
/// targets (see `kind_targets`).
enum class FaultKind {
  NotificationDelay,     // seconds added before the human sees a query
  PromptTruncation,      // keep the first j prompt symbols
  MisclassificationMap,  // environment label rewritten to a dwell sequence
  OutputError,           // probability a halt output is replaced
  Set,                   // variable initial values
  ExtraDelay,            // seconds added to named nodes
  Deadline,              // harm deadline override, seconds
  Human,                 // partial human-model override
  ErrorRate,             // constant human error probability
  Description,           // free text only; no behavioural effect
};

const char* fault_kind_name(FaultKind k);
std::vector<FaultTarget> kind_targets(FaultKind k);

struct FailureMode {
  std::string id;    // e.g. FC2.delayed-notification
  std::string name;  // as listed in the taxonomy table
  std::size_t category = 0;
  std::vector<FaultTarget> targets;
  std::vector<FaultKind> kinds;
  bool ablatable = true;  // false for the open-ended "Other ..." entries
};

struct FailureCategory {
  std::string id;  // FC1..FC5
  std::string name;
  std::vector<FailureMode> modes;
};

struct FailureCatalog {
  std::vector<FailureCategory> categories;

  /// nullptr when unknown.
  const FailureMode* find(const std::string& mode_id) const;
  nlohmann::ordered_json to_json() const;
};

const FailureCatalog& load_taxonomy();

/// "Lacking `common sense'" -> "lacking-common-sense".
std::string mode_slug(const std::string& name);

}  // namespace loopscope
