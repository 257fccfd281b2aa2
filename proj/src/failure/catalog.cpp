#include "loopscope/failure/catalog.hpp"

#include <algorithm>
#include <cctype>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

const char* fault_target_name(FaultTarget t) {
  switch (t) {
    case FaultTarget::Machine:
      return "machine";
    case FaultTarget::Oracle:
      return "oracle";
    case FaultTarget::Workflow:
      return "workflow";
  }
  return "?";
}

FaultTarget fault_target_from_name(const std::string& s) {
  if (s == "machine") return FaultTarget::Machine;
  if (s == "oracle") return FaultTarget::Oracle;
  if (s == "workflow") return FaultTarget::Workflow;
  throw DomainError("unknown fault target '" + s + "' (machine, oracle, workflow)");
}

const char* fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::NotificationDelay:
      return "notification_delay";
    case FaultKind::PromptTruncation:
      return "prompt_truncation";
    case FaultKind::MisclassificationMap:
      return "misclassification_map";
    case FaultKind::OutputError:
      return "output_error";
    case FaultKind::Set:
      return "set";
    case FaultKind::ExtraDelay:
      return "extra_delay";
    case FaultKind::Deadline:
      return "deadline";
    case FaultKind::Human:
      return "human";
    case FaultKind::ErrorRate:
      return "error_rate";
    case FaultKind::Description:
      return "description";
  }
  return "?";
}

std::vector<FaultTarget> kind_targets(FaultKind k) {
  using T = FaultTarget;
  switch (k) {
    case FaultKind::MisclassificationMap:
    case FaultKind::OutputError:
      return {T::Machine};
    case FaultKind::NotificationDelay:
    case FaultKind::PromptTruncation:
    case FaultKind::Human:
    case FaultKind::ErrorRate:
      return {T::Oracle};
    case FaultKind::Deadline:
      return {T::Workflow};
    case FaultKind::Set:
    case FaultKind::ExtraDelay:
      return {T::Machine, T::Workflow};
    case FaultKind::Description:
      return {T::Machine, T::Oracle, T::Workflow};
  }
  return {};
}

std::string mode_slug(const std::string& name) {
  std::string out;
  bool dash = false;
  for (unsigned char c : name) {
    if (std::isalnum(c)) {
      if (dash && !out.empty()) out += '-';
      out += static_cast<char>(std::tolower(c));
      dash = false;
    } else if (c != '`' && c != '\'') {
      dash = true;
    }
  }
  return out;
}

namespace {

struct CategoryDef {
  const char* name;
  std::vector<FaultTarget> targets;
  std::vector<FaultKind> kinds;
  std::vector<const char*> modes;
};

FailureCatalog build() {
  using T = FaultTarget;
  using K = FaultKind;
  const std::vector<CategoryDef> defs = {
      {"Failure of the machine components",
       {T::Machine},
       {K::MisclassificationMap, K::OutputError, K::Set, K::ExtraDelay},
       {"Unexpected inputs or outputs", "Problematic machine evolution or self-adaptation", "Hallucinations",
        "Reasoning errors", "Overfitting of training data", "Biased or other erroneous outputs",
        "Unfalsifiable outputs", "Lacking `common sense'", "Morally unacceptable outputs",
        "Other unexpected behaviour"}},
      {"Failure of the process and workflow",
       {T::Workflow, T::Oracle},
       {K::NotificationDelay, K::Deadline, K::Set, K::ExtraDelay, K::Human},
       {"Insufficient power of the human", "Insufficient self-control/independence", "Insufficient reaction time",
        "Unrealistic expectations", "Delayed notification", "Lack of disaster planning",
        "Insufficient management support", "Insufficient psychological support", "Lack of rest",
        "Conflict of interest", "Other process and workflow failures"}},
      {"Failure at the human–machine interface",
       {T::Oracle, T::Machine, T::Workflow},
       {K::PromptTruncation, K::NotificationDelay, K::Set, K::ExtraDelay, K::Human, K::ErrorRate},
       {"Incomprehensible or incomplete outputs", "Complex or poorly designed user interface",
        "Constantly changing user interface", "Insufficient training", "Poor documentation",
        "Transition failures between different humans", "Other HCI adaptability failures",
        "Other epistemic failures", "Other interaction failures"}},
      {"Failure of the human component",
       {T::Oracle},
       {K::Human, K::ErrorRate},
       {"Cognitive bias", "Automation bias", "Confirmation bias", "Fatigue", "Incongruous intentions",
        "Stress or overload", "Lacking courage", "Lacking motivation", "Lacking self-awareness",
        "Lacking humility", "Onset of groupthink", "Other human-centric failures"}},
      {"Exogenous circumstances",
       {T::Workflow},
       {K::Set, K::Deadline, K::ExtraDelay, K::Human},
       {"Unreasonable laws", "Unreasonable societal expectations", "Conflicting requirements",
        "Misaligned objectives", "Political pressure", "Unexpected exogenous shocks", "Poor safety culture",
        "Inappropriate workplace requirements", "Insufficient resources", "Other external pressures"}},
  };
  FailureCatalog cat;
  for (std::size_t i = 0; i < defs.size(); ++i) {
    FailureCategory c;
    c.id = "FC" + std::to_string(i + 1);
    c.name = defs[i].name;
    for (const char* m : defs[i].modes) {
      FailureMode mode;
      mode.name = m;
      mode.id = c.id + "." + mode_slug(m);
      mode.category = i;
      mode.targets = defs[i].targets;
      const bool other = mode.name.rfind("Other ", 0) == 0;
      mode.ablatable = !other;
      mode.kinds = other ? std::vector<FaultKind>{K::Description} : defs[i].kinds;
      c.modes.push_back(std::move(mode));
    }
    cat.categories.push_back(std::move(c));
  }
  return cat;
}

}  // namespace

const FailureMode* FailureCatalog::find(const std::string& mode_id) const {
  for (const auto& c : categories) {
    for (const auto& m : c.modes) {
      if (m.id == mode_id) return &m;
    }
  }
  return nullptr;
}

nlohmann::ordered_json FailureCatalog::to_json() const {
  auto out = nlohmann::ordered_json::array();
  for (const auto& c : categories) {
    nlohmann::ordered_json jc;
    jc["id"] = c.id;
    jc["name"] = c.name;
    auto modes = nlohmann::ordered_json::array();
    for (const auto& m : c.modes) {
      nlohmann::ordered_json jm;
      jm["id"] = m.id;
      jm["name"] = m.name;
      auto targets = nlohmann::ordered_json::array();
      for (auto t : m.targets) targets.push_back(fault_target_name(t));
      jm["targets"] = targets;
      auto kinds = nlohmann::ordered_json::array();
      for (auto k : m.kinds) kinds.push_back(fault_kind_name(k));
      jm["params"] = kinds;
      jm["ablatable"] = m.ablatable;
      modes.push_back(std::move(jm));
    }
    jc["modes"] = std::move(modes);
    out.push_back(std::move(jc));
  }
  return out;
}

const FailureCatalog& load_taxonomy() {
  static const FailureCatalog catalog = build();
  return catalog;
}

}  // namespace loopscope
