#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/failure/timed.hpp"
#include "loopscope/ir/machine.hpp"
#include "loopscope/oracle/oracle.hpp"

namespace loopscope {

enum class ScenarioKind { ClassificationFixture, TimedScenario };
const char* scenario_kind_name(ScenarioKind k);

/// Provenance of a golden value: taken from a worked example, forced by
/// the construction of the fixture, or computed by the engine and frozen.
inline constexpr const char* kGoldenSources[] = {"worked-example", "by-construction", "computed"};

struct ScenarioEntry {
  std::string id;
  ScenarioKind kind = ScenarioKind::ClassificationFixture;
  std::string title;
  std::string description;
  nlohmann::json document;  // the scenario file
  nlohmann::json golden;    // the sibling .expected.json, or null
  MachinePtr machine;
  std::vector<std::string> warnings;
  nlohmann::json input;                 // fixture input, null when absent
  std::optional<OracleStrategy> oracle; // fixture oracle binding
  std::optional<TimedScenario> timed;

  /// golden["expected"][key]["value"], or null.
  nlohmann::json expected(const std::string& key) const;
};

/// LOOPSCOPE_SCENARIOS if set, else the directory configured at build time.
std::filesystem::path default_scenario_dir();

/// Ids of the scenario files in `dir`, sorted.
std::vector<std::string> list_scenarios(const std::filesystem::path& dir = default_scenario_dir());

/// Throws Error("unknown scenario id ...") when absent; SpecError when the
/// payload or the golden file is invalid.
ScenarioEntry load_scenario(const std::string& id, const std::filesystem::path& dir = default_scenario_dir());
ScenarioEntry load_scenario_file(const std::filesystem::path& path);
/// Build from documents already in memory (golden may be null).
ScenarioEntry make_scenario(const nlohmann::json& document, const nlohmann::json& golden,
                            const std::string& origin = "scenario");

/// Resolve a --spec/--scenario argument: a scenario id, a scenario file, or
/// a bare machine spec file.
ScenarioEntry resolve_scenario(const std::string& arg, const std::filesystem::path& dir = default_scenario_dir());

/// Oracle binding: {"script": [...]}, {"constant": w}, {"echo": true} or
/// {"threshold": {"at", "accept", "reject"}}.
OracleStrategy oracle_from_json(const nlohmann::json& j, const Machine& machine, const std::string& path);

struct GoldenMismatch {
  std::string field;
  nlohmann::json expected;
  nlohmann::json actual;
};

struct GoldenResult {
  std::string id;
  bool pass = false;
  std::vector<GoldenMismatch> diff;
  std::size_t checked = 0;
  nlohmann::ordered_json actual;

  nlohmann::ordered_json to_json() const;
};

/// Recompute every expected key and compare. Nested objects are compared
/// field by field.
GoldenResult verify_golden(const ScenarioEntry& entry);
GoldenResult verify_golden(const std::string& id, const std::filesystem::path& dir = default_scenario_dir());

/// The value the engine currently produces for one golden key.
nlohmann::json compute_golden_value(const ScenarioEntry& entry, const std::string& key);

}  // namespace loopscope
