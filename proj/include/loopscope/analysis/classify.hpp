#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/analysis/tree.hpp"

namespace loopscope {

enum class SetupClass { HOOTL, TrivialMonitoring, EndpointAction, InvolvedInteraction, Intermediate };

const char* setup_class_name(SetupClass c);
std::optional<SetupClass> setup_class_from_name(std::string_view name);

struct Evidence {
  nlohmann::json input;
  std::vector<std::string> path;  // answers from the root
  std::string note;
};

struct CensusRow {
  nlohmann::json input;
  std::uint64_t min_real = 0;  // over complete (halting) paths
  std::uint64_t max_real = 0;  // over all paths
  std::vector<Word> outputs;
  bool unknown = false;
  std::size_t query_nodes = 0;
  std::size_t real_nodes = 0;
};

struct SetupVerdict {
  SetupClass cls = SetupClass::Intermediate;
  bool conclusive = false;
  bool strict = true;
  bool abort_reachable = false;
  std::vector<Evidence> evidence;
  std::vector<CensusRow> census;
  std::vector<std::string> notes;
  std::uint64_t spec_hash = 0;
  Limits limits;
  std::string machine;

  nlohmann::ordered_json to_json() const;
};

struct ClassifyOptions {
  Limits limits;
  bool strict = true;  // endpoint action requires zero steps after the answer
};

SetupVerdict classify_setup(const Machine& machine, const ClassifyOptions& options = {});
/// Same decision procedure over prebuilt trees (one per input).
SetupVerdict classify_trees(const Machine& machine, const std::vector<ComputationTree>& trees,
                            const ClassifyOptions& options);

struct EffectiveVerdict {
  SetupVerdict standalone;
  SetupVerdict effective;
  std::vector<std::string> oracles;
  std::vector<EffectiveTable> tables;  // one per oracle
  bool total = false;                  // every run halted
  bool single_valued = false;          // one output per input across the family

  nlohmann::ordered_json to_json(const Machine& machine) const;
};

/// Classify the machine composed with a family of deterministic oracles (a
/// single oracle is a family of one). Total and single-valued composition
/// is reported as trivial monitoring whatever the standalone class.
EffectiveVerdict classify_effective(const Machine& machine, const std::vector<OracleStrategy>& family,
                                    const ClassifyOptions& options = {});

}  // namespace loopscope
