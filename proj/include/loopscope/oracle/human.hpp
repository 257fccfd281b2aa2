#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "loopscope/oracle/oracle.hpp"
#include "loopscope/oracle/rng.hpp"

namespace loopscope {

struct ReactionTime {
  enum class Kind { Fixed, Uniform, TruncatedNormal };
  Kind kind = Kind::Fixed;
  double a = 0;  // fixed value, uniform low, or normal mean
  double b = 0;  // uniform high or normal sigma
  double min = 0;  // truncated normal lower bound

  double sample(const CounterRng& rng, std::uint64_t query_index) const;
};

/// Two-state chain (attentive, distracted) advanced once per simulated
/// second. Transition draws are keyed by the tick, so the chain is a fixed
/// function of the seed; it starts attentive `warmup` seconds before t=0.
struct Attention {
  double p_distract = 0;
  double p_recover = 1;
  double warmup = 0;

  /// Seconds from `t` until the human is attentive again (0 if attentive).
  double delay_at(const CounterRng& rng, double t) const;
};

struct Fatigue {
  double eps0 = 0;
  double gamma = 0;
  double eps_max = 1;

  double rate(std::uint64_t k) const;
};

struct HumanModelParams {
  ReactionTime reaction;
  Attention attention;
  double automation_bias = 0;
  Fatigue fatigue;
  double courage = 0;
  std::string seed_stream = "human";

  /// Throws DomainError on out-of-range parameters.
  void validate() const;
};

/// Per query: reaction delay; distraction delay; automation bias; fatigue
/// error (uniform over the other words of the answer space); Stop on hazard
/// with probability `courage`; otherwise the intent answer.
OracleStrategy stochastic_human(HumanModelParams params, std::uint64_t seed, OracleStrategy intent,
                                const Alphabet& alphabet, std::size_t max_len);

HumanModelParams human_params_from_json(const nlohmann::json& j, const std::string& path);
nlohmann::json human_params_to_json(const HumanModelParams& p);

/// Intent binding: "!", "$echo", a word, a list of those used as a script,
/// or an object keyed by query tag ("*" as fallback).
OracleStrategy intent_from_json(const nlohmann::json& j, const Alphabet& alphabet, std::size_t max_len,
                                const std::string& path);

}  // namespace loopscope
