#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/time.hpp"
#include "loopscope/ir/word.hpp"

namespace loopscope {

struct QueryContext {
  std::uint64_t query_index = 0;
  SimDuration elapsed{0};  // simulated clock when the human sees the prompt
  std::optional<Word> suggested_default;
  bool hazard = false;
  std::string tag;  // the query node's tag, if any
};

struct OracleResponse {
  Answer answer;
  SimDuration latency{0};  // from seeing the prompt to answering
  std::vector<std::string> flags;
};

using OracleBehavior = std::function<OracleResponse(const Word& prompt, const QueryContext& ctx)>;

/// The oracle function f, possibly time- or index-dependent.
struct OracleStrategy {
  std::string descriptor;
  bool deterministic = true;
  OracleBehavior behavior;

  OracleResponse operator()(const Word& prompt, const QueryContext& ctx) const { return behavior(prompt, ctx); }
};

/// script[min(query_index, len-1)]. Throws std::invalid_argument on an
/// empty script.
OracleStrategy scripted_answer(std::vector<Answer> script);
OracleStrategy constant_answer(Answer a);
/// Answers with the prompt itself, cut to max_len.
OracleStrategy echo_answer(std::size_t max_len);
/// accept iff decode(prompt) >= threshold. The empty prompt is not a
/// numeral: reject, flagged "decode-miss".
OracleStrategy threshold_human(std::int64_t threshold, Word accept, Word reject, const Alphabet& alphabet);

/// All words of length 0..max_len (length-then-lex), then Stop.
std::vector<Answer> enumeration_answers(const Alphabet& alphabet, std::size_t max_len);

/// Parse "!" or a word list entry; words must be in the answer space.
Answer answer_from_json(const nlohmann::json& j, const Alphabet& alphabet, std::size_t max_len,
                        const std::string& path);

}  // namespace loopscope
