#include "loopscope/oracle/oracle.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

OracleStrategy scripted_answer(std::vector<Answer> script) {
  if (script.empty()) throw std::invalid_argument("scripted_answer needs a non-empty script");
  std::string desc = "scripted [";
  for (std::size_t i = 0; i < script.size(); ++i) desc += (i ? "," : "") + ("\"" + script[i].str() + "\"");
  desc += "]";
  return OracleStrategy{desc, true, [script = std::move(script)](const Word&, const QueryContext& ctx) {
                          const auto i = std::min<std::uint64_t>(ctx.query_index, script.size() - 1);
                          return OracleResponse{script[i], SimDuration{0}, {}};
                        }};
}

OracleStrategy constant_answer(Answer a) {
  return OracleStrategy{"constant \"" + a.str() + "\"", true, [a](const Word&, const QueryContext&) {
                          return OracleResponse{a, SimDuration{0}, {}};
                        }};
}

OracleStrategy echo_answer(std::size_t max_len) {
  return OracleStrategy{"echo", true, [max_len](const Word& prompt, const QueryContext&) {
                          return OracleResponse{Answer::word(prompt.substr(0, max_len)), SimDuration{0}, {}};
                        }};
}

OracleStrategy threshold_human(std::int64_t threshold, Word accept, Word reject, const Alphabet& alphabet) {
  if (accept == reject) throw std::invalid_argument("threshold_human needs accept != reject");
  auto desc = fmt::format("threshold >= {} -> \"{}\" else \"{}\"", threshold, accept, reject);
  return OracleStrategy{desc, true,
                        [threshold, accept = std::move(accept), reject = std::move(reject), alphabet](
                            const Word& prompt, const QueryContext&) {
                          if (prompt.empty() || !alphabet.is_word(prompt))
                            return OracleResponse{Answer::word(reject), SimDuration{0}, {"decode-miss"}};
                          const auto score = decode_word(prompt, alphabet);
                          return OracleResponse{Answer::word(score >= threshold ? accept : reject), SimDuration{0},
                                                {}};
                        }};
}

std::vector<Answer> enumeration_answers(const Alphabet& alphabet, std::size_t max_len) {
  std::vector<Answer> out;
  for (auto& w : all_words(alphabet, max_len)) out.push_back(Answer::word(std::move(w)));
  out.push_back(Answer::stop());
  return out;
}

Answer answer_from_json(const nlohmann::json& j, const Alphabet& alphabet, std::size_t max_len,
                        const std::string& path) {
  if (!j.is_string()) throw SpecError(path, "expected a word or \"!\"");
  const auto s = j.get<std::string>();
  if (s == "!") return Answer::stop();
  if (s.size() > max_len || !alphabet.is_word(s))
    throw SpecError(path, "'" + s + "' is outside the answer space");
  return Answer::word(s);
}

}  // namespace loopscope
