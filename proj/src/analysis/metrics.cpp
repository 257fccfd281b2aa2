#include "loopscope/analysis/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <stdexcept>

#include "loopscope/oracle/oracle.hpp"

namespace loopscope {

SegmentMetrics segment_metrics(std::vector<std::uint64_t> segments, std::uint64_t queries) {
  SegmentMetrics m;
  m.segments = std::move(segments);
  m.queries = queries;
  m.max_segment = m.segments.empty() ? 0 : *std::max_element(m.segments.begin(), m.segments.end());
  const auto nonzero = static_cast<std::uint64_t>(
      std::count_if(m.segments.begin(), m.segments.end(), [](std::uint64_t s) { return s > 0; }));
  const auto denom = queries + nonzero;
  m.unmasking_ratio = denom == 0 ? 0.0 : static_cast<double>(queries) / static_cast<double>(denom);
  return m;
}

SegmentMetrics segment_metrics(const Trace& trace) {
  return segment_metrics(trace_segments(trace), trace.queries.size());
}

DecisiveReport decisive_points(const Trace& trace, const Machine& machine, const OracleStrategy* oracle,
                               const Limits& limits) {
  if (!oracle) throw std::invalid_argument("decisive_points needs the originating oracle strategy");
  if (!trace.outcome.is_halt()) throw std::invalid_argument("decisive_points needs a trace that halted");
  const auto input = input_of(trace, machine);
  DecisiveReport rep;

  std::vector<Answer> recorded;
  for (const auto& q : trace.queries) recorded.push_back(q.answer);
  const auto tree = build_tree(machine, input, limits);
  const auto visited = tree.follow(recorded);
  for (std::size_t i = 0; i < trace.queries.size(); ++i) {
    if (i < visited.size()) {
      const auto f = tree.real_query(visited[i]);
      rep.real_on_path.push_back(f.is_real);
      rep.real_conclusive.push_back(f.conclusive);
    } else {
      rep.real_on_path.push_back(false);
      rep.real_conclusive.push_back(false);
    }
  }

  const auto alternatives = all_words(machine.alphabet(), machine.max_answer_len());
  for (std::size_t i = 0; i < trace.queries.size(); ++i) {
    bool flips = false;
    for (const auto& alt : alternatives) {
      const auto a = Answer::word(alt);
      if (a == recorded[i]) continue;
      OracleStrategy cf{"counterfactual", oracle->deterministic,
                        [&, i, a](const Word& prompt, const QueryContext& ctx) {
                          if (ctx.query_index < i) return OracleResponse{recorded[ctx.query_index], {}, {}};
                          if (ctx.query_index == i) return OracleResponse{a, {}, {}};
                          return (*oracle)(prompt, ctx);
                        }};
      const auto t = run(machine, input, cf, limits);
      if (!(t.outcome == trace.outcome)) {
        flips = true;
        break;
      }
    }
    if (!flips) continue;
    (rep.real_on_path[i] ? rep.decisive : rep.counterfactual_only).push_back(i);
  }
  return rep;
}

nlohmann::ordered_json segment_json(const SegmentMetrics& m) {
  nlohmann::ordered_json j;
  j["segments"] = m.segments;
  j["max_segment"] = m.max_segment;
  j["queries"] = m.queries;
  j["unmasking_ratio"] = m.unmasking_ratio;
  j["strip"] = segment_strip(m.segments);
  return j;
}

nlohmann::ordered_json decisive_json(const DecisiveReport& r) {
  nlohmann::ordered_json j;
  j["decisive"] = r.decisive;
  j["counterfactual_only"] = r.counterfactual_only;
  j["real_on_path"] = r.real_on_path;
  j["real_conclusive"] = r.real_conclusive;
  return j;
}

std::string segment_strip(const std::vector<std::uint64_t>& segments) {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '?';
    const auto s = segments[i];
    out += s <= 12 ? "[" + std::string(s, '#') + "]" : fmt::format("[{}]", s);
  }
  return out;
}

}  // namespace loopscope
