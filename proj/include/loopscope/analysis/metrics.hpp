#pragma once

#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/analysis/tree.hpp"

namespace loopscope {

struct SegmentMetrics {
  std::vector<std::uint64_t> segments;  // steps before, between and after queries
  std::uint64_t max_segment = 0;
  std::uint64_t queries = 0;
  /// queries / (queries + number of nonzero segments); 0 when both are 0.
  double unmasking_ratio = 0;
};

SegmentMetrics segment_metrics(const Trace& trace);
SegmentMetrics segment_metrics(std::vector<std::uint64_t> segments, std::uint64_t queries);

struct DecisiveReport {
  std::vector<std::uint64_t> decisive;             // counterfactual and real
  std::vector<std::uint64_t> counterfactual_only;  // outcome flips, query not real
  std::vector<bool> real_on_path;                  // per query index
  std::vector<bool> real_conclusive;
};

/// For each query i of a halting trace: replay answers before i, substitute
/// every other non-Stop answer at i, continue with `oracle`. i is decisive
/// when some substitution changes the outcome and the query is real on the
/// trace's path. Throws std::invalid_argument when `oracle` is null or the
/// trace did not halt.
DecisiveReport decisive_points(const Trace& trace, const Machine& machine, const OracleStrategy* oracle,
                               const Limits& limits = {});

nlohmann::ordered_json segment_json(const SegmentMetrics& m);
nlohmann::ordered_json decisive_json(const DecisiveReport& r);

/// Text strip such as "[###]?[#]?[]" where each '#' is a step and '?' a query;
/// long segments are shown as [n].
std::string segment_strip(const std::vector<std::uint64_t>& segments);

}  // namespace loopscope
