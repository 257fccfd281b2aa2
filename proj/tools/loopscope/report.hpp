#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace loopscope::cli {

using ojson = nlohmann::ordered_json;

/// Markdown renderings of the JSON reports. Each takes the exact document
/// the json format would print.
std::string verdict_md(const ojson& report);
std::string analysis_md(const ojson& report);
std::string run_md(const ojson& report);
std::string replay_md(const ojson& report);
std::string golden_md(const ojson& report);

}  // namespace loopscope::cli
