#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/ir/process.hpp"
#include "loopscope/ir/tape.hpp"

namespace loopscope {

using AnySpec = std::variant<ProcessSpec, TapeSpec>;

/// Dispatch on "mode" (absent or "process", or "tape").
AnySpec parse_spec(const nlohmann::json& doc);
AnySpec parse_spec_text(std::string_view text, const std::string& origin = "spec");

/// Parse, validate and build a machine (tape specs go through
/// adapt_tape_machine, whose warnings are returned).
AdaptedMachine load_machine(const nlohmann::json& doc);
AdaptedMachine load_machine_text(std::string_view text, const std::string& origin = "spec");
AdaptedMachine load_machine_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace loopscope
