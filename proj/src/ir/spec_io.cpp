#include "loopscope/ir/spec_io.hpp"

#include <fstream>
#include <sstream>

#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"

namespace loopscope {

AnySpec parse_spec(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SpecError("", "spec document must be a JSON object");
  auto it = doc.find("mode");
  if (it != doc.end() && *it == "tape") return parse_tape_spec(doc);
  return parse_process_spec(doc);
}

AnySpec parse_spec_text(std::string_view text, const std::string& origin) {
  return parse_spec(parse_json_text(text, origin));
}

AdaptedMachine load_machine(const nlohmann::json& doc) {
  auto spec = parse_spec(doc);
  if (auto* p = std::get_if<ProcessSpec>(&spec)) {
    return AdaptedMachine{std::make_shared<ProcessMachine>(std::move(*p)), {}};
  }
  return adapt_tape_machine(std::move(std::get<TapeSpec>(spec)));
}

AdaptedMachine load_machine_text(std::string_view text, const std::string& origin) {
  return load_machine(parse_json_text(text, origin));
}

AdaptedMachine load_machine_file(const std::filesystem::path& path) {
  return load_machine_text(read_text_file(path), path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace loopscope
