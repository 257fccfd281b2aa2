#include "support.hpp"

#include <fmt/format.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

#include "loopscope/ir/spec_io.hpp"

#ifndef LOOPSCOPE_TEST_FIXTURES
#define LOOPSCOPE_TEST_FIXTURES "tests/fixtures"
#endif
#ifndef LOOPSCOPE_SCENARIO_DIR
#define LOOPSCOPE_SCENARIO_DIR "scenarios/v1"
#endif
#ifndef LOOPSCOPE_CLI
#define LOOPSCOPE_CLI "loopscope"
#endif

namespace testing {

using nlohmann::json;
using namespace loopscope;

std::filesystem::path fixture_dir() { return LOOPSCOPE_TEST_FIXTURES; }
std::filesystem::path scenario_dir() { return LOOPSCOPE_SCENARIO_DIR; }
std::filesystem::path cli_path() { return LOOPSCOPE_CLI; }

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return json::parse(f);
}

MachinePtr machine_from_json(const json& spec) { return load_machine(spec).machine; }

MachinePtr scenario_machine(const std::string& id, const std::filesystem::path& dir) {
  return machine_from_json(read_json(dir / (id + ".json"))["machine"]);
}

// ---------------------------------------------------------------------------

namespace {

struct Gen {
  std::mt19937_64 rng;
  int below(int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); }
  bool coin(int pct) { return below(100) < pct; }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(below(static_cast<int>(v.size())))];
  }
};

}  // namespace

json random_process_spec(std::uint64_t seed, const RandomSpecOptions& opt) {
  Gen g{std::mt19937_64(seed * 0x9e3779b97f4a7c15ULL + 17)};
  const int L = 1 + g.below(2);
  const int n_inputs = g.below(3);
  const int n_queries = 1 + g.below(static_cast<int>(opt.max_queries));

  json inputs = json::array();
  std::vector<std::string> in_names;
  for (int i = 0; i < n_inputs; ++i) {
    in_names.push_back(fmt::format("x{}", i));
    inputs.push_back({{"name", in_names.back()}, {"type", "int"}, {"min", 0}, {"max", 1 + g.below(2)}});
  }
  json vars = json::array();
  vars.push_back({{"name", "acc"}, {"type", "int"}, {"min", 0}, {"max", 3}});
  vars.push_back({{"name", "cnt"}, {"type", "int"}, {"min", 0}, {"max", 7}});
  std::vector<std::string> words;
  for (int i = 0; i < n_queries; ++i) {
    words.push_back(fmt::format("w{}", i));
    vars.push_back({{"name", words.back()}, {"type", "word"}});
  }

  auto literal = [&] {
    std::string w;
    const int len = g.below(L + 1);
    for (int i = 0; i < len; ++i) w += g.coin(50) ? '1' : '0';
    return "'" + w + "'";
  };
  auto int_term = [&](int bound_words) -> std::string {
    std::vector<std::string> terms{"1", "2"};
    for (const auto& x : in_names) terms.push_back(x);
    for (int i = 0; i < bound_words; ++i) terms.push_back("int(" + words[static_cast<std::size_t>(i)] + ")");
    for (int i = 0; i < bound_words; ++i) terms.push_back("len(" + words[static_cast<std::size_t>(i)] + ")");
    return g.pick(terms);
  };
  auto word_expr = [&](int bound_words) -> std::string {
    switch (g.below(5)) {
      case 0:
        return literal();
      case 1:
        return "word(acc)";
      case 2:
        if (bound_words > 0) return words[static_cast<std::size_t>(g.below(bound_words))];
        return literal();
      case 3:
        if (bound_words > 1) return fmt::format("concat({}, {})", words[0], words[1]);
        return "word(acc + 1)";
      default:
        if (!in_names.empty()) return fmt::format("word({})", g.pick(in_names));
        return literal();
    }
  };
  auto condition = [&](int bound_words) -> std::string {
    switch (g.below(4)) {
      case 0:
        return fmt::format("acc >= {}", 1 + g.below(3));
      case 1:
        if (bound_words > 0) return fmt::format("int({}) == {}", words[static_cast<std::size_t>(g.below(bound_words))], g.below(2));
        return "acc == 0";
      case 2:
        if (!in_names.empty()) return fmt::format("{} == {}", g.pick(in_names), g.below(2));
        return "acc != 1";
      default:
        if (bound_words > 0) return fmt::format("len({}) < {}", words[static_cast<std::size_t>(g.below(bound_words))], 1 + g.below(L));
        return "true";
    }
  };

  // Stages s0..sN in order; jumps only go forward, except the bounded loop
  // inside a "spin" stage.
  const int n_stages = n_queries + 2 + g.below(4);
  std::vector<std::string> kinds;
  for (int i = 0; i < n_queries; ++i) kinds.push_back("query");
  for (int i = n_queries; i < n_stages; ++i) {
    const int k = g.below(opt.loops ? 3 : 2);
    kinds.push_back(k == 0 ? "compute" : k == 1 ? "branch" : "spin");
  }
  std::shuffle(kinds.begin(), kinds.end(), g.rng);

  json nodes = json::object();
  const int n_halts = 1 + g.below(3);
  std::vector<std::string> halts;
  for (int i = 0; i < n_halts; ++i) halts.push_back(fmt::format("h{}", i));
  auto stage = [&](int i) { return i >= n_stages ? halts[0] : fmt::format("s{}", i); };
  auto later = [&](int i) {
    if (g.coin(40)) return g.pick(halts);
    return stage(i + 1 + g.below(std::max(1, n_stages - i)));
  };

  int bound = 0;
  for (int i = 0; i < n_stages; ++i) {
    const auto id = stage(i);
    const auto& k = kinds[static_cast<std::size_t>(i)];
    if (k == "query") {
      json q = {{"kind", "query"}, {"prompt", word_expr(bound)}, {"bind", words[static_cast<std::size_t>(bound)]},
                {"next", stage(i + 1)}};
      if (g.coin(30)) q["tag"] = fmt::format("q{}", bound);
      nodes[id] = q;
      ++bound;
    } else if (k == "compute") {
      nodes[id] = {{"kind", "compute"},
                   {"assign", {{"acc", fmt::format("acc {} {}", g.coin(70) ? "+" : "*", int_term(bound))}}},
                   {"next", stage(i + 1)}};
    } else if (k == "branch") {
      nodes[id] = {{"kind", "branch"}, {"if", condition(bound)}, {"then", stage(i + 1)}, {"else", later(i)}};
    } else {
      // cnt counts up to a small bound: a black-box segment of a few steps.
      const auto loop = id + "_loop";
      const int limit = 2 + g.below(5);
      nodes[id] = {{"kind", "compute"}, {"assign", {{"cnt", "0"}}}, {"next", loop}};
      nodes[loop] = {{"kind", "branch"}, {"if", fmt::format("cnt < {}", limit)}, {"then", id + "_inc"},
                     {"else", stage(i + 1)}};
      nodes[id + "_inc"] = {{"kind", "compute"}, {"assign", {{"cnt", "cnt + 1"}}}, {"next", loop}};
    }
  }
  for (const auto& h : halts) nodes[h] = {{"kind", "halt"}, {"output", word_expr(bound)}};

  return {{"name", fmt::format("random_{}", seed)},
          {"alphabet", {"0", "1"}},
          {"max_answer_len", L},
          {"inputs", inputs},
          {"vars", vars},
          {"entry", "s0"},
          {"nodes", nodes}};
}

// ---------------------------------------------------------------------------

namespace {

struct Walker {
  const Machine& m;
  std::uint64_t max_steps;
  std::uint64_t max_queries;
  std::vector<Word> words;  // non-Stop answers
  BruteResult result;

  struct Sub {
    std::set<Word> outputs;
    bool unknown = false;
  };

  // From a configuration that is about to step.
  Sub walk(Configuration c, std::vector<std::string>& path) {
    for (;;) {
      if (c.steps >= max_steps) return {{}, true};
      auto eff = m.step(c);
      if (auto* k = std::get_if<Continue>(&eff)) {
        c = std::move(k->next);
        continue;
      }
      if (auto* h = std::get_if<Halt>(&eff)) {
        ++result.halts;
        return {{h->output}, false};
      }
      if (std::holds_alternative<Abort>(eff)) {
        ++result.aborts;
        return {};
      }
      auto& q = std::get<Query>(eff);
      if (c.queries >= max_queries) return {{}, true};
      const auto slot = result.queries.size();
      result.queries.push_back({path, q.prompt, false, false});
      Sub all;
      std::vector<Sub> subs;
      for (const auto& w : words) {
        path.push_back(w);
        Sub s = after(q.at, Answer::word(w), path);
        path.pop_back();
        all.outputs.insert(s.outputs.begin(), s.outputs.end());
        all.unknown = all.unknown || s.unknown;
        subs.push_back(std::move(s));
      }
      // Stop always aborts; it never contributes an output.
      auto stop = m.resume(q.at, Answer::stop());
      if (!std::holds_alternative<Abort>(stop)) throw std::logic_error("Stop did not abort");
      ++result.aborts;
      auto& bq = result.queries[slot];
      bq.unknown = all.unknown;
      for (std::size_t i = 0; i < subs.size() && !bq.outputs_differ; ++i) {
        for (std::size_t j = i + 1; j < subs.size(); ++j) {
          const bool i_empty = subs[i].outputs.empty() && !subs[i].unknown;
          const bool j_empty = subs[j].outputs.empty() && !subs[j].unknown;
          if (i_empty || j_empty) continue;  // abort-only branches are not compared
          if (subs[i].outputs != subs[j].outputs) {
            bq.outputs_differ = true;
            break;
          }
        }
      }
      return all;
    }
  }

  Sub after(const Configuration& at, const Answer& a, std::vector<std::string>& path) {
    auto eff = m.resume(at, a);
    if (auto* k = std::get_if<Continue>(&eff)) return walk(std::move(k->next), path);
    if (auto* h = std::get_if<Halt>(&eff)) {
      ++result.halts;
      return {{h->output}, false};
    }
    ++result.aborts;
    return {};
  }
};

}  // namespace

BruteResult brute_explore(const Machine& m, const Input& input, std::uint64_t max_steps, std::uint64_t max_queries) {
  Walker w{m, max_steps, max_queries, all_words(m.alphabet(), m.max_answer_len()), {}};
  std::vector<std::string> path;
  auto top = w.walk(m.initial(input), path);
  w.result.outputs = std::move(top.outputs);
  w.result.unknown = top.unknown;
  return std::move(w.result);
}

std::string brute_outcome(const Machine& m, const Input& input, const std::vector<Answer>& answers,
                          const Answer& tail, std::uint64_t max_steps) {
  auto c = m.initial(input);
  std::size_t next = 0;
  for (;;) {
    if (c.steps >= max_steps) return "step-limit";
    auto eff = m.step(c);
    for (;;) {
      if (auto* k = std::get_if<Continue>(&eff)) {
        c = std::move(k->next);
        break;
      }
      if (auto* h = std::get_if<Halt>(&eff)) return "halt:" + h->output;
      if (std::holds_alternative<Abort>(eff)) return "abort";
      auto& q = std::get<Query>(eff);
      const auto& a = next < answers.size() ? answers[next] : tail;
      ++next;
      eff = m.resume(q.at, a);
    }
  }
}

std::string base2(std::uint64_t v) {
  if (v == 0) return "0";
  std::string s;
  while (v) {
    s.insert(s.begin(), static_cast<char>('0' + (v & 1)));
    v >>= 1;
  }
  return s;
}

CommandResult run_cli(const std::string& args) {
  CommandResult r;
  const auto cmd = fmt::format("'{}' {} 2>/dev/null", cli_path().string(), args);
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace testing
