#include "loopscope/session/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <random>

#include "loopscope/analysis/classify.hpp"
#include "loopscope/analysis/metrics.hpp"
#include "loopscope/analysis/tree.hpp"
#include "loopscope/ir/errors.hpp"
#include "loopscope/ir/json_fields.hpp"
#include "loopscope/scenario/pack.hpp"

namespace loopscope {

namespace fs = std::filesystem;

namespace {

bool valid_session_id(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

std::string new_session_id(std::uint64_t counter) {
  static std::mt19937_64 gen{std::random_device{}()};
  return fmt::format("s{}-{:08x}", counter, static_cast<std::uint32_t>(gen()));
}

Message msg(const char* type, const std::string& session) {
  Message m;
  m["type"] = type;
  m["session"] = session;
  return m;
}

Message ordered(const nlohmann::json& j) { return Message::parse(j.dump()); }

}  // namespace

const char* session_state_name(SessionState s) {
  switch (s) {
    case SessionState::AwaitingQuery:
      return "awaiting-query";
    case SessionState::AwaitingAnswer:
      return "awaiting-answer";
    case SessionState::Finished:
      return "finished";
  }
  return "?";
}

Message error_message(const std::string& code, const std::string& text, const std::string& session) {
  Message m;
  m["type"] = "error";
  if (!session.empty()) m["session"] = session;
  m["code"] = code;
  m["message"] = text;
  return m;
}

Session::Session(std::string id, std::string scenario_id, MachinePtr machine, Input input, Limits limits,
                 const fs::path& transcript_dir)
    : id_(std::move(id)),
      scenario_id_(std::move(scenario_id)),
      machine_(std::move(machine)),
      input_(std::move(input)),
      limits_(limits),
      transcript_path_(transcript_dir / (id_ + ".jsonl")),
      started_at_(std::chrono::system_clock::now()),
      query_sent_(std::chrono::steady_clock::now()),
      runner_(*machine_, input_, limits_, [this] {
        RunHooks h;
        h.stop_flag = &stop_requested;
        return h;
      }()) {
  transcript_file_.open(transcript_path_, std::ios::out | std::ios::trunc);
  if (!transcript_file_) throw Error("cannot write transcript " + transcript_path_.string());
  Message header;
  header["type"] = "header";
  header["session"] = id_;
  header["scenario"] = scenario_id_;
  header["machine"] = machine_->name();
  header["spec_hash"] = hash_hex(machine_->spec_hash());
  header["input"] = ordered(input_to_json(input_, machine_->inputs()));
  header["limits"] = ordered(limits_.to_json());
  header["started_at_ms"] =
      std::chrono::duration_cast<std::chrono::milliseconds>(started_at_.time_since_epoch()).count();
  record("meta", header);
}

void Session::record(const char* dir, const Message& m) {
  Message line;
  line["dir"] = dir;
  line["t_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now() - started_at_)
                     .count();
  line["msg"] = m;
  transcript_.push_back(m);
  transcript_file_ << line.dump() << '\n';
  transcript_file_.flush();
}

std::vector<Message> Session::advance() {
  std::vector<Message> out;
  const Query* q = runner_.advance();
  auto seg = msg("segment", id_);
  seg["steps_since_last_query"] = runner_.steps() - steps_at_last_query_;
  out.push_back(seg);
  if (q) {
    state_ = SessionState::AwaitingAnswer;
    steps_at_last_query_ = runner_.steps();
    deadline_ = q->deadline;
    auto m = msg("query", id_);
    m["seq"] = seq_;
    m["prompt"] = q->prompt;
    m["issued_at"] = to_seconds(runner_.now());
    if (q->deadline) m["deadline"] = to_seconds(*q->deadline);
    if (!q->tag.empty()) m["tag"] = q->tag;
    auto symbols = nlohmann::ordered_json::array();
    for (char ch : machine_->alphabet().symbols()) symbols.push_back(std::string(1, ch));
    m["alphabet"] = std::move(symbols);
    m["max_answer_len"] = machine_->max_answer_len();
    out.push_back(m);
    query_sent_ = std::chrono::steady_clock::now();
    return out;
  }
  state_ = SessionState::Finished;
  const auto& t = runner_.trace();
  if (t.outcome.is_halt()) {
    auto m = msg("halt", id_);
    m["output"] = t.outcome.output;
    out.push_back(m);
  } else {
    auto m = msg("abort", id_);
    m["reason"] = t.outcome.reason;
    if (t.external_stop_step) m["at_step"] = *t.external_stop_step;
    if (t.outcome.reason == "stop") m["seq"] = t.queries.empty() ? 0 : t.queries.back().index;
    m["note"] = "no output; abort excluded from outcome sets";
    out.push_back(m);
  }
  auto ready = msg("report_ready", id_);
  ready["report"] = id_;
  out.push_back(ready);
  return out;
}

SessionManager::SessionManager(SessionOptions options) : options_(std::move(options)) {
  if (options_.scenario_dir.empty()) options_.scenario_dir = default_scenario_dir();
  std::error_code ec;
  fs::create_directories(options_.transcript_dir, ec);
}

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, s] : sessions_) ids.push_back(id);
  return ids;
}

void SessionManager::signal_stop(const std::string& id) {
  if (auto s = find(id)) s->stop_requested.store(true);
}

std::pair<std::shared_ptr<Session>, std::vector<Message>> SessionManager::start_session(
    const std::string& scenario_id, const nlohmann::json& input_json, std::optional<std::string> session_id) {
  auto entry = load_scenario(scenario_id, options_.scenario_dir);
  nlohmann::json in = input_json;
  if (in.is_null()) in = entry.input.is_null() ? nlohmann::json::object() : entry.input;
  Input input = input_from_json(in, entry.machine->inputs());

  std::shared_ptr<Session> s;
  {
    std::lock_guard lock(mutex_);
    std::string id = session_id ? *session_id : new_session_id(counter_++);
    if (sessions_.count(id)) throw Error("session '" + id + "' already exists");
    s = std::make_shared<Session>(id, scenario_id, entry.machine, std::move(input), options_.limits,
                                  options_.transcript_dir);
    sessions_[id] = s;
  }
  std::lock_guard lock(s->mutex);
  auto started = msg("session", s->id());
  started["scenario_id"] = scenario_id;
  started["machine"] = s->machine().name();
  started["spec_hash"] = hash_hex(s->machine().spec_hash());
  started["input"] = ordered(in);
  s->record("out", started);
  std::vector<Message> out{started};
  for (auto& m : s->advance()) {
    s->record("out", m);
    out.push_back(std::move(m));
  }
  return {s, std::move(out)};
}

std::vector<Message> SessionManager::handle_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    return {error_message("bad-message", std::string("not JSON: ") + e.what())};
  }
  return handle(j);
}

std::vector<Message> SessionManager::handle(const nlohmann::json& m) {
  if (!m.is_object() || !m.contains("type") || !m["type"].is_string())
    return {error_message("bad-message", "expected an object with a \"type\" field")};
  const auto type = m["type"].get<std::string>();
  const auto sid = m.contains("session") && m["session"].is_string() ? m["session"].get<std::string>() : "";
  try {
    if (type == "hello") {
      if (!sid.empty()) {
        if (auto s = find(sid)) {
          std::lock_guard lock(s->mutex);
          auto t = msg("transcript", sid);
          t["state"] = session_state_name(s->state());
          t["messages"] = s->transcript();
          return {t};
        }
        if (!valid_session_id(sid)) return {error_message("bad-message", "session ids use letters, digits, - and _")};
      }
      if (!m.contains("scenario_id") || !m["scenario_id"].is_string())
        return {error_message("bad-message", "hello needs a scenario_id")};
      const nlohmann::json input = m.contains("input") ? m["input"] : nlohmann::json();
      try {
        auto [s, out] = start_session(m["scenario_id"].get<std::string>(), input,
                                      sid.empty() ? std::nullopt : std::optional<std::string>(sid));
        return out;
      } catch (const DomainError& e) {
        return {error_message("bad-input", e.what())};
      } catch (const SpecError& e) {
        return {error_message("bad-scenario", e.what())};
      } catch (const Error& e) {
        return {error_message("unknown-scenario", e.what())};
      }
    }
    auto s = find(sid);
    if (!s) return {error_message("unknown-session", "no session '" + sid + "'", sid)};
    if (type == "answer") return on_answer(*s, m);
    if (type == "stop") {
      s->stop_requested.store(true);
      return on_stop(*s, m);
    }
    if (type == "report") {
      std::lock_guard lock(s->mutex);
      if (s->state() != SessionState::Finished)
        return {error_message("not-finished", "the session is still running", sid)};
      auto r = msg("report", sid);
      r["bundle"] = finalize_report(*s);
      return {r};
    }
    return {error_message("bad-message", "unknown message type '" + type + "'", sid)};
  } catch (const std::exception& e) {
    return {error_message("internal", e.what(), sid)};
  }
}

std::vector<Message> SessionManager::on_answer(Session& s, const nlohmann::json& m) {
  std::lock_guard lock(s.mutex);
  const auto& sid = s.id();
  if (s.state_ == SessionState::Finished) return {error_message("finished", "the session has finished", sid)};
  if (!m.contains("seq") || !m["seq"].is_number_unsigned())
    return {error_message("bad-message", "answer needs a non-negative seq", sid)};
  const auto seq = m["seq"].get<std::uint64_t>();
  if (s.state_ != SessionState::AwaitingAnswer || seq != s.seq_)
    return {error_message("seq-mismatch", fmt::format("expected seq {}, got {}", s.seq_, seq), sid)};
  if (!m.contains("word") || !m["word"].is_string())
    return {error_message("bad-message", "answer needs a word", sid)};
  const auto word = m["word"].get<std::string>();
  if (!s.machine().in_answer_space(word))
    return {error_message("bad-word", fmt::format("'{}' is outside the answer space", word), sid)};
  // A stop that is already on its way wins.
  if (s.stop_requested.load()) return {error_message("stopping", "a stop is pending for this session", sid)};

  Message accepted = ordered(m);
  s.record("in", accepted);
  if (options_.after_accept) options_.after_accept(s);
  const auto latency = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                            s.query_sent_);
  s.runner_.answer(OracleResponse{Answer::word(word), SimDuration{latency.count()}, {"live"}});
  ++s.seq_;
  s.state_ = SessionState::AwaitingQuery;
  std::vector<Message> out;
  const auto& q = s.runner_.trace().queries.back();
  if (q.late) {
    auto late = msg("late", sid);
    late["seq"] = q.index;
    late["note"] = "answered after the advisory deadline; accepted";
    out.push_back(late);
  }
  if (s.runner_.finished()) {
    // Cannot happen for a word answer, but keep the state machine total.
    s.state_ = SessionState::Finished;
  } else {
    for (auto& x : s.advance()) out.push_back(std::move(x));
  }
  for (const auto& x : out) s.record("out", x);
  return out;
}

std::vector<Message> SessionManager::on_stop(Session& s, const nlohmann::json& m) {
  std::lock_guard lock(s.mutex);
  const auto& sid = s.id();
  if (s.state_ == SessionState::Finished) {
    // A stop that already ended a running segment is answered by that abort.
    if (s.runner_.trace().external_stop_step && !s.stop_acknowledged_) {
      s.stop_acknowledged_ = true;
      s.record("in", ordered(m));
      return {};
    }
    return {error_message("finished", "the session has finished", sid)};
  }
  s.record("in", ordered(m));
  std::vector<Message> out;
  if (s.state_ == SessionState::AwaitingAnswer) {
    s.runner_.answer(OracleResponse{Answer::stop(), SimDuration{0}, {"live", "stop"}});
    ++s.seq_;
    out = s.advance();
  } else {
    out = s.advance();
  }
  s.stop_acknowledged_ = true;
  for (const auto& x : out) s.record("out", x);
  return out;
}

Message finalize_report(const Session& s) {
  if (s.state() != SessionState::Finished) throw Error("session " + s.id() + " has not finished");
  const auto& t = s.trace();
  const auto& m = s.machine();
  Message b;
  b["session"] = s.id();
  b["scenario"] = s.scenario_id();
  b["machine"] = m.name();
  b["spec_hash"] = hash_hex(m.spec_hash());
  b["limits"] = ordered(t.limits.to_json());
  b["input"] = ordered(t.input);
  b["outcome"] = t.outcome.str();

  ClassifyOptions opt;
  opt.limits = t.limits;
  const auto verdict = classify_setup(m, opt);
  b["class"] = setup_class_name(verdict.cls);
  b["conclusive"] = verdict.conclusive;

  const auto seg = segment_metrics(t);
  b["segments"] = segment_json(seg);
  b["strip"] = segment_strip(seg.segments);

  const auto tree = build_tree(m, input_of(t, m), t.limits);
  std::vector<Answer> answers;
  for (const auto& q : t.queries) answers.push_back(q.answer);
  const auto visited = tree.follow(answers);
  auto queries = Message::array();
  for (const auto& q : t.queries) {
    Message jq;
    jq["seq"] = q.index;
    jq["prompt"] = q.prompt;
    jq["answer"] = q.answer.is_stop() ? "!" : q.answer.word();
    if (q.index < visited.size()) {
      const auto flags = tree.real_query(visited[q.index]);
      jq["real"] = flags.is_real;
      jq["real_conclusive"] = flags.conclusive;
    }
    queries.push_back(jq);
  }
  b["queries"] = queries;

  auto notes = Message::array();
  if (t.outcome.is_halt()) {
    const auto oracle = replay_oracle(t);
    b["decisive"] = decisive_json(decisive_points(t, m, &oracle, t.limits));
  } else {
    b["decisive"] = Message{{"decisive", Message::array()}};
    notes.push_back("no output; abort excluded from outcome sets");
  }
  for (const auto& n : verdict.notes) notes.push_back(n);
  b["notes"] = notes;
  return b;
}

std::vector<nlohmann::json> read_transcript(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read transcript " + path.string());
  std::vector<nlohmann::json> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      lines.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw SpecError(fmt::format("{} line {}", path.filename().string(), n), e.what());
    }
  }
  return lines;
}

Trace trace_from_transcript(const std::vector<nlohmann::json>& lines, const Machine& machine) {
  if (lines.empty() || lines[0].value("dir", "") != "meta") throw Error("transcript lacks its header line");
  const auto& h = lines[0]["msg"];
  Trace t;
  t.spec_hash = std::stoull(h.at("spec_hash").get<std::string>(), nullptr, 16);
  t.machine = h.at("machine").get<std::string>();
  t.input = h.at("input");
  t.limits = Limits::from_json(h.at("limits"));
  std::optional<std::uint64_t> stop_seq;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const auto& m = l.at("msg");
    const auto type = m.value("type", "");
    if (l.value("dir", "") == "in" && type == "answer") {
      TraceQuery q;
      q.index = t.queries.size();
      q.answer = Answer::word(m.at("word").get<std::string>());
      t.queries.push_back(std::move(q));
    } else if (l.value("dir", "") == "out" && type == "abort") {
      if (m.contains("at_step")) t.external_stop_step = m["at_step"].get<std::uint64_t>();
      if (m.value("reason", "") == "stop") stop_seq = m.value("seq", std::uint64_t{0});
    }
  }
  if (stop_seq) {
    TraceQuery q;
    q.index = t.queries.size();
    q.answer = Answer::stop();
    t.queries.push_back(std::move(q));
  }
  return replay(t, machine);
}

}  // namespace loopscope
