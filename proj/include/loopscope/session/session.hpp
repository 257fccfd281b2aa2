#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopscope/engine/engine.hpp"

namespace loopscope {

using Message = nlohmann::ordered_json;

enum class SessionState { AwaitingQuery, AwaitingAnswer, Finished };
const char* session_state_name(SessionState s);

/// One live run with a person as the oracle. Message handling for a
/// session is serialized by `mutex`; `stop_requested` may be set from any
/// thread without it.
class Session {
 public:
  Session(std::string id, std::string scenario_id, MachinePtr machine, Input input, Limits limits,
          const std::filesystem::path& transcript_dir);

  const std::string& id() const { return id_; }
  const std::string& scenario_id() const { return scenario_id_; }
  const Machine& machine() const { return *machine_; }
  SessionState state() const { return state_; }
  std::uint64_t seq() const { return seq_; }
  const std::vector<Message>& transcript() const { return transcript_; }
  const std::filesystem::path& transcript_path() const { return transcript_path_; }
  std::chrono::system_clock::time_point started_at() const { return started_at_; }
  /// The run so far (complete once finished).
  const Trace& trace() const { return runner_.trace(); }

  std::mutex mutex;
  std::atomic<bool> stop_requested{false};

 private:
  friend class SessionManager;

  /// Run until the next query or the end; returns the outbound messages.
  std::vector<Message> advance();
  void record(const char* dir, const Message& msg);

  std::string id_;
  std::string scenario_id_;
  MachinePtr machine_;
  Input input_;
  Limits limits_;
  std::filesystem::path transcript_path_;
  std::ofstream transcript_file_;
  std::vector<Message> transcript_;
  std::chrono::system_clock::time_point started_at_;
  std::chrono::steady_clock::time_point query_sent_;
  Runner runner_;
  SessionState state_ = SessionState::AwaitingQuery;
  std::uint64_t seq_ = 0;
  std::uint64_t steps_at_last_query_ = 0;
  std::optional<SimDuration> deadline_;
  bool stop_acknowledged_ = false;
};

struct SessionOptions {
  std::filesystem::path transcript_dir = ".";
  std::filesystem::path scenario_dir;  // empty: the default scenario pack
  Limits limits;
  /// Test hook: runs after an answer is accepted and before the machine
  /// resumes, with the session lock held.
  std::function<void(Session&)> after_accept;
};

/// Wire protocol, one JSON object per message with a "type" field.
///   client: hello{session?, scenario_id, input}  answer{session, seq, word}
///           stop{session}  report{session}
///   server: session{session, state, ...}  segment{session, steps_since_last_query}
///           query{session, seq, prompt, issued_at, deadline?}  halt{session, output}
///           abort{session, reason, note}  report_ready{session, report}
///           report{session, bundle}  transcript{session, messages}  error{code, message}
class SessionManager {
 public:
  explicit SessionManager(SessionOptions options = {});

  /// Parse and handle one client message. Never throws; problems come back
  /// as error messages.
  std::vector<Message> handle_text(std::string_view text);
  std::vector<Message> handle(const nlohmann::json& msg);

  /// Sets the stop flag at once so a running segment ends at its next step.
  void signal_stop(const std::string& session_id);

  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  /// Start a session; returns it with its opening messages. Throws Error for
  /// an unknown scenario and DomainError for a bad input.
  std::pair<std::shared_ptr<Session>, std::vector<Message>> start_session(
      const std::string& scenario_id, const nlohmann::json& input, std::optional<std::string> session_id = {});

 private:
  std::vector<Message> on_answer(Session& s, const nlohmann::json& msg);
  std::vector<Message> on_stop(Session& s, const nlohmann::json& msg);
  std::vector<Message> finish_messages(Session& s);

  SessionOptions options_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

Message error_message(const std::string& code, const std::string& text, const std::string& session = {});

/// Analysis bundle for a finished session: verdict, segments, real-query
/// flags along the path and decisive points. Throws Error when unfinished.
Message finalize_report(const Session& session);

/// Rebuild the run from a transcript file: answers by seq, plus an external
/// stop step when the session was stopped mid-segment.
Trace trace_from_transcript(const std::vector<nlohmann::json>& lines, const Machine& machine);
std::vector<nlohmann::json> read_transcript(const std::filesystem::path& path);

}  // namespace loopscope
