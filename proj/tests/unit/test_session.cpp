#include <doctest.h>

#include <filesystem>
#include <thread>

#include "loopscope/ir/errors.hpp"
#include "loopscope/session/server.hpp"
#include "loopscope/session/session.hpp"
#include "support.hpp"

using namespace loopscope;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("loopscope-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SessionOptions options(const std::string& name, fs::path scenarios = testing::scenario_dir()) {
  SessionOptions o;
  o.transcript_dir = temp_dir(name);
  o.scenario_dir = std::move(scenarios);
  return o;
}

std::string type_of(const Message& m) { return m["type"].get<std::string>(); }

std::vector<std::string> types(const std::vector<Message>& ms) {
  std::vector<std::string> out;
  for (const auto& m : ms) out.push_back(type_of(m));
  return out;
}

json answer(const std::string& sid, std::uint64_t seq, const std::string& word) {
  return {{"type", "answer"}, {"session", sid}, {"seq", seq}, {"word", word}};
}

}  // namespace

TEST_CASE("route-involved session runs to its halt") {
  SessionManager mgr(options("involved"));
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 1}, {"dest", 2}}}});
  REQUIRE(types(out) == std::vector<std::string>{"session", "segment", "query"});
  const auto sid = out[0]["session"].get<std::string>();
  CHECK(out[2]["prompt"] == "1");
  CHECK(out[2]["seq"] == 0);
  CHECK(out[2]["alphabet"] == Message::array({"0", "1"}));

  out = mgr.handle(answer(sid, 0, "0"));
  CHECK(types(out) == std::vector<std::string>{"segment", "query"});
  CHECK(out[0]["steps_since_last_query"] == 1);
  out = mgr.handle(answer(sid, 1, "1"));
  out = mgr.handle(answer(sid, 2, "1"));
  REQUIRE(types(out) == std::vector<std::string>{"segment", "halt", "report_ready"});
  CHECK(out[1]["output"] == "01");

  auto rep = mgr.handle({{"type", "report"}, {"session", sid}});
  REQUIRE(type_of(rep.at(0)) == "report");
  const auto& bundle = rep[0]["bundle"];
  CHECK(bundle["outcome"] == "halt:01");
  CHECK(bundle["class"] == "InvolvedInteraction");
  CHECK(bundle["decisive"]["decisive"] == Message::array({1, 2}));
  CHECK(bundle["strip"] == "[]?[#]?[#]?[]");
}

TEST_CASE("a session without queries halts at once") {
  SessionManager mgr(options("noquery", testing::fixture_dir()));
  const auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "no-query"}, {"input", {{"x", 1}}}});
  CHECK(types(out) == std::vector<std::string>{"session", "segment", "halt", "report_ready"});
}

TEST_CASE("bad hello messages") {
  SessionManager mgr(options("bad"));
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 9}, {"dest", 0}}}});
  CHECK(out.at(0)["code"] == "bad-input");
  out = mgr.handle({{"type", "hello"}, {"scenario_id", "nope"}});
  CHECK(out.at(0)["code"] == "unknown-scenario");
  CHECK(mgr.handle_text("{not json").at(0)["code"] == "bad-message");
  CHECK(mgr.handle_text("{\"type\": \"dance\"}").at(0)["type"] == "error");
  CHECK(mgr.handle({{"type", "answer"}, {"session", "ghost"}, {"seq", 0}, {"word", "1"}}).at(0)["code"] ==
        "unknown-session");
}

TEST_CASE("wrong seq and bad words leave the session unchanged") {
  SessionManager mgr(options("seq"));
  const auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 1}, {"dest", 2}}}});
  const auto sid = out[0]["session"].get<std::string>();
  const auto s = mgr.find(sid);
  const auto before = s->transcript().size();
  CHECK(mgr.handle(answer(sid, 3, "0")).at(0)["code"] == "seq-mismatch");
  CHECK(mgr.handle(answer(sid, 0, "012")).at(0)["code"] == "bad-word");
  CHECK(mgr.handle(answer(sid, 0, "2")).at(0)["code"] == "bad-word");
  CHECK(s->seq() == 0);
  CHECK(s->state() == SessionState::AwaitingAnswer);
  CHECK(s->transcript().size() == before);
  CHECK(type_of(mgr.handle(answer(sid, 0, "0")).at(1)) == "query");
  CHECK(mgr.handle({{"type", "report"}, {"session", sid}}).at(0)["code"] == "not-finished");
}

TEST_CASE("stop while a segment is running ends it at the next step") {
  auto opt = options("midstop", testing::fixture_dir());
  opt.after_accept = [](Session& s) { s.stop_requested.store(true); };
  SessionManager mgr(opt);
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "long-segment"}});
  const auto sid = out[0]["session"].get<std::string>();
  REQUIRE(type_of(out.back()) == "query");
  out = mgr.handle(answer(sid, 0, "1"));
  REQUIRE(types(out) == std::vector<std::string>{"segment", "abort", "report_ready"});
  CHECK(out[1]["reason"] == "external-stop");
  CHECK(out[1].contains("at_step"));

  // The stop message that raced the segment is absorbed once.
  CHECK(mgr.handle({{"type", "stop"}, {"session", sid}}).empty());
  CHECK(mgr.handle({{"type", "stop"}, {"session", sid}}).at(0)["code"] == "finished");

  const auto s = mgr.find(sid);
  const auto lines = read_transcript(s->transcript_path());
  const auto rebuilt = trace_from_transcript(lines, s->machine());
  const auto again = replay(rebuilt, s->machine());
  CHECK(again.outcome.kind == OutcomeKind::Abort);
  CHECK(again.steps == s->trace().steps);

  const auto rep = mgr.handle({{"type", "report"}, {"session", sid}}).at(0)["bundle"];
  CHECK(rep["outcome"] == "abort");
  CHECK(rep["notes"][0] == "no output; abort excluded from outcome sets");
}

TEST_CASE("stop at a query aborts") {
  SessionManager mgr(options("stop"));
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 0}, {"dest", 0}}}});
  const auto sid = out[0]["session"].get<std::string>();
  out = mgr.handle({{"type", "stop"}, {"session", sid}});
  REQUIRE(types(out) == std::vector<std::string>{"segment", "abort", "report_ready"});
  CHECK(out[1]["reason"] == "stop");
  CHECK(mgr.handle(answer(sid, 0, "0")).at(0)["code"] == "finished");
}

TEST_CASE("transcripts replay to the same run") {
  SessionManager mgr(options("replay"));
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 3}, {"dest", 1}}}});
  const auto sid = out[0]["session"].get<std::string>();
  std::uint64_t seq = 0;
  while (type_of(out.back()) == "query") out = mgr.handle(answer(sid, seq++, "01"));
  const auto s = mgr.find(sid);
  const auto t = trace_from_transcript(read_transcript(s->transcript_path()), s->machine());
  const auto r = replay(t, s->machine());
  CHECK(r.outcome == s->trace().outcome);
  REQUIRE(r.queries.size() == s->trace().queries.size());
  for (std::size_t i = 0; i < r.queries.size(); ++i) CHECK(r.queries[i].answer == s->trace().queries[i].answer);
}

TEST_CASE("endpoint parsing") {
  CHECK(Endpoint::parse("0.0.0.0:9000").port == 9000);
  CHECK(Endpoint::parse(":81").host == "127.0.0.1");
  CHECK(Endpoint::parse("82").port == 82);
  CHECK_THROWS_AS(Endpoint::parse("host:notaport"), DomainError);
  CHECK(resolve_endpoint(std::string("1.2.3.4:5")).str() == "1.2.3.4:5");
}

TEST_CASE("NDJSON and WebSocket transports carry the same protocol") {
  SessionManager mgr(options("server"));
  Server server(mgr, Endpoint::parse("127.0.0.1:0"));
  server.start();
  for (auto transport : {ProtocolClient::Transport::Ndjson, ProtocolClient::Transport::WebSocket}) {
    CAPTURE(static_cast<int>(transport));
    ProtocolClient c("127.0.0.1", server.port(), transport);
    c.send({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 1}, {"dest", 2}}}});
    auto msgs = c.receive_until("query");
    const auto sid = msgs.front()["session"].get<std::string>();
    for (std::uint64_t seq = 0; seq < 3; ++seq) {
      c.send(answer(sid, seq, seq == 0 ? "0" : "1"));
      msgs = c.receive_until(seq < 2 ? "query" : "report_ready");
    }
    CHECK(msgs[msgs.size() - 2]["output"] == "01");
    c.send({{"type", "report"}, {"session", sid}});
    CHECK(c.receive_until("report").back()["bundle"]["outcome"] == "halt:01");
    c.close();
  }
  server.stop();
}

TEST_CASE("concurrent duplicate answers: exactly one is accepted") {
  SessionManager mgr(options("dupes"));
  auto out = mgr.handle({{"type", "hello"}, {"scenario_id", "route-involved"}, {"input", {{"origin", 1}, {"dest", 2}}}});
  const auto sid = out[0]["session"].get<std::string>();
  std::atomic<int> accepted{0}, rejected{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      const auto r = mgr.handle(answer(sid, 0, "0"));
      (type_of(r.at(0)) == "error" ? rejected : accepted)++;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(accepted == 1);
  CHECK(rejected == 7);
  CHECK(mgr.find(sid)->seq() == 1);
}
