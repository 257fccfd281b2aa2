#include "loopscope/session/server.hpp"

#include <fmt/format.h>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <thread>

#include "loopscope/ir/errors.hpp"

namespace loopscope {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

Endpoint Endpoint::parse(std::string_view text) {
  Endpoint ep;
  std::string_view port = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) ep.host = std::string(text.substr(0, colon));
    port = text.substr(colon + 1);
  }
  if (port.empty() || port.size() > 5) throw DomainError("bad address '" + std::string(text) + "'");
  unsigned v = 0;
  for (char c : port) {
    if (c < '0' || c > '9') throw DomainError("bad port in '" + std::string(text) + "'");
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  if (v > 65535) throw DomainError("port out of range in '" + std::string(text) + "'");
  ep.port = static_cast<unsigned short>(v);
  return ep;
}

std::string Endpoint::str() const { return fmt::format("{}:{}", host, port); }

Endpoint resolve_endpoint(const std::optional<std::string>& flag) {
  if (flag) return Endpoint::parse(*flag);
  if (const char* env = std::getenv("LOOPSCOPE_ADDR"); env && *env) return Endpoint::parse(env);
  return Endpoint{};
}

namespace {

std::optional<std::string> stop_target(const std::string& text) {
  auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_object() && j.value("type", "") == "stop" && j.contains("session") && j["session"].is_string())
    return j["session"].get<std::string>();
  return std::nullopt;
}

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket socket, SessionManager& manager, asio::thread_pool& work)
      : socket_(std::move(socket)), manager_(manager), work_(asio::make_strand(work)) {}

  void start() { sniff(); }

  void close() {
    asio::post(socket_.get_executor(), [self = shared_from_this()] {
      beast::error_code ec;
      if (self->ws_)
        self->ws_->next_layer().close(ec);
      else
        self->socket_.close(ec);
    });
  }

 private:
  void sniff() {
    socket_.async_read_some(asio::buffer(chunk_), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
      if (ec) return;
      self->pending_.append(self->chunk_.data(), n);
      const std::string_view get = "GET ";
      const auto k = std::min(self->pending_.size(), get.size());
      if (self->pending_.compare(0, k, get.substr(0, k)) == 0 && k < get.size()) return self->sniff();
      if (self->pending_.compare(0, get.size(), get) == 0)
        self->start_ws();
      else
        self->lines();
    });
  }

  void start_ws() {
    ws_.emplace(std::move(socket_));
    ws_->set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_->async_accept(asio::buffer(pending_), [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->pending_.clear();
      self->read_ws();
    });
  }

  void read_ws() {
    ws_->async_read(frame_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      auto text = beast::buffers_to_string(self->frame_.data());
      self->frame_.consume(self->frame_.size());
      self->on_text(std::move(text));
      self->read_ws();
    });
  }

  void lines() {
    std::size_t nl;
    while ((nl = pending_.find('\n')) != std::string::npos) {
      auto line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) on_text(std::move(line));
    }
    socket_.async_read_some(asio::buffer(chunk_), [self = shared_from_this()](beast::error_code ec, std::size_t n) {
      if (ec) return;
      self->pending_.append(self->chunk_.data(), n);
      self->lines();
    });
  }

  void on_text(std::string text) {
    // Stop takes effect at once, even while this connection's previous
    // message is still running the machine.
    if (auto sid = stop_target(text)) manager_.signal_stop(*sid);
    asio::post(work_, [self = shared_from_this(), text = std::move(text)] {
      for (const auto& m : self->manager_.handle_text(text)) self->send(m.dump());
    });
  }

  void send(std::string s) {
    auto exec = ws_ ? ws_->get_executor() : socket_.get_executor();
    asio::post(exec, [self = shared_from_this(), s = std::move(s)]() mutable {
      if (!self->ws_) s += '\n';
      self->out_.push_back(std::move(s));
      if (self->out_.size() == 1) self->write_next();
    });
  }

  void write_next() {
    auto done = [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->out_.pop_front();
      if (!self->out_.empty()) self->write_next();
    };
    if (ws_) {
      ws_->text(true);
      ws_->async_write(asio::buffer(out_.front()), std::move(done));
    } else {
      asio::async_write(socket_, asio::buffer(out_.front()), std::move(done));
    }
  }

  tcp::socket socket_;
  std::optional<websocket::stream<tcp::socket>> ws_;
  SessionManager& manager_;
  asio::strand<asio::thread_pool::executor_type> work_;
  std::array<char, 4096> chunk_{};
  std::string pending_;
  beast::flat_buffer frame_;
  std::deque<std::string> out_;
};

}  // namespace

struct Server::Impl {
  SessionManager& manager;
  asio::io_context ioc;
  asio::thread_pool work{2};
  tcp::acceptor acceptor;
  unsigned io_threads;
  std::vector<std::thread> threads;
  std::vector<std::weak_ptr<Connection>> connections;
  std::mutex mutex;
  std::condition_variable cv;
  bool stopped = false;

  Impl(SessionManager& m, const Endpoint& ep, unsigned n)
      : manager(m), acceptor(ioc, tcp::endpoint(asio::ip::make_address(ep.host), ep.port)), io_threads(n) {}

  void accept() {
    acceptor.async_accept(asio::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto c = std::make_shared<Connection>(std::move(socket), manager, work);
      {
        std::lock_guard lock(mutex);
        connections.push_back(c);
      }
      c->start();
      accept();
    });
  }
};

Server::Server(SessionManager& manager, const Endpoint& endpoint, unsigned io_threads)
    : impl_(std::make_unique<Impl>(manager, endpoint, std::max(1u, io_threads))) {}

Server::~Server() { stop(); }

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::start() {
  impl_->accept();
  for (unsigned i = 0; i < impl_->io_threads; ++i) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
}

void Server::wait(bool handle_signals) {
  std::optional<asio::signal_set> signals;
  if (handle_signals) {
    signals.emplace(impl_->ioc, SIGINT, SIGTERM);
    signals->async_wait([this](beast::error_code ec, int) {
      if (!ec) {
        std::lock_guard lock(impl_->mutex);
        impl_->stopped = true;
        impl_->cv.notify_all();
      }
    });
  }
  std::unique_lock lock(impl_->mutex);
  impl_->cv.wait(lock, [this] { return impl_->stopped; });
}

void Server::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->mutex);
    impl_->stopped = true;
    impl_->cv.notify_all();
  }
  asio::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
    std::lock_guard lock(impl_->mutex);
    for (auto& w : impl_->connections) {
      if (auto c = w.lock()) c->close();
    }
  });
  impl_->work.join();
  // Let the close handlers run before stopping the loop.
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  impl_->ioc.stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
  impl_->threads.clear();
}

// ---------------------------------------------------------------------------

struct ProtocolClient::Impl {
  asio::io_context ioc;
  tcp::socket socket{ioc};
  std::optional<websocket::stream<tcp::socket>> ws;
  std::thread reader;
  std::mutex mutex;
  std::mutex write_mutex;
  std::condition_variable cv;
  std::deque<nlohmann::json> inbox;
  bool closed = false;

  void push(const std::string& text) {
    auto j = nlohmann::json::parse(text, nullptr, false);
    std::lock_guard lock(mutex);
    inbox.push_back(std::move(j));
    cv.notify_all();
  }
  void mark_closed() {
    std::lock_guard lock(mutex);
    closed = true;
    cv.notify_all();
  }
};

ProtocolClient::ProtocolClient(const std::string& host, unsigned short port, Transport transport)
    : impl_(std::make_unique<Impl>()) {
  auto& im = *impl_;
  tcp::resolver resolver(im.ioc);
  asio::connect(im.socket, resolver.resolve(host, std::to_string(port)));
  if (transport == Transport::WebSocket) {
    im.ws.emplace(std::move(im.socket));
    im.ws->handshake(host, "/");
    im.ws->text(true);
    im.reader = std::thread([&im] {
      try {
        for (;;) {
          beast::flat_buffer b;
          im.ws->read(b);
          im.push(beast::buffers_to_string(b.data()));
        }
      } catch (...) {
      }
      im.mark_closed();
    });
  } else {
    im.reader = std::thread([&im] {
      try {
        asio::streambuf buf;
        for (;;) {
          asio::read_until(im.socket, buf, '\n');
          std::istream in(&buf);
          std::string line;
          std::getline(in, line);
          if (!line.empty()) im.push(line);
        }
      } catch (...) {
      }
      im.mark_closed();
    });
  }
}

ProtocolClient::~ProtocolClient() { close(); }

void ProtocolClient::send(const nlohmann::json& msg) {
  auto& im = *impl_;
  std::lock_guard lock(im.write_mutex);
  // Sync writes run alongside the reader thread's blocking read; Beast
  // allows one reader and one writer at a time on a stream.
  if (im.ws)
    im.ws->write(asio::buffer(msg.dump()));
  else
    asio::write(im.socket, asio::buffer(msg.dump() + "\n"));
}

nlohmann::json ProtocolClient::receive(int timeout_ms) {
  auto& im = *impl_;
  std::unique_lock lock(im.mutex);
  if (!im.cv.wait_for(lock, std::chrono::milliseconds(timeout_ms), [&] { return !im.inbox.empty() || im.closed; }))
    throw Error("timed out waiting for a server message");
  if (im.inbox.empty()) throw Error("connection closed");
  auto j = std::move(im.inbox.front());
  im.inbox.pop_front();
  return j;
}

std::vector<nlohmann::json> ProtocolClient::receive_until(const std::string& type, int timeout_ms) {
  std::vector<nlohmann::json> out;
  for (;;) {
    out.push_back(receive(timeout_ms));
    if (out.back().value("type", "") == type) return out;
  }
}

void ProtocolClient::close() {
  if (!impl_) return;
  auto& im = *impl_;
  beast::error_code ec;
  if (im.ws) {
    im.ws->next_layer().shutdown(tcp::socket::shutdown_both, ec);
    im.ws->next_layer().close(ec);
  } else {
    im.socket.shutdown(tcp::socket::shutdown_both, ec);
    im.socket.close(ec);
  }
  if (im.reader.joinable()) im.reader.join();
}

}  // namespace loopscope
