#pragma once

// HTTP + WebSocket front end of TeleopService.
//
//   GET  /state    current snapshot
//   POST /command  apply one command; replies with the new snapshot or an
//                  error event (HTTP 422 on rejection, 400 on bad input)
//   GET  /config   RobotConfig
//   WS   /stream   snapshot on connect, after every applied command and at
//                  every heartbeat
//
// All network I/O runs on one io_context thread, so requests are handled in
// arrival order. Commands go through TeleopService::submit, which is itself
// serialized, so commands from any number of connections form one total order.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <deque>
#include <memory>
#include <set>
#include <string>
#include <thread>

#include "cppr/teleop.hpp"

namespace cppr {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = boost::beast::http;
namespace websocket = boost::beast::websocket;
using tcp = boost::asio::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::chrono::milliseconds heartbeat{1000};
};

class TeleopServer;

namespace detail {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, TeleopServer& server) : ws_(std::move(socket)), server_(server) {}

  void start(http::request<http::string_body> req);

  // Must be called on the io thread.
  void send(std::shared_ptr<const std::string> msg) {
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1 && open_) write_next();
  }

 private:
  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  void read_loop() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->buffer_.consume(self->buffer_.size());  // clients have nothing to say on /stream
      self->read_loop();
    });
  }

  void close();

  websocket::stream<beast::tcp_stream> ws_;
  TeleopServer& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, TeleopServer& server) : stream_(std::move(socket)), server_(server) {}

  void start() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(60));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->shutdown();
      self->handle();
    });
  }

  void handle();

  void reply(http::status status, const std::string& body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, "application/json");
    res->set(http::field::access_control_allow_origin, "*");
    res->keep_alive(req_.keep_alive());
    res->body() = body;
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) return self->shutdown();
      self->read();
    });
  }

  void shutdown() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  TeleopServer& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace detail

class TeleopServer {
 public:
  TeleopServer(TeleopService& service, ServerOptions opts)
      : service_(service), opts_(std::move(opts)), acceptor_(ioc_), heartbeat_(ioc_) {
    const tcp::endpoint ep(net::ip::make_address(opts_.address), opts_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    listener_id_ = service_.subscribe([this](const OrderedJson& msg) {
      if (msg.value("type", "") != "snapshot") return;
      auto text = std::make_shared<const std::string>(msg.dump());
      net::post(ioc_, [this, text] { broadcast(text); });
    });
  }

  ~TeleopServer() {
    stop();
    service_.unsubscribe(listener_id_);
  }

  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Runs the event loop on a background thread.
  void start() {
    accept();
    arm_heartbeat();
    thread_ = std::thread([this] { ioc_.run(); });
  }

  /// Runs the event loop on the calling thread until stop().
  void run() {
    accept();
    arm_heartbeat();
    ioc_.run();
  }

  /// SIGINT/SIGTERM end run().
  void stop_on_signals() {
    signals_.add(SIGINT);
    signals_.add(SIGTERM);
    signals_.async_wait([this](beast::error_code ec, int) {
      if (!ec) ioc_.stop();
    });
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    ioc_.stop();
    if (thread_.joinable()) thread_.join();
  }

  TeleopService& service() { return service_; }

 private:
  friend class detail::WsSession;
  friend class detail::HttpSession;

  void accept() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (!ec) std::make_shared<detail::HttpSession>(std::move(socket), *this)->start();
      if (acceptor_.is_open()) accept();
    });
  }

  void arm_heartbeat() {
    heartbeat_.expires_after(opts_.heartbeat);
    heartbeat_.async_wait([this](beast::error_code ec) {
      if (ec) return;
      broadcast(std::make_shared<const std::string>(service_.snapshot().dump()));
      arm_heartbeat();
    });
  }

  void broadcast(const std::shared_ptr<const std::string>& text) {
    for (const auto& s : sessions_) s->send(text);
  }

  TeleopService& service_;
  ServerOptions opts_;
  net::io_context ioc_{1};
  tcp::acceptor acceptor_;
  net::steady_timer heartbeat_;
  net::signal_set signals_{ioc_};
  std::thread thread_;
  std::atomic<bool> stopped_{false};
  std::set<std::shared_ptr<detail::WsSession>> sessions_;
  int listener_id_ = 0;
};

namespace detail {

inline void WsSession::start(http::request<http::string_body> req) {
  ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
  req_ = std::move(req);
  ws_.async_accept(req_, [self = shared_from_this()](beast::error_code ec) {
    if (ec) return;
    self->open_ = true;
    self->server_.sessions_.insert(self);
    // The initial snapshot is queued ahead of anything broadcast later.
    self->queue_.push_front(std::make_shared<const std::string>(self->server_.service_.snapshot().dump()));
    self->write_next();
    self->read_loop();
  });
}

inline void WsSession::close() {
  if (closed_) return;
  closed_ = true;
  open_ = false;
  server_.sessions_.erase(shared_from_this());
}

inline void HttpSession::handle() {
  const std::string target(req_.target());
  if (websocket::is_upgrade(req_)) {
    if (target != "/stream") return reply(http::status::not_found, R"({"error":"unknown websocket path"})");
    std::make_shared<WsSession>(stream_.release_socket(), server_)->start(std::move(req_));
    return;
  }
  try {
    if (target == "/state" && req_.method() == http::verb::get) {
      return reply(http::status::ok, server_.service_.snapshot().dump());
    }
    if (target == "/config" && req_.method() == http::verb::get) {
      return reply(http::status::ok, to_json(server_.service_.config()).dump());
    }
    if (target == "/command" && req_.method() == http::verb::post) {
      Json body;
      try {
        body = Json::parse(req_.body());
      } catch (const Json::exception& e) {
        return reply(http::status::bad_request,
                     event_json({TeleopEvent::Kind::Error, std::string("malformed JSON: ") + e.what()},
                                server_.service_.state().sequence)
                         .dump());
      }
      const auto cmd = command_from_json(body);
      const auto out = server_.service_.submit(cmd);
      return reply(out.applied ? http::status::ok : http::status::unprocessable_entity, out.response.dump());
    }
    if (target == "/state" || target == "/config" || target == "/command") {
      return reply(http::status::method_not_allowed, R"({"error":"method not allowed"})");
    }
    return reply(http::status::not_found, R"({"error":"not found"})");
  } catch (const std::logic_error& e) {
    return reply(http::status::bad_request,
                 event_json({TeleopEvent::Kind::Error, e.what()}, server_.service_.state().sequence).dump());
  } catch (const Json::exception& e) {
    return reply(http::status::bad_request,
                 event_json({TeleopEvent::Kind::Error, e.what()}, server_.service_.state().sequence).dump());
  } catch (const std::exception& e) {
    return reply(http::status::internal_server_error,
                 event_json({TeleopEvent::Kind::Error, e.what()}, server_.service_.state().sequence).dump());
  }
}

}  // namespace detail

}  // namespace cppr
