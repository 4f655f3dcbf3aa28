#include "empathic/server.hpp"

#include <atomic>
#include <deque>
#include <map>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "empathic/errors.hpp"
#include "empathic/wire.hpp"

namespace empathic {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

struct Target {
  std::string path;
  std::map<std::string, std::string> query;
};

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::string url_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size() && hex_value(s[i + 1]) >= 0 && hex_value(s[i + 2]) >= 0) {
      out.push_back(static_cast<char>(hex_value(s[i + 1]) * 16 + hex_value(s[i + 2])));
      i += 2;
    } else if (s[i] == '+') {
      out.push_back(' ');
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

Target parse_target(std::string_view target) {
  Target t;
  const auto q = target.find('?');
  t.path = std::string(target.substr(0, q));
  if (q == std::string_view::npos) return t;
  const std::string query(target.substr(q + 1));
  std::size_t pos = 0;
  while (pos <= query.size()) {
    auto amp = query.find('&', pos);
    if (amp == std::string::npos) amp = query.size();
    const auto pair = std::string_view(query).substr(pos, amp - pos);
    const auto eq = pair.find('=');
    if (eq != std::string_view::npos) t.query[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
    pos = amp + 1;
  }
  return t;
}

}  // namespace

class WsConnection;

// Per-session fan-out and ordering. Everything touching a hub runs on its
// strand, so frames reach every socket in processing order.
struct Hub {
  explicit Hub(net::thread_pool& pool) : strand(net::make_strand(pool)) {}
  net::strand<net::thread_pool::executor_type> strand;
  std::vector<std::weak_ptr<WsConnection>> connections;
  std::weak_ptr<WsConnection> wizard;
  void broadcast(const std::string& text);
};

struct Server::Impl {
  Impl(SessionConfig base, ServerOptions opts)
      : base_config(std::move(base)),
        options(std::move(opts)),
        workers(static_cast<std::size_t>(std::max(1, options.worker_threads))),
        acceptor(ioc) {}

  SessionConfig base_config;
  ServerOptions options;
  net::io_context ioc;
  net::thread_pool workers;
  tcp::acceptor acceptor;
  std::vector<std::thread> io_threads;
  SessionService service;
  std::mutex hubs_mutex;
  std::map<std::string, std::shared_ptr<Hub>> hubs;
  std::atomic<std::uint64_t> created{0};
  std::mutex stop_mutex;
  std::condition_variable stop_cv;
  bool stopped = false;

  std::shared_ptr<Hub> hub(const std::string& id) {
    std::lock_guard lock(hubs_mutex);
    const auto it = hubs.find(id);
    return it == hubs.end() ? nullptr : it->second;
  }

  std::string create_session(const nlohmann::json& overrides);
  void do_accept();
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, Server::Impl& server, std::string session_id, std::string role)
      : ws_(std::move(socket)), server_(server), session_id_(std::move(session_id)), role_(std::move(role)) {}

  void accept(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  // Thread-safe; frames are written in call order.
  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      if (self->closing_) return;
      self->outbox_.push_back(std::move(text));
      if (self->outbox_.size() == 1) self->do_write();
    });
  }

  void send_and_close(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      if (self->closing_) return;
      self->outbox_.push_back(std::move(text));
      self->close_after_flush_ = true;
      if (self->outbox_.size() == 1) self->do_write();
    });
  }

  const std::string& role() const { return role_; }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    auto hub = server_.hub(session_id_);
    if (!hub) {
      send_and_close(
          make_error_frame(session_id_, wire_error::kUnknownSession, "unknown session '" + session_id_ + "'", 0)
              .dump());
      return;
    }
    hub_ = hub;
    net::post(hub->strand, [self = shared_from_this(), hub] {
      if (self->role_ == "wizard") {
        if (!hub->wizard.expired()) {
          self->send_and_close(make_error_frame(self->session_id_, wire_error::kWizardAlreadyConnected,
                                                "a wizard is already connected to this session", 0)
                                   .dump());
          return;
        }
        hub->wizard = self;
      }
      hub->connections.push_back(self);
      try {
        self->send(self->server_.service.state_frame(self->session_id_, true).dump());
      } catch (const UnknownSession& e) {
        self->send_and_close(make_error_frame(self->session_id_, wire_error::kUnknownSession, e.what(), 0).dump());
        return;
      }
      net::post(self->ws_.get_executor(), [self] { self->do_read(); });
    });
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      detach();
      return;
    }
    auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    net::post(hub_->strand, [self = shared_from_this(), text = std::move(text)] { self->handle(text); });
    do_read();
  }

  // Runs on the hub strand.
  void handle(const std::string& text) {
    auto& service = server_.service;
    std::optional<nlohmann::ordered_json> reply;
    try {
      const auto frame = parse_inbound(text);
      if (!frame.session_id.empty() && frame.session_id != session_id_) {
        throw WireError(wire_error::kBadFrame, "frame session_id does not match this connection");
      }
      if (const auto* m = std::get_if<SpeechFinalMsg>(&frame.body)) {
        reply = service.on_speech_final(session_id_, m->text, m->span);
      } else if (const auto* m = std::get_if<AffectFrameMsg>(&frame.body)) {
        reply = service.on_affect_frame(session_id_, m->frame);
      } else if (const auto* m = std::get_if<WizardActionMsg>(&frame.body)) {
        reply = service.on_wizard_message(session_id_, m->action);
      }
    } catch (const WireError& e) {
      reply = make_error_frame(session_id_, e.code(), e.what(), 0);
    } catch (const UnknownSession& e) {
      reply = make_error_frame(session_id_, wire_error::kUnknownSession, e.what(), 0);
    } catch (const std::exception& e) {
      spdlog::error("session {}: handler failed: {}", session_id_, e.what());
      reply = make_error_frame(session_id_, "InternalError", e.what(), 0);
    }
    if (reply) send(reply->dump());
  }

  void do_write() {
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->on_write(ec);
    });
  }

  void on_write(beast::error_code ec) {
    if (ec) {
      closing_ = true;
      outbox_.clear();
      detach();
      return;
    }
    outbox_.pop_front();
    if (!outbox_.empty()) {
      do_write();
    } else if (close_after_flush_) {
      closing_ = true;
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }
  }

  void detach() {
    if (!hub_) return;
    net::post(hub_->strand, [self = shared_from_this(), hub = hub_] {
      auto& conns = hub->connections;
      conns.erase(std::remove_if(conns.begin(), conns.end(),
                                 [&](const auto& w) {
                                   auto p = w.lock();
                                   return !p || p == self;
                                 }),
                  conns.end());
      if (hub->wizard.lock() == self) hub->wizard.reset();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  Server::Impl& server_;
  std::string session_id_;
  std::string role_;
  std::shared_ptr<Hub> hub_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool close_after_flush_ = false;
  bool closing_ = false;
};

void Hub::broadcast(const std::string& text) {
  for (const auto& w : connections) {
    if (auto c = w.lock()) c->send(text);
  }
}

namespace {

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, Server::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void run() {
    parser_.emplace();
    parser_->body_limit(1 << 20);
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, *parser_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  void on_read(beast::error_code ec) {
    if (ec) return;
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const auto target = parse_target(std::string_view(req.target().data(), req.target().size()));
      if (target.path != "/ws") {
        respond(http::status::not_found, {{"error", "websocket endpoint is /ws"}}, req);
        return;
      }
      const auto it = target.query.find("session_id");
      const auto role = target.query.count("role") ? target.query.at("role") : std::string("adapter");
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), server_,
                                     it == target.query.end() ? std::string() : it->second, role)
          ->accept(std::move(req));
      return;
    }
    route(req);
  }

  void route(const http::request<http::string_body>& req) {
    const auto target = parse_target(std::string_view(req.target().data(), req.target().size()));
    const auto& path = target.path;
    try {
      if (path == "/health" && req.method() == http::verb::get) {
        respond(http::status::ok, {{"status", "ok"}, {"protocol_version", kProtocolVersion}}, req);
      } else if (path == "/sessions" && req.method() == http::verb::get) {
        respond(http::status::ok, {{"sessions", server_.service.session_ids()}}, req);
      } else if (path == "/sessions" && req.method() == http::verb::post) {
        nlohmann::json body = nlohmann::json::object();
        if (!req.body().empty()) body = nlohmann::json::parse(req.body());
        respond(http::status::created, {{"session_id", server_.create_session(body)}}, req);
      } else if (path.rfind("/sessions/", 0) == 0 && path.size() > 16 && path.substr(path.size() - 6) == "/state" &&
                 req.method() == http::verb::get) {
        const auto id = path.substr(10, path.size() - 16);
        respond(http::status::ok, server_.service.state_frame(id, true), req);
      } else {
        respond(http::status::not_found, {{"error", "no route for " + path}}, req);
      }
    } catch (const UnknownSession& e) {
      respond(http::status::not_found, {{"error", e.what()}}, req);
    } catch (const nlohmann::json::exception& e) {
      respond(http::status::bad_request, {{"error", e.what()}}, req);
    } catch (const Error& e) {
      respond(http::status::bad_request, {{"error", e.what()}}, req);
    }
  }

  void respond(http::status status, const nlohmann::ordered_json& body, const http::request<http::string_body>& req) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req.version());
    res->set(http::field::content_type, "application/json");
    res->keep_alive(false);
    res->body() = body.dump();
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  Server::Impl& server_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace

std::string Server::Impl::create_session(const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw InvalidConfig("session overrides must be a JSON object");
  auto config = base_config;
  const auto n = created.fetch_add(1);
  config.seed = base_config.seed + n;
  if (const auto it = overrides.find("seed"); it != overrides.end()) {
    if (!it->is_number_unsigned()) throw InvalidConfig("seed must be a non-negative integer");
    config.seed = it->get<std::uint64_t>();
  }
  if (const auto it = overrides.find("condition"); it != overrides.end()) {
    const auto c = it->is_string() ? parse_condition(it->get<std::string>()) : std::nullopt;
    if (!c) throw InvalidConfig("condition must be 'backchannel' or 'empathic'");
    config.condition = *c;
  }
  auto hub = std::make_shared<Hub>(workers);
  const auto id = service.start_session(config, [hub](const nlohmann::ordered_json& frame) { hub->broadcast(frame.dump()); });
  {
    std::lock_guard lock(hubs_mutex);
    hubs.emplace(id, hub);
  }
  spdlog::info("session {} started ({} condition, seed {})", id, to_string(config.condition), config.seed);
  return id;
}

void Server::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
      if (!acceptor.is_open()) return;
    } else {
      std::make_shared<HttpConnection>(std::move(socket), *this)->run();
    }
    do_accept();
  });
}

Server::Server(SessionConfig base_config, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(base_config), std::move(options))) {
  check_config(impl_->base_config);
}

Server::~Server() { stop(); }

void Server::start() {
  auto& im = *impl_;
  beast::error_code ec;
  const auto address = net::ip::make_address(im.options.address, ec);
  if (ec) throw Error("bad listen address '" + im.options.address + "'");
  const tcp::endpoint endpoint(address, im.options.port);
  im.acceptor.open(endpoint.protocol(), ec);
  if (!ec) im.acceptor.set_option(net::socket_base::reuse_address(true), ec);
  if (!ec) im.acceptor.bind(endpoint, ec);
  if (!ec) im.acceptor.listen(net::socket_base::max_listen_connections, ec);
  if (ec) throw Error("cannot listen on " + im.options.address + ":" + std::to_string(im.options.port) + ": " + ec.message());
  im.do_accept();
  for (int i = 0; i < std::max(1, im.options.io_threads); ++i) {
    im.io_threads.emplace_back([&im] { im.ioc.run(); });
  }
  spdlog::info("listening on {}:{}", im.options.address, port());
}

void Server::stop() {
  auto& im = *impl_;
  {
    std::lock_guard lock(im.stop_mutex);
    if (im.stopped) return;
    im.stopped = true;
  }
  net::post(im.ioc, [&im] {
    beast::error_code ignored;
    im.acceptor.close(ignored);
  });
  im.ioc.stop();
  for (auto& t : im.io_threads) {
    if (t.joinable()) t.join();
  }
  im.workers.join();
  im.stop_cv.notify_all();
}

void Server::wait() {
  std::unique_lock lock(impl_->stop_mutex);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
}

unsigned short Server::port() const {
  beast::error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

SessionService& Server::service() { return impl_->service; }

std::string Server::create_session(const nlohmann::json& overrides) { return impl_->create_session(overrides); }

}  // namespace empathic
