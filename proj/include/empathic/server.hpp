#pragma once
// HTTP + WebSocket front end for SessionService.
//
//   GET  /health                   {"status":"ok","protocol_version":1}
//   GET  /sessions                 {"sessions":[id...]}
//   POST /sessions                 body (optional) {"condition":..., "seed":...} -> 201 {"session_id":id}
//   GET  /sessions/{id}/state      state frame with transcript
//   WS   /ws?session_id={id}&role=wizard|adapter
//
// On connect the socket receives a state frame carrying the full transcript.
// At most one wizard connection per session; a second one is answered with a
// WizardAlreadyConnected error frame and closed.

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "empathic/session.hpp"

namespace empathic {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  int io_threads = 1;
  int worker_threads = 2;  // session handling, including backend calls
};

class Server {
 public:
  Server(SessionConfig base_config, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts serving on background threads. Throws Error when the
  // address cannot be bound.
  void start();
  void stop();
  // Blocks until stop() is called.
  void wait();

  unsigned short port() const;
  SessionService& service();

  // Same as POST /sessions. Throws InvalidConfig, ScriptLoadError.
  std::string create_session(const nlohmann::json& overrides = nlohmann::json::object());

  struct Impl;  // opaque; defined in server.cpp

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace empathic
