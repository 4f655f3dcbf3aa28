#include <chrono>
#include <optional>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include "empathic/server.hpp"

using namespace empathic;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using json = nlohmann::json;

namespace {

const std::string kConfigDir = EMPATHIC_CONFIG_DIR;

SessionConfig base_config() {
  SessionConfig c;
  c.script_path = kConfigDir + "/default_script.json";
  c.backend.kind = BackendKind::Mock;
  c.backend.rules_path = kConfigDir + "/mock_rules.json";
  c.seed = 3;
  return c;
}

struct HttpResult {
  int status = 0;
  json body;
};

HttpResult request(unsigned short port, http::verb verb, const std::string& target, const std::string& body = "") {
  net::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.connect(tcp::endpoint(net::ip::make_address("127.0.0.1"), port));
  http::request<http::string_body> req(verb, target, 11);
  req.set(http::field::host, "127.0.0.1");
  if (!body.empty()) {
    req.set(http::field::content_type, "application/json");
    req.body() = body;
  }
  req.prepare_payload();
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  return {static_cast<int>(res.result_int()), json::parse(res.body())};
}

class Client {
 public:
  Client(unsigned short port, const std::string& session_id, const std::string& role) : ws_(ioc_) {
    net::connect(beast::get_lowest_layer(ws_), std::vector{tcp::endpoint(net::ip::make_address("127.0.0.1"), port)});
    ws_.handshake("127.0.0.1", "/ws?session_id=" + session_id + "&role=" + role);
    ws_.text(true);
  }

  void send(const json& frame) { ws_.write(net::buffer(frame.dump())); }

  // nullopt on timeout or close.
  std::optional<json> read(std::chrono::milliseconds timeout = std::chrono::milliseconds(3000)) {
    std::optional<json> out;
    bool done = false;
    buffer_.clear();
    ws_.async_read(buffer_, [&](beast::error_code ec, std::size_t) {
      done = true;
      if (!ec) out = json::parse(beast::buffers_to_string(buffer_.data()));
      else closed_ = true;
    });
    ioc_.restart();
    ioc_.run_for(timeout);
    if (!done) {
      beast::get_lowest_layer(ws_).cancel();
      ioc_.restart();
      ioc_.run();
    }
    return out;
  }

  // Reads until a frame of the given type arrives.
  std::optional<json> read_type(const std::string& type) {
    for (int i = 0; i < 200; ++i) {
      auto f = read();
      if (!f) return std::nullopt;
      if ((*f)["type"] == type) return f;
    }
    return std::nullopt;
  }

  bool closed() const { return closed_; }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  bool closed_ = false;
};

json wizard(const std::string& action) {
  return {{"protocol_version", 1}, {"type", "wizard_action"}, {"action", action}};
}

json speech(const std::string& text, std::int64_t start, std::int64_t end) {
  return {{"protocol_version", 1}, {"type", "speech_final"}, {"text", text}, {"start_ms", start}, {"end_ms", end}};
}

json affect(std::int64_t ts, const std::string& label) {
  return {{"protocol_version", 1}, {"type", "affect_frame"}, {"ts_ms", ts}, {"label", label}};
}

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions opts;
    opts.port = 0;
    server_ = std::make_unique<Server>(base_config(), opts);
    server_->start();
    port_ = server_->port();
  }
  void TearDown() override { server_->stop(); }

  std::unique_ptr<Server> server_;
  unsigned short port_ = 0;
};

}  // namespace

TEST_F(ServerTest, HttpEndpoints) {
  auto r = request(port_, http::verb::get, "/health");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["status"], "ok");
  EXPECT_EQ(r.body["protocol_version"], 1);

  r = request(port_, http::verb::post, "/sessions", R"({"condition":"backchannel","seed":42})");
  EXPECT_EQ(r.status, 201);
  const std::string id = r.body["session_id"];
  EXPECT_EQ(server_->service().events(id).front().payload["seed"], 42);
  EXPECT_EQ(server_->service().events(id).front().payload["condition"], "backchannel");

  r = request(port_, http::verb::get, "/sessions");
  EXPECT_EQ(r.body["sessions"], json::array({id}));

  r = request(port_, http::verb::get, "/sessions/" + id + "/state");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["type"], "state");
  EXPECT_EQ(r.body["transcript"].size(), 1u);

  EXPECT_EQ(request(port_, http::verb::get, "/sessions/nope/state").status, 404);
  EXPECT_EQ(request(port_, http::verb::post, "/sessions", R"({"condition":"both"})").status, 400);
  EXPECT_EQ(request(port_, http::verb::post, "/sessions", "{oops").status, 400);
  EXPECT_EQ(request(port_, http::verb::get, "/elsewhere").status, 404);
}

TEST_F(ServerTest, WizardAndAdapterFlow) {
  const auto id = server_->create_session();
  Client wiz(port_, id, "wizard");
  auto state = wiz.read();
  ASSERT_TRUE(state);
  EXPECT_EQ((*state)["type"], "state");
  EXPECT_EQ((*state)["session_id"], id);
  ASSERT_EQ((*state)["transcript"].size(), 1u);
  EXPECT_EQ((*state)["transcript"][0]["speaker"], "agent");

  Client adapter(port_, id, "adapter");
  ASSERT_TRUE(adapter.read_type("state"));

  for (int ts = 100; ts < 1000; ts += 66) adapter.send(affect(ts, "happiness"));
  adapter.send(speech("cloudy.", 100, 1000));

  const auto behavior = adapter.read_type("behavior");
  ASSERT_TRUE(behavior);
  EXPECT_EQ((*behavior)["directive"], "perform_grounding");
  EXPECT_EQ((*behavior)["utterance"], "I'm glad you find joy in it");

  const auto transcript = wiz.read_type("transcript");
  ASSERT_TRUE(transcript);
  EXPECT_EQ((*transcript)["speaker"], "user");
  const auto wiz_state = wiz.read_type("state");
  ASSERT_TRUE(wiz_state);

  // mid-answer advance is rejected, to the sender only
  wiz.send(wizard("next_question"));
  auto next = wiz.read_type("behavior");
  ASSERT_TRUE(next);
  EXPECT_EQ((*next)["directive"], "speak_question");
  wiz.send(wizard("next_question"));
  const auto err = wiz.read_type("error");
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["code"], "ProtocolViolation");

  adapter.send(json{{"protocol_version", 1}, {"type", "wizard_action"}, {"action", "bogus"}});
  const auto bad = adapter.read_type("error");
  ASSERT_TRUE(bad);
  EXPECT_EQ((*bad)["code"], "BadFrame");

  adapter.send(json{{"protocol_version", 1}, {"type", "affect_frame"}, {"ts_ms", 5000}, {"label", "fear"},
                    {"session_id", "someone-else"}});
  const auto mismatch = adapter.read_type("error");
  ASSERT_TRUE(mismatch);
  EXPECT_EQ((*mismatch)["code"], "BadFrame");
}

TEST_F(ServerTest, SecondWizardRejected) {
  const auto id = server_->create_session();
  Client first(port_, id, "wizard");
  ASSERT_TRUE(first.read_type("state"));
  Client second(port_, id, "wizard");
  const auto err = second.read();
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["type"], "error");
  EXPECT_EQ((*err)["code"], "WizardAlreadyConnected");
  EXPECT_FALSE(second.read(std::chrono::milliseconds(1000)));
  EXPECT_TRUE(second.closed());

  // the first wizard still drives the session
  first.send(wizard("listen_only"));
  const auto state = first.read_type("state");
  ASSERT_TRUE(state);
  EXPECT_EQ((*state)["listen_pending"], true);
}

TEST_F(ServerTest, UnknownSessionClosed) {
  Client c(port_, "missing", "adapter");
  const auto err = c.read();
  ASSERT_TRUE(err);
  EXPECT_EQ((*err)["code"], "UnknownSession");
  EXPECT_FALSE(c.read(std::chrono::milliseconds(1000)));
}

TEST_F(ServerTest, ReconnectRestoresTranscript) {
  const auto id = server_->create_session();
  {
    Client wiz(port_, id, "wizard");
    ASSERT_TRUE(wiz.read_type("state"));
    wiz.send(speech("pretty good", 0, 800));
    ASSERT_TRUE(wiz.read_type("behavior"));
    wiz.send(wizard("next_question"));
    ASSERT_TRUE(wiz.read_type("behavior"));
  }
  // the old socket is gone; a new wizard may attach and sees the whole transcript
  std::optional<json> state;
  for (int attempt = 0; attempt < 20 && !state; ++attempt) {
    Client again(port_, id, "wizard");
    auto f = again.read();
    if (f && (*f)["type"] == "state") state = f;
    else std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ASSERT_TRUE(state);
  const auto& t = (*state)["transcript"];
  ASSERT_EQ(t.size(), 4u);
  EXPECT_EQ(t[1]["text"], "pretty good");
  EXPECT_EQ((*state)["cursor"], 1);
}
