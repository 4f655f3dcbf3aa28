// empathic: run the session service, replay logs and produce evaluation reports.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "empathic/errors.hpp"
#include "empathic/eval.hpp"
#include "empathic/server.hpp"
#include "empathic/session.hpp"
#include "empathic/wire.hpp"

namespace fs = std::filesystem;
using namespace empathic;

namespace {

std::string default_rules_path() { return (fs::path(EMPATHIC_CONFIG_DIR) / "mock_rules.json").string(); }

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text << '\n';
}

std::shared_ptr<TextBackend> backend_for(const std::string& kind, const std::string& rules) {
  BackendProfile p;
  if (kind == "mock") {
    p.kind = BackendKind::Mock;
    p.rules_path = rules.empty() ? default_rules_path() : rules;
  } else {
    p.kind = BackendKind::RemoteChat;
  }
  return make_backend(p);
}

Condition condition_arg(const std::string& s) {
  auto c = parse_condition(s);
  if (!c) throw InvalidConfig("condition must be 'backchannel' or 'empathic'");
  return *c;
}

std::atomic<bool> g_stop{false};

int run_adapter(const std::string& host, const std::string& port, const std::string& session_id,
                const std::string& role) {
  namespace net = boost::asio;
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;

  net::io_context ioc;
  net::ip::tcp::resolver resolver(ioc);
  websocket::stream<net::ip::tcp::socket> ws(ioc);
  net::connect(ws.next_layer(), resolver.resolve(host, port));
  ws.handshake(host + ":" + port, "/ws?session_id=" + session_id + "&role=" + role);
  ws.text(true);

  std::mutex write_mutex;
  std::thread reader([&] {
    try {
      for (;;) {
        beast::flat_buffer buf;
        ws.read(buf);
        const auto frame = nlohmann::json::parse(beast::buffers_to_string(buf.data()));
        const auto type = frame.value("type", "");
        if (type == "transcript") {
          std::cout << (frame["speaker"] == "agent" ? "agent> " : "you>   ") << frame["text"].get<std::string>()
                    << (frame.value("grounding_suppressed", false) && frame["speaker"] == "user" ? "  [listened]" : "")
                    << std::endl;
        } else if (type == "behavior") {
          std::cout << "        [" << frame["directive"].get<std::string>() << " "
                    << frame["emotion_display"].get<std::string>() << " " << frame["head_movement"].get<std::string>()
                    << "]" << std::endl;
        } else if (type == "error") {
          std::cout << "error:  " << frame["code"].get<std::string>() << ": " << frame["message"].get<std::string>()
                    << std::endl;
        } else if (type == "state" && frame.value("ended", false)) {
          std::cout << "(session ended)" << std::endl;
        }
      }
    } catch (const std::exception&) {
    }
  });

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  };
  const std::map<std::string, std::string> commands = {{"/next", "next_question"},
                                                       {"/repeat", "user_repeat_response"},
                                                       {"/apology", "interrupt_apology"},
                                                       {"/irrelevant", "irrelevant"},
                                                       {"/listen", "listen_only"}};
  std::string line;
  auto last_end = elapsed();
  while (std::getline(std::cin, line)) {
    nlohmann::ordered_json frame{{"protocol_version", kProtocolVersion}};
    if (line.rfind("/affect ", 0) == 0) {
      frame["type"] = "affect_frame";
      frame["ts_ms"] = elapsed();
      frame["label"] = line.substr(8);
    } else if (commands.count(line)) {
      frame["type"] = "wizard_action";
      frame["action"] = commands.at(line);
    } else if (line == "/quit") {
      break;
    } else {
      // The whole time since the previous line counts as the utterance.
      const auto end = elapsed();
      frame["type"] = "speech_final";
      frame["text"] = line;
      frame["start_ms"] = last_end;
      frame["end_ms"] = end;
      last_end = end;
    }
    std::lock_guard lock(write_mutex);
    ws.write(net::buffer(frame.dump()));
  }
  beast::error_code ec;
  ws.close(websocket::close_code::normal, ec);
  reader.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empathic grounding session service and evaluation tools"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP/WebSocket session service");
  std::string serve_config;
  int serve_port = -1;
  std::string serve_address = "127.0.0.1";
  std::string serve_condition;
  std::optional<std::uint64_t> serve_seed;
  bool serve_start = false;
  serve->add_option("--config", serve_config, "session config (JSON)")->required()->check(CLI::ExistingFile);
  serve->add_option("--port", serve_port, "listen port (default 8765)");
  serve->add_option("--address", serve_address, "listen address");
  serve->add_option("--condition", serve_condition, "backchannel | empathic");
  serve->add_option("--seed", serve_seed, "base seed; session n uses seed + n");
  serve->add_flag("--start-session", serve_start, "create one session at startup and print its id");

  // replay
  auto* rep = app.add_subcommand("replay", "re-drive a session log and print the reconstructed log");
  std::string rep_log, rep_condition, rep_backend, rep_rules, rep_out;
  std::optional<std::uint64_t> rep_seed;
  bool rep_strip = false;
  rep->add_option("--log", rep_log, "session log (JSONL)")->required()->check(CLI::ExistingFile);
  rep->add_option("--condition", rep_condition, "backchannel | empathic");
  rep->add_flag("--strip-affect", rep_strip, "drop every affect frame");
  rep->add_option("--backend", rep_backend, "mock | remote")->check(CLI::IsMember({"mock", "remote"}));
  rep->add_option("--rules", rep_rules, "mock rule table");
  rep->add_option("--seed", rep_seed, "backchannel seed");
  rep->add_option("--out", rep_out, "output JSONL (default stdout)");

  // ablate
  auto* abl = app.add_subcommand("ablate", "affect ablation report over a log corpus");
  std::string abl_corpus, abl_backend = "mock", abl_rules, abl_out;
  abl->add_option("--corpus", abl_corpus, "directory of session logs")->required()->check(CLI::ExistingDirectory);
  abl->add_option("--backend", abl_backend, "mock | remote")->check(CLI::IsMember({"mock", "remote"}));
  abl->add_option("--rules", abl_rules, "mock rule table");
  abl->add_option("--out", abl_out, "report path (default stdout)");

  // compare
  auto* cmp = app.add_subcommand("compare", "backchannel vs empathic policy comparison");
  std::string cmp_corpus, cmp_out, cmp_backend, cmp_rules;
  std::uint64_t cmp_seed = 1;
  cmp->add_option("--corpus", cmp_corpus, "directory of session logs")->required()->check(CLI::ExistingDirectory);
  cmp->add_option("--seed", cmp_seed, "backchannel seed");
  cmp->add_option("--backend", cmp_backend, "mock | remote (default: each log's profile)")
      ->check(CLI::IsMember({"mock", "remote"}));
  cmp->add_option("--rules", cmp_rules, "mock rule table");
  cmp->add_option("--out", cmp_out, "report path (default stdout)");

  // synth
  auto* syn = app.add_subcommand("synth", "record synthetic sessions into a corpus directory");
  std::string syn_config, syn_out;
  int syn_sessions = 1, syn_questions = 10;
  std::uint64_t syn_seed = 1;
  syn->add_option("--config", syn_config, "session config")->required()->check(CLI::ExistingFile);
  syn->add_option("--out", syn_out, "output directory")->required();
  syn->add_option("--sessions", syn_sessions, "number of sessions")->check(CLI::PositiveNumber);
  syn->add_option("--questions", syn_questions, "questions per session")->check(CLI::Range(3, 1000));
  syn->add_option("--seed", syn_seed, "seed of the first session");

  // latency
  auto* lat = app.add_subcommand("latency", "per-turn latency excluding the backend call");
  std::string lat_config, lat_out;
  int lat_questions = 10;
  std::uint64_t lat_seed = 1;
  double lat_budget = 50.0;
  lat->add_option("--config", lat_config, "session config")->required()->check(CLI::ExistingFile);
  lat->add_option("--questions", lat_questions, "questions in the synthetic session")->check(CLI::Range(3, 1000));
  lat->add_option("--seed", lat_seed, "seed");
  lat->add_option("--budget-ms", lat_budget, "per-turn budget");
  lat->add_option("--out", lat_out, "report path (default stdout)");

  // adapter
  auto* ad = app.add_subcommand("adapter", "loopback text adapter: stdin lines become speech_final frames");
  std::string ad_host = "127.0.0.1", ad_port = "8765", ad_session, ad_role = "adapter";
  ad->add_option("--host", ad_host, "service host");
  ad->add_option("--port", ad_port, "service port");
  ad->add_option("--session", ad_session, "session id")->required();
  ad->add_option("--role", ad_role, "adapter | wizard")->check(CLI::IsMember({"adapter", "wizard"}));
  ad->footer("Commands: /next /repeat /apology /irrelevant /listen, /affect LABEL, /quit");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("empathic");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*serve) {
      auto config = load_session_config(serve_config);
      if (!serve_condition.empty()) config.condition = condition_arg(serve_condition);
      if (serve_seed) config.seed = *serve_seed;
      ServerOptions opts;
      opts.address = serve_address;
      if (serve_port >= 0) opts.port = static_cast<unsigned short>(serve_port);
      Server server(config, opts);
      server.start();
      std::cout << "listening on " << opts.address << ":" << server.port() << std::endl;
      if (serve_start) std::cout << "session " << server.create_session() << std::endl;
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }
    if (*rep) {
      ReplayOverrides o;
      if (!rep_condition.empty()) o.condition = condition_arg(rep_condition);
      o.strip_affect = rep_strip;
      o.seed = rep_seed;
      if (rep_backend == "mock") {
        o.backend_kind = BackendKind::Mock;
        o.rules_path = rep_rules.empty() ? default_rules_path() : rep_rules;
      } else if (rep_backend == "remote") {
        o.backend_kind = BackendKind::RemoteChat;
      }
      std::string text;
      for (const auto& e : replay_file(rep_log, o)) text += to_line(e) + "\n";
      if (!text.empty()) text.pop_back();
      write_output(rep_out, text);
      return 0;
    }
    if (*abl) {
      const auto report = run_ablation(load_corpus(abl_corpus), backend_for(abl_backend, abl_rules));
      write_output(abl_out, to_json(report).dump(2));
      return 0;
    }
    if (*cmp) {
      std::shared_ptr<TextBackend> backend;
      if (!cmp_backend.empty()) backend = backend_for(cmp_backend, cmp_rules);
      const auto report = compare_policies(load_corpus(cmp_corpus), cmp_seed, backend);
      write_output(cmp_out, to_json(report).dump(2));
      return 0;
    }
    if (*syn) {
      auto config = load_session_config(syn_config);
      config.log_dir = syn_out;
      for (int i = 0; i < syn_sessions; ++i) {
        SyntheticOptions o;
        o.questions = syn_questions;
        o.seed = syn_seed + static_cast<std::uint64_t>(i);
        o.session_id = "synthetic-" + std::to_string(o.seed);
        run_synthetic_session(config, o);
      }
      std::cout << "wrote " << syn_sessions << " session log(s) to " << syn_out << std::endl;
      return 0;
    }
    if (*lat) {
      auto config = load_session_config(lat_config);
      config.log_dir.clear();
      SyntheticOptions o;
      o.questions = lat_questions;
      o.seed = lat_seed;
      const auto session = run_synthetic_session(config, o);
      const auto report = latency_report(*session, lat_budget);
      write_output(lat_out, to_json(report).dump(2));
      return report.within_budget() ? 0 : 3;
    }
    if (*ad) return run_adapter(ad_host, ad_port, ad_session, ad_role);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
