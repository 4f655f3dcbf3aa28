#include "empathic/session.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <spdlog/spdlog.h>

#include "empathic/errors.hpp"
#include "empathic/wire.hpp"

namespace empathic {

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kCurrentAffectWindowMs = 1000;

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

bool contains(const std::vector<std::string>& set, const std::string& v) {
  return std::find(set.begin(), set.end(), v) != set.end();
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  return fs::absolute(p).lexically_normal().string();
}

std::int64_t wall_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidConfig(std::string("config key '") + key + "' has the wrong type");
  }
}

}  // namespace

// --- config -----------------------------------------------------------------

void check_config(const SessionConfig& c) {
  check_profile(c.backend);
  if (c.silence_timeout_ms <= 0) throw InvalidConfig("silence_timeout_ms must be positive");
  if (c.pool_window <= 0) throw InvalidConfig("pool_window must be positive");
  if (c.emotion_options.empty()) throw InvalidConfig("emotion_options is empty");
  if (c.movement_options.empty()) throw InvalidConfig("movement_options is empty");
  if (!contains(c.emotion_options, "neutral")) throw InvalidConfig("emotion_options must include 'neutral'");
  if (!contains(c.movement_options, "no_movement")) throw InvalidConfig("movement_options must include 'no_movement'");
  if (c.backchannel.utterances.empty()) throw InvalidConfig("backchannel utterance set is empty");
  if (c.backchannel.movements.empty()) throw InvalidConfig("backchannel movement set is empty");
  for (const auto& m : c.backchannel.movements) {
    if (!contains(c.movement_options, m)) throw InvalidConfig("backchannel movement '" + m + "' is not a movement option");
  }
  for (const auto& u : c.backchannel.utterances) {
    if (blank(u)) throw InvalidConfig("backchannel utterance is empty");
  }
  if (blank(c.fallback_utterance)) throw InvalidConfig("fallback_utterance is empty");
  if (blank(c.canned.repeat_request) || blank(c.canned.apology) || blank(c.canned.irrelevant)) {
    throw InvalidConfig("canned texts must be non-empty");
  }
  if (!c.script && c.script_path.empty()) throw InvalidConfig("no script or script_path");
}

SessionConfig session_config_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw InvalidConfig("config must be a JSON object");
  SessionConfig c;
  c.script_path = resolve(get_or<std::string>(j, "script_path", ""), base_dir);
  if (const auto it = j.find("script"); it != j.end()) {
    try {
      c.script = dialogue_script_from_json(*it);
    } catch (const InvalidScript& e) {
      throw InvalidConfig(std::string("script") + e.what());
    }
  }
  const auto condition = get_or<std::string>(j, "condition", "empathic");
  const auto parsed = parse_condition(condition);
  if (!parsed) throw InvalidConfig("condition must be 'backchannel' or 'empathic', got '" + condition + "'");
  c.condition = *parsed;
  if (const auto it = j.find("backend"); it != j.end()) c.backend = backend_profile_from_json(*it);
  c.backend.rules_path = resolve(c.backend.rules_path, base_dir);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  if (const auto it = j.find("canned"); it != j.end()) {
    c.canned.repeat_request = get_or<std::string>(*it, "repeat_request", c.canned.repeat_request);
    c.canned.apology = get_or<std::string>(*it, "apology", c.canned.apology);
    c.canned.irrelevant = get_or<std::string>(*it, "irrelevant", c.canned.irrelevant);
  }
  if (const auto it = j.find("backchannel"); it != j.end()) {
    c.backchannel.utterances = get_or(*it, "utterances", c.backchannel.utterances);
    c.backchannel.movements = get_or(*it, "movements", c.backchannel.movements);
  }
  c.fallback_utterance = get_or(j, "fallback_utterance", c.fallback_utterance);
  c.emotion_options = get_or(j, "emotion_options", c.emotion_options);
  c.movement_options = get_or(j, "movement_options", c.movement_options);
  c.verbal_rules = get_or(j, "verbal_rules", c.verbal_rules);
  c.pool_window = get_or(j, "pool_window", c.pool_window);
  c.silence_timeout_ms = get_or(j, "silence_timeout_ms", c.silence_timeout_ms);
  c.auto_advance = get_or(j, "auto_advance", c.auto_advance);
  c.prompt_template_path = resolve(get_or<std::string>(j, "prompt_template_path", ""), base_dir);
  c.log_dir = resolve(get_or<std::string>(j, "log_dir", ""), base_dir);
  check_config(c);
  return c;
}

SessionConfig load_session_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidConfig(path + ": " + e.what());
  }
  return session_config_from_json(j, fs::path(path).parent_path().string().empty()
                                         ? "."
                                         : fs::path(path).parent_path().string());
}

nlohmann::ordered_json to_json(const BehaviorEvent& b) {
  nlohmann::ordered_json j;
  j["segment_id"] = b.segment_id;
  j["ts_ms"] = b.ts_ms;
  j["directive"] = std::string(to_string(b.directive));
  j["utterance"] = b.utterance;
  j["emotion_display"] = b.emotion_display;
  j["head_movement"] = b.head_movement;
  return j;
}

SessionClock steady_session_clock() {
  const auto t0 = std::chrono::steady_clock::now();
  return [t0] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  };
}

// --- session ----------------------------------------------------------------

Session::Session(std::string id, SessionConfig config, DialogueScript script, std::shared_ptr<TextBackend> backend,
                 EventLog log, SessionClock clock, PromptTemplate prompt_template)
    : id_(std::move(id)),
      config_(std::move(config)),
      backend_(std::move(backend)),
      log_(std::move(log)),
      clock_(clock ? std::move(clock) : steady_session_clock()),
      prompt_template_(std::move(prompt_template)),
      rng_(config_.seed) {
  config_.script = std::move(script);
}

void Session::emit(const nlohmann::ordered_json& frame) const {
  if (sink_) sink_(frame);
}

void Session::record(EventKind kind, nlohmann::ordered_json payload) {
  SessionEvent e;
  e.ts_ms = now();
  e.wall_ms = wall_now_ms();
  e.session_id = id_;
  e.kind = kind;
  e.payload = std::move(payload);
  log_.append(std::move(e));
}

nlohmann::ordered_json Session::reject(std::string_view code, const std::string& message, std::string_view cause) {
  nlohmann::ordered_json payload;
  payload["code"] = std::string(code);
  payload["message"] = message;
  payload["cause"] = std::string(cause);
  record(EventKind::Error, std::move(payload));
  spdlog::info("session {}: rejected {}: {}", id_, cause, message);
  return make_error_frame(id_, code, message, now());
}

nlohmann::ordered_json Session::start_payload() const {
  nlohmann::ordered_json p;
  p["log_format_version"] = kLogFormatVersion;
  p["protocol_version"] = kProtocolVersion;
  p["condition"] = std::string(to_string(config_.condition));
  p["seed"] = config_.seed;
  p["script"] = to_json(*config_.script);
  p["canned"] = {{"repeat_request", config_.canned.repeat_request},
                 {"apology", config_.canned.apology},
                 {"irrelevant", config_.canned.irrelevant}};
  p["backchannel"] = {{"utterances", config_.backchannel.utterances}, {"movements", config_.backchannel.movements}};
  p["fallback_utterance"] = config_.fallback_utterance;
  p["emotion_options"] = config_.emotion_options;
  p["movement_options"] = config_.movement_options;
  p["verbal_rules"] = config_.verbal_rules;
  p["pool_window"] = config_.pool_window;
  p["silence_timeout_ms"] = config_.silence_timeout_ms;
  p["auto_advance"] = config_.auto_advance;
  p["backend"] = to_json(config_.backend);
  p["prompt_template_path"] = config_.prompt_template_path;
  p["prompt_checksum"] = prompt_template_.checksum();
  return p;
}

void Session::start() {
  if (started_) throw Error("session already started");
  started_ = true;
  record(EventKind::SessionStart, start_payload());
  auto t = empathic::start(*config_.script, config_.condition, config_.canned);
  state_ = std::move(t.state);
  realize(t.directive);
  emit(state_frame(false));
}

void Session::realize(const Directive& d) {
  BehaviorEvent b;
  b.directive = d.kind;
  b.segment_id = d.segment_index;
  b.ts_ms = now();
  b.emotion_display = "neutral";
  b.head_movement = "no_movement";
  switch (d.kind) {
    case DirectiveKind::SpeakQuestion:
    case DirectiveKind::SpeakCanned:
      b.utterance = d.text;
      break;
    case DirectiveKind::PerformGrounding:
      b.utterance = d.move->utterance;
      b.emotion_display = d.move->agent_emotion;
      b.head_movement = d.move->head_movement;
      break;
    case DirectiveKind::AwaitUser:
    case DirectiveKind::EndSession:
      break;
    case DirectiveKind::RequestGrounding:
      throw Error("request_grounding is not a realizable directive");
  }

  const auto body = to_json(b);
  auto payload = body;
  payload["cause"] = to_json(d);
  record(EventKind::Behavior, std::move(payload));
  behaviors_.push_back(b);

  auto frame = nlohmann::ordered_json{{"protocol_version", kProtocolVersion}, {"type", "behavior"}, {"session_id", id_}};
  for (const auto& [k, v] : body.items()) frame[k] = v;
  emit(frame);

  if (!b.utterance.empty()) {
    transcript_.push_back({"agent", b.utterance, b.ts_ms, false});
    last_agent_speech_ms_ = b.ts_ms;
    emit({{"protocol_version", kProtocolVersion},
          {"type", "transcript"},
          {"session_id", id_},
          {"ts_ms", b.ts_ms},
          {"speaker", "agent"},
          {"text", b.utterance},
          {"grounding_suppressed", false}});
  }
  if (d.kind == DirectiveKind::EndSession) {
    record(EventKind::SessionEnd, {{"segments", state_.segments.size()}});
  }
}

void Session::ground(double& backend_ms) {
  const auto& seg = state_.segments.back();
  const auto segment_id = state_.segments.size() - 1;

  GroundingRequest request;
  request.agent_utterance = seg.agent_utterance;
  request.user_utterance = seg.user_response->text;
  request.facial_labels = seg.user_response->affect.top_labels;
  request.emotion_options = config_.emotion_options;
  request.movement_options = config_.movement_options;
  request.verbal_rules = config_.verbal_rules;

  nlohmann::ordered_json req_payload;
  req_payload["segment_id"] = segment_id;
  req_payload["condition"] = std::string(to_string(config_.condition));
  req_payload["request"] = to_json(request);
  req_payload["affect"] = to_json(seg.user_response->affect);
  record(EventKind::GroundingRequest, std::move(req_payload));

  nlohmann::ordered_json move_payload;
  move_payload["segment_id"] = segment_id;
  GroundingMove move;
  if (config_.condition == Condition::Empathic) {
    EmpathicOptions options{config_.fallback_utterance, prompt_template_};
    auto result = generate_empathic(request, backend_, config_.backend, options);
    backend_ms = result.backend_ms;
    move = result.move;
    move_payload["move"] = to_json(move);
    move_payload["attempts"] = result.attempts;
    move_payload["violations"] = result.violations;
    move_payload["warnings"] = result.warnings;
  } else {
    move = generate_backchannel(rng_, config_.backchannel);
    move_payload["move"] = to_json(move);
    move_payload["attempts"] = 0;
    move_payload["violations"] = nlohmann::ordered_json::array();
    move_payload["warnings"] = nlohmann::ordered_json::array();
  }
  record(EventKind::GroundingMove, std::move(move_payload));

  auto t = on_grounding_complete(state_, std::move(move));
  state_ = std::move(t.state);
  realize(t.directive);
}

std::optional<nlohmann::ordered_json> Session::on_speech_final(const std::string& text, TimeSpan span) {
  const auto t0 = std::chrono::steady_clock::now();
  record(EventKind::UserUtterance, {{"text", text}, {"span", {{"start_ms", span.start_ms}, {"end_ms", span.end_ms}}}});
  if (span.start_ms > span.end_ms) {
    return reject(wire_error::kInvalidSpan, "speech span start is after its end", "user_utterance");
  }
  if (last_agent_speech_ms_ && span.start_ms < *last_agent_speech_ms_) {
    record(EventKind::Error, {{"code", "SpeechOverlap"},
                              {"message", "user speech started before the last agent utterance was issued"},
                              {"cause", "user_utterance"},
                              {"severity", "warning"}});
  }

  const auto frames = segment_frames(affect_, span);
  auto summary = summarize_utterance(frames, config_.pool_window);
  summary.span = span;

  Transition t;
  try {
    t = on_user_response(state_, text, summary);
  } catch (const ProtocolViolation& e) {
    return reject(wire_error::kProtocolViolation, e.what(), "user_utterance");
  }
  state_ = std::move(t.state);
  const bool suppressed = t.directive.kind != DirectiveKind::RequestGrounding;
  transcript_.push_back({"user", text, now(), suppressed});
  emit({{"protocol_version", kProtocolVersion},
        {"type", "transcript"},
        {"session_id", id_},
        {"ts_ms", now()},
        {"speaker", "user"},
        {"text", text},
        {"grounding_suppressed", suppressed}});

  if (suppressed) {
    realize(t.directive);
  } else {
    double backend_ms = 0.0;
    ground(backend_ms);
    timings_.push_back({state_.segments.size() - 1, ms_since(t0), backend_ms});
    if (config_.auto_advance) apply_wizard(WizardAction::NextQuestion, true);
  }
  emit(state_frame(false));
  return std::nullopt;
}

std::optional<nlohmann::ordered_json> Session::on_affect_frame(const AffectFrame& frame) {
  record(EventKind::AffectFrame, to_json(frame));
  if (!affect_.empty() && frame.timestamp_ms < affect_.back().timestamp_ms) {
    spdlog::warn("session {}: dropped stale affect frame at {} ms (last {} ms)", id_, frame.timestamp_ms,
                 affect_.back().timestamp_ms);
    nlohmann::ordered_json payload;
    payload["code"] = std::string(wire_error::kStaleFrame);
    payload["message"] = "affect frame is older than the last buffered frame; dropped";
    payload["cause"] = "affect_frame";
    payload["severity"] = "warning";
    record(EventKind::Error, std::move(payload));
    return make_error_frame(id_, wire_error::kStaleFrame, "stale affect frame dropped", now());
  }
  affect_.push_back(frame);
  return std::nullopt;
}

void Session::apply_wizard(WizardAction action, bool automatic) {
  if (automatic) record(EventKind::WizardAction, {{"action", std::string(to_string(action))}, {"auto", true}});
  auto t = on_wizard(state_, action);
  state_ = std::move(t.state);
  realize(t.directive);
}

std::optional<nlohmann::ordered_json> Session::on_wizard_message(WizardAction action) {
  record(EventKind::WizardAction, {{"action", std::string(to_string(action))}, {"auto", false}});
  try {
    apply_wizard(action, false);
  } catch (const ProtocolViolation& e) {
    return reject(wire_error::kProtocolViolation, e.what(), "wizard_action");
  }
  emit(state_frame(false));
  return std::nullopt;
}

nlohmann::ordered_json Session::state_frame(bool with_transcript) const {
  nlohmann::ordered_json j;
  j["protocol_version"] = kProtocolVersion;
  j["type"] = "state";
  j["session_id"] = id_;
  j["condition"] = std::string(to_string(state_.condition));
  j["cursor"] = state_.cursor;
  j["question_count"] = state_.script.questions.size();
  j["phase"] = std::string(to_string(state_.phase()));
  j["segment_id"] = state_.segments.empty() ? 0 : state_.segments.size() - 1;
  j["segment_status"] = state_.segments.empty() ? "none" : std::string(to_string(state_.segments.back().status));
  j["listen_pending"] = state_.listen_pending;
  j["ended"] = state_.ended;

  auto current = nlohmann::ordered_json::array();
  if (!affect_.empty()) {
    const auto last = affect_.back().timestamp_ms;
    const auto recent = segment_frames(affect_, {std::max<std::int64_t>(0, last - kCurrentAffectWindowMs), last});
    for (auto l : summarize_utterance(recent, config_.pool_window).top_labels) current.push_back(std::string(to_string(l)));
  }
  j["current_affect"] = std::move(current);

  auto actions = nlohmann::ordered_json::array();
  if (started_) {
    for (auto a : allowed_actions(state_)) actions.push_back(std::string(to_string(a)));
  }
  j["allowed_actions"] = std::move(actions);

  if (with_transcript) {
    auto entries = nlohmann::ordered_json::array();
    for (const auto& e : transcript_) {
      entries.push_back({{"speaker", e.speaker},
                         {"text", e.text},
                         {"ts_ms", e.ts_ms},
                         {"grounding_suppressed", e.grounding_suppressed}});
    }
    j["transcript"] = std::move(entries);
  }
  return j;
}

std::unique_ptr<Session> make_session(std::string id, const SessionConfig& config, SessionClock clock,
                                      std::shared_ptr<TextBackend> backend) {
  check_config(config);
  DialogueScript script = config.script ? *config.script : load_dialogue_script(config.script_path);

  if (!backend && config.condition == Condition::Empathic) {
    try {
      backend = make_backend(config.backend);
    } catch (const InvalidConfig&) {
      throw;
    } catch (const Error& e) {
      throw InvalidConfig(e.what());
    }
  }

  auto tmpl = PromptTemplate::builtin();
  if (!config.prompt_template_path.empty()) {
    try {
      tmpl = PromptTemplate::load(config.prompt_template_path);
    } catch (const Error& e) {
      throw InvalidConfig(e.what());
    }
  }

  EventLog log;
  if (!config.log_dir.empty()) {
    std::error_code ec;
    fs::create_directories(config.log_dir, ec);
    try {
      log = EventLog((fs::path(config.log_dir) / (id + ".jsonl")).string());
    } catch (const Error& e) {
      throw InvalidConfig(e.what());
    }
  }
  return std::make_unique<Session>(std::move(id), config, std::move(script), std::move(backend), std::move(log),
                                   std::move(clock), std::move(tmpl));
}

// --- service ----------------------------------------------------------------

SessionService::Entry& SessionService::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw UnknownSession(id);
  return *it->second;
}

std::string SessionService::start_session(const SessionConfig& config, FrameSink sink) {
  std::string id;
  {
    std::unique_lock lock(map_mutex_);
    const auto t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%S", &tm);
    id = std::string("s") + stamp + "-" + std::to_string(++counter_);
  }
  auto session = make_session(id, config);
  session->set_frame_sink(std::move(sink));

  auto entry = std::make_unique<Entry>();
  entry->session = std::move(session);
  auto& ref = *entry;
  {
    std::unique_lock lock(map_mutex_);
    sessions_.emplace(id, std::move(entry));
  }
  std::lock_guard lock(ref.mutex);
  ref.session->start();
  return id;
}

std::optional<nlohmann::ordered_json> SessionService::on_speech_final(const std::string& id, const std::string& text,
                                                                      TimeSpan span) {
  return with_session(id, [&](Session& s) { return s.on_speech_final(text, span); });
}

std::optional<nlohmann::ordered_json> SessionService::on_affect_frame(const std::string& id, const AffectFrame& frame) {
  return with_session(id, [&](Session& s) { return s.on_affect_frame(frame); });
}

std::optional<nlohmann::ordered_json> SessionService::on_wizard_message(const std::string& id, WizardAction action) {
  return with_session(id, [&](Session& s) { return s.on_wizard_message(action); });
}

void SessionService::set_frame_sink(const std::string& id, FrameSink sink) {
  with_session(id, [&](Session& s) { s.set_frame_sink(std::move(sink)); });
}

nlohmann::ordered_json SessionService::state_frame(const std::string& id, bool with_transcript) const {
  return with_session(id, [&](const Session& s) { return s.state_frame(with_transcript); });
}

std::vector<SessionEvent> SessionService::events(const std::string& id) const {
  return with_session(id, [](const Session& s) { return s.log().events(); });
}

std::vector<std::string> SessionService::session_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

bool SessionService::contains(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  return sessions_.count(id) > 0;
}

// --- replay -----------------------------------------------------------------

namespace {

SessionConfig config_from_start(const nlohmann::json& p) {
  SessionConfig c;
  c.script = dialogue_script_from_json(p.at("script"));
  c.condition = parse_condition(p.at("condition").get<std::string>()).value();
  c.seed = p.at("seed").get<std::uint64_t>();
  const auto& canned = p.at("canned");
  c.canned = {canned.at("repeat_request").get<std::string>(), canned.at("apology").get<std::string>(),
              canned.at("irrelevant").get<std::string>()};
  c.backchannel.utterances = p.at("backchannel").at("utterances").get<std::vector<std::string>>();
  c.backchannel.movements = p.at("backchannel").at("movements").get<std::vector<std::string>>();
  c.fallback_utterance = p.at("fallback_utterance").get<std::string>();
  c.emotion_options = p.at("emotion_options").get<std::vector<std::string>>();
  c.movement_options = p.at("movement_options").get<std::vector<std::string>>();
  c.verbal_rules = p.at("verbal_rules").get<std::vector<std::string>>();
  c.pool_window = p.at("pool_window").get<int>();
  c.silence_timeout_ms = p.at("silence_timeout_ms").get<int>();
  c.auto_advance = p.at("auto_advance").get<bool>();
  c.backend = backend_profile_from_json(p.at("backend"));
  c.prompt_template_path = p.at("prompt_template_path").get<std::string>();
  return c;
}

}  // namespace

std::vector<SessionEvent> replay(const std::vector<SessionEvent>& log, const ReplayOverrides& overrides) {
  if (log.empty()) return {};
  if (log.front().kind != EventKind::SessionStart) throw MalformedLog(1, "log must begin with session_start");

  SessionConfig config;
  std::string logged_checksum;
  try {
    config = config_from_start(log.front().payload);
    logged_checksum = log.front().payload.at("prompt_checksum").get<std::string>();
  } catch (const std::exception& e) {
    throw MalformedLog(1, std::string("bad session_start payload: ") + e.what());
  }
  if (overrides.condition) config.condition = *overrides.condition;
  if (overrides.seed) config.seed = *overrides.seed;
  if (overrides.backend_kind) {
    config.backend.kind = *overrides.backend_kind;
    if (!overrides.rules_path.empty()) config.backend.rules_path = overrides.rules_path;
  }
  config.log_dir.clear();
  if (!config.prompt_template_path.empty() && !fs::exists(config.prompt_template_path)) {
    spdlog::warn("replay: prompt template '{}' is gone; using the builtin template", config.prompt_template_path);
    config.prompt_template_path.clear();
  }

  auto ts = std::make_shared<std::int64_t>(log.front().ts_ms);
  auto session = make_session(log.front().session_id, config, [ts] { return *ts; }, overrides.backend);
  session->start();
  const auto replay_checksum = session->log().events().front().payload.at("prompt_checksum").get<std::string>();
  if (replay_checksum != logged_checksum) {
    spdlog::warn("replay: prompt template checksum differs from the recorded session");
  }

  for (std::size_t i = 1; i < log.size(); ++i) {
    const auto& e = log[i];
    const auto line = i + 1;
    *ts = e.ts_ms;
    try {
      switch (e.kind) {
        case EventKind::UserUtterance: {
          const auto& span = e.payload.at("span");
          session->on_speech_final(e.payload.at("text").get<std::string>(),
                                   {span.at("start_ms").get<std::int64_t>(), span.at("end_ms").get<std::int64_t>()});
          break;
        }
        case EventKind::AffectFrame:
          if (!overrides.strip_affect) session->on_affect_frame(affect_frame_from_json(e.payload));
          break;
        case EventKind::WizardAction: {
          if (e.payload.value("auto", false)) break;
          const auto name = e.payload.at("action").get<std::string>();
          const auto action = parse_wizard_action(name);
          if (!action) throw MalformedLog(line, "unknown wizard action '" + name + "'");
          session->on_wizard_message(*action);
          break;
        }
        default:
          break;
      }
    } catch (const MalformedLog&) {
      throw;
    } catch (const nlohmann::json::exception& e2) {
      throw MalformedLog(line, std::string("bad ") + std::string(to_string(e.kind)) + " payload: " + e2.what());
    } catch (const Error& e2) {
      throw MalformedLog(line, std::string("bad ") + std::string(to_string(e.kind)) + " payload: " + e2.what());
    }
  }
  return session->log().events();
}

std::vector<SessionEvent> replay_file(const std::string& log_path, const ReplayOverrides& overrides) {
  return replay(read_event_log_file(log_path), overrides);
}

}  // namespace empathic
