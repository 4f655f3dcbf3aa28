#include "empathic/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <istream>

#include "empathic/errors.hpp"

namespace empathic {

namespace {

constexpr std::pair<EventKind, std::string_view> kKinds[] = {
    {EventKind::SessionStart, "session_start"},
    {EventKind::UserUtterance, "user_utterance"},
    {EventKind::AffectFrame, "affect_frame"},
    {EventKind::WizardAction, "wizard_action"},
    {EventKind::GroundingRequest, "grounding_request"},
    {EventKind::GroundingMove, "grounding_move"},
    {EventKind::Behavior, "behavior"},
    {EventKind::Error, "error"},
    {EventKind::SessionEnd, "session_end"},
};

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "error";
}

std::optional<EventKind> parse_event_kind(std::string_view s) {
  for (const auto& [k, name] : kKinds) {
    if (name == s) return k;
  }
  return std::nullopt;
}

nlohmann::ordered_json to_json(const SessionEvent& event) {
  nlohmann::ordered_json j;
  j["seq"] = event.seq;
  j["ts_ms"] = event.ts_ms;
  j["wall_ms"] = event.wall_ms;
  j["session_id"] = event.session_id;
  j["kind"] = std::string(to_string(event.kind));
  j["payload"] = event.payload;
  return j;
}

std::string to_line(const SessionEvent& event) { return to_json(event).dump(); }

SessionEvent parse_event_line(std::string_view line, std::size_t lineno) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedLog(lineno, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw MalformedLog(lineno, "expected a JSON object");

  auto need = [&](const char* key) -> const nlohmann::ordered_json& {
    const auto it = j.find(key);
    if (it == j.end()) throw MalformedLog(lineno, std::string("missing '") + key + "'");
    return *it;
  };
  SessionEvent e;
  const auto& seq = need("seq");
  const auto& ts = need("ts_ms");
  const auto& wall = need("wall_ms");
  const auto& sid = need("session_id");
  const auto& kind = need("kind");
  const auto& payload = need("payload");
  if (!seq.is_number_unsigned()) throw MalformedLog(lineno, "'seq' must be a non-negative integer");
  if (!ts.is_number_integer() || ts.get<std::int64_t>() < 0) {
    throw MalformedLog(lineno, "'ts_ms' must be a non-negative integer");
  }
  if (!wall.is_number_integer()) throw MalformedLog(lineno, "'wall_ms' must be an integer");
  if (!sid.is_string() || sid.get<std::string>().empty()) throw MalformedLog(lineno, "'session_id' must be a string");
  if (!kind.is_string()) throw MalformedLog(lineno, "'kind' must be a string");
  const auto k = parse_event_kind(kind.get<std::string>());
  if (!k) throw MalformedLog(lineno, "unknown kind '" + kind.get<std::string>() + "'");
  if (!payload.is_object()) throw MalformedLog(lineno, "'payload' must be an object");
  e.seq = seq.get<std::uint64_t>();
  e.ts_ms = ts.get<std::int64_t>();
  e.wall_ms = wall.get<std::int64_t>();
  e.session_id = sid.get<std::string>();
  e.kind = *k;
  e.payload = payload;
  return e;
}

std::vector<SessionEvent> read_event_log(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto e = parse_event_line(line, lineno);
    if (!events.empty()) {
      const auto& prev = events.back();
      if (e.seq != prev.seq + 1) throw MalformedLog(lineno, "seq does not follow the previous event");
      if (e.ts_ms < prev.ts_ms) throw MalformedLog(lineno, "ts_ms decreases");
      if (e.session_id != prev.session_id) throw MalformedLog(lineno, "session_id changes within one log");
    } else if (e.kind != EventKind::SessionStart) {
      throw MalformedLog(lineno, "log must begin with session_start");
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<SessionEvent> read_event_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open log '" + path + "'");
  return read_event_log(in);
}

EventLog::EventLog(const std::string& path) : path_(path) {
  file_.emplace(path, std::ios::out | std::ios::app);
  if (!*file_) throw Error("cannot open log file '" + path + "'");
}

const SessionEvent& EventLog::append(SessionEvent event) {
  if (!events_.empty()) {
    event.seq = events_.back().seq + 1;
    event.ts_ms = std::max(event.ts_ms, events_.back().ts_ms);
  } else {
    event.seq = 0;
  }
  if (file_) {
    *file_ << to_line(event) << '\n';
    file_->flush();
  }
  events_.push_back(std::move(event));
  return events_.back();
}

}  // namespace empathic
