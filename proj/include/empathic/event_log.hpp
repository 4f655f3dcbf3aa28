#pragma once
// Append-only JSONL session log. One SessionEvent per line, flushed per event.

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace empathic {

inline constexpr int kLogFormatVersion = 1;

enum class EventKind {
  SessionStart,
  UserUtterance,
  AffectFrame,
  WizardAction,
  GroundingRequest,
  GroundingMove,
  Behavior,
  Error,
  SessionEnd,
};

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view s);

// ts_ms is session-relative and is what replay uses; wall_ms is epoch time
// kept for audit only. seq increases by one per event.
struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;
  std::int64_t wall_ms = 0;
  std::string session_id;
  EventKind kind = EventKind::SessionStart;
  nlohmann::ordered_json payload = nlohmann::ordered_json::object();
};

nlohmann::ordered_json to_json(const SessionEvent& event);
std::string to_line(const SessionEvent& event);  // no trailing newline

// Parses and checks one line. Throws MalformedLog.
SessionEvent parse_event_line(std::string_view line, std::size_t lineno);

// Reads a whole log: blank lines skipped, seq must increase by one, ts_ms
// must not decrease and all events share one session id. Throws MalformedLog.
std::vector<SessionEvent> read_event_log(std::istream& in);
std::vector<SessionEvent> read_event_log_file(const std::string& path);

class EventLog {
 public:
  EventLog() = default;
  // Opens path for appending; throws Error when it cannot be opened.
  explicit EventLog(const std::string& path);

  EventLog(EventLog&&) = default;
  EventLog& operator=(EventLog&&) = default;

  // Stamps seq (and clamps ts_ms so it never decreases), writes and flushes.
  const SessionEvent& append(SessionEvent event);

  const std::vector<SessionEvent>& events() const { return events_; }
  const std::string& path() const { return path_; }

 private:
  std::vector<SessionEvent> events_;
  std::string path_;
  std::optional<std::ofstream> file_;
};

}  // namespace empathic
