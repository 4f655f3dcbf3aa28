#pragma once
// One live session (engine + affect buffer + generator + log) and the service
// that hosts many of them.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathic/affect.hpp"
#include "empathic/backend.hpp"
#include "empathic/dialogue.hpp"
#include "empathic/event_log.hpp"
#include "empathic/grounding.hpp"
#include "empathic/prompt.hpp"

namespace empathic {

struct SessionConfig {
  std::string script_path;
  std::optional<DialogueScript> script;  // takes precedence over script_path
  Condition condition = Condition::Empathic;
  BackendProfile backend;
  std::uint64_t seed = 1;
  CannedTexts canned;
  BackchannelConfig backchannel;
  std::string fallback_utterance = EmpathicOptions{}.fallback_utterance;
  std::vector<std::string> emotion_options = kDefaultEmotionOptions;
  std::vector<std::string> movement_options = kDefaultMovementOptions;
  std::vector<std::string> verbal_rules = default_verbal_rules();
  int pool_window = kDefaultPoolWindow;
  // Reference end-of-utterance timeout used by embodiment adapters. The
  // service only uses it to flag speech that starts before the agent could
  // have finished listening.
  int silence_timeout_ms = 1500;
  // Unattended runs: issue next_question right after each grounding move.
  bool auto_advance = false;
  std::string prompt_template_path;  // builtin template when empty
  std::string log_dir;               // no log file when empty
};

// Throws InvalidConfig.
void check_config(const SessionConfig& config);
// Relative paths are resolved against base_dir. Throws InvalidConfig.
SessionConfig session_config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
SessionConfig load_session_config(const std::string& path);

struct BehaviorEvent {
  DirectiveKind directive = DirectiveKind::AwaitUser;
  std::string utterance;
  std::string emotion_display;
  std::string head_movement;
  std::size_t segment_id = 0;
  std::int64_t ts_ms = 0;
};

nlohmann::ordered_json to_json(const BehaviorEvent& behavior);

struct TranscriptEntry {
  std::string speaker;  // "agent" | "user"
  std::string text;
  std::int64_t ts_ms = 0;
  bool grounding_suppressed = false;
};

// Time spent in one grounding turn (speech_final to behavior).
struct TurnTiming {
  std::size_t segment_id = 0;
  double total_ms = 0.0;
  double backend_ms = 0.0;
  double pipeline_ms() const { return total_ms - backend_ms; }
};

// Session-relative milliseconds.
using SessionClock = std::function<std::int64_t()>;
SessionClock steady_session_clock();

using FrameSink = std::function<void(const nlohmann::ordered_json&)>;

// Not thread-safe; callers serialize events per session.
class Session {
 public:
  // The backend is only called under the empathic condition.
  Session(std::string id, SessionConfig config, DialogueScript script, std::shared_ptr<TextBackend> backend,
          EventLog log, SessionClock clock, PromptTemplate prompt_template);

  // Logs session_start and realizes the first question.
  void start();

  // Each returns the error frame for the sender when the event was rejected;
  // rejections are logged and never end the session.
  std::optional<nlohmann::ordered_json> on_speech_final(const std::string& text, TimeSpan span);
  std::optional<nlohmann::ordered_json> on_affect_frame(const AffectFrame& frame);
  std::optional<nlohmann::ordered_json> on_wizard_message(WizardAction action);

  void set_frame_sink(FrameSink sink) { sink_ = std::move(sink); }

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return config_; }
  const SessionState& state() const { return state_; }
  const EventLog& log() const { return log_; }
  const std::vector<AffectFrame>& affect_buffer() const { return affect_; }
  const std::vector<BehaviorEvent>& behaviors() const { return behaviors_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const std::vector<TurnTiming>& turn_timings() const { return timings_; }

  nlohmann::ordered_json state_frame(bool with_transcript) const;

 private:
  std::int64_t now() const { return clock_(); }
  void record(EventKind kind, nlohmann::ordered_json payload);
  nlohmann::ordered_json reject(std::string_view code, const std::string& message, std::string_view cause);
  void realize(const Directive& directive);
  void ground(double& backend_ms);
  void apply_wizard(WizardAction action, bool automatic);
  void emit(const nlohmann::ordered_json& frame) const;
  nlohmann::ordered_json start_payload() const;

  std::string id_;
  SessionConfig config_;
  std::shared_ptr<TextBackend> backend_;
  EventLog log_;
  SessionClock clock_;
  PromptTemplate prompt_template_;
  BackchannelRng rng_;
  SessionState state_;
  std::vector<AffectFrame> affect_;
  std::vector<BehaviorEvent> behaviors_;
  std::vector<TranscriptEntry> transcript_;
  std::vector<TurnTiming> timings_;
  std::optional<std::int64_t> last_agent_speech_ms_;
  FrameSink sink_;
  bool started_ = false;
};

// Builds a session from config: loads the script (ScriptLoadError), the
// backend and the prompt template (InvalidConfig). Nothing is logged until
// start() is called.
std::unique_ptr<Session> make_session(std::string id, const SessionConfig& config, SessionClock clock = {},
                                      std::shared_ptr<TextBackend> backend = nullptr);

// Hosts sessions. Events for one session are serialized by a per-session
// mutex; different sessions proceed in parallel.
class SessionService {
 public:
  // start_session: InvalidConfig, ScriptLoadError. Others: UnknownSession.
  std::string start_session(const SessionConfig& config, FrameSink sink = {});
  std::optional<nlohmann::ordered_json> on_speech_final(const std::string& id, const std::string& text, TimeSpan span);
  std::optional<nlohmann::ordered_json> on_affect_frame(const std::string& id, const AffectFrame& frame);
  std::optional<nlohmann::ordered_json> on_wizard_message(const std::string& id, WizardAction action);

  void set_frame_sink(const std::string& id, FrameSink sink);
  nlohmann::ordered_json state_frame(const std::string& id, bool with_transcript) const;
  std::vector<SessionEvent> events(const std::string& id) const;
  std::vector<std::string> session_ids() const;
  bool contains(const std::string& id) const;

  // Runs fn with exclusive access to one session.
  template <typename Fn>
  auto with_session(const std::string& id, Fn&& fn) const {
    auto& entry = find(id);
    std::lock_guard lock(entry.mutex);
    return fn(*entry.session);
  }

 private:
  struct Entry {
    std::unique_ptr<Session> session;
    mutable std::mutex mutex;
  };
  Entry& find(const std::string& id) const;

  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
};

struct ReplayOverrides {
  std::optional<Condition> condition;
  bool strip_affect = false;
  std::shared_ptr<TextBackend> backend;  // rebuilt from the logged profile when null
  std::optional<BackendKind> backend_kind;
  std::string rules_path;                // for backend_kind = mock
  std::optional<std::uint64_t> seed;
};

// Re-drives a fresh session from the logged inputs (utterances, affect frames,
// non-automatic wizard actions) and returns the reconstructed log. Only
// session-relative time is used. Throws MalformedLog.
std::vector<SessionEvent> replay(const std::vector<SessionEvent>& log, const ReplayOverrides& overrides = {});
std::vector<SessionEvent> replay_file(const std::string& log_path, const ReplayOverrides& overrides = {});

}  // namespace empathic
