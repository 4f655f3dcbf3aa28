#pragma once
// WebSocket wire protocol, JSON text frames, protocol_version 1.
//
// Inbound (adapter or console -> service)
//   {"protocol_version":1, "type":"speech_final", "text":str, "start_ms":int, "end_ms":int}
//   {"protocol_version":1, "type":"affect_frame", "ts_ms":int, "label":str}
//   {"protocol_version":1, "type":"wizard_action", "action":str}
//   An optional "session_id" must match the session the connection is bound to.
//
// Outbound (service -> every connection of the session unless noted)
//   behavior   {session_id, segment_id, ts_ms, directive, utterance, emotion_display, head_movement}
//   transcript {session_id, ts_ms, speaker:"agent"|"user", text, grounding_suppressed}
//   state      {session_id, condition, cursor, question_count, phase, segment_status, listen_pending,
//               ended, current_affect, allowed_actions[, transcript]}
//   error      {session_id, code, message, ts_ms}   (to the sender only)
// Every outbound frame also carries "protocol_version" and "type".

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>

#include <nlohmann/json.hpp>

#include "empathic/affect.hpp"
#include "empathic/dialogue.hpp"

namespace empathic {

inline constexpr int kProtocolVersion = 1;

struct SpeechFinalMsg {
  std::string text;
  TimeSpan span;
};

struct AffectFrameMsg {
  AffectFrame frame;
};

struct WizardActionMsg {
  WizardAction action;
};

struct InboundFrame {
  std::string session_id;  // empty when omitted
  std::variant<SpeechFinalMsg, AffectFrameMsg, WizardActionMsg> body;
};

// Error codes carried by outbound error frames.
namespace wire_error {
inline constexpr std::string_view kBadFrame = "BadFrame";
inline constexpr std::string_view kUnsupportedVersion = "UnsupportedVersion";
inline constexpr std::string_view kUnknownSession = "UnknownSession";
inline constexpr std::string_view kProtocolViolation = "ProtocolViolation";
inline constexpr std::string_view kInvalidSpan = "InvalidSpan";
inline constexpr std::string_view kStaleFrame = "StaleFrame";
inline constexpr std::string_view kWizardAlreadyConnected = "WizardAlreadyConnected";
}  // namespace wire_error

class WireError : public std::runtime_error {
 public:
  WireError(std::string_view code, const std::string& message) : std::runtime_error(message), code_(code) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Throws WireError (BadFrame or UnsupportedVersion).
InboundFrame parse_inbound(std::string_view text);

nlohmann::ordered_json to_json(const InboundFrame& frame);

nlohmann::ordered_json make_error_frame(const std::string& session_id, std::string_view code,
                                        const std::string& message, std::int64_t ts_ms);

}  // namespace empathic
