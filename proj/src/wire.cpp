#include "empathic/wire.hpp"

namespace empathic {

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) throw WireError(wire_error::kBadFrame, std::string("missing '") + key + "'");
  return *it;
}

std::int64_t int_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_number_integer()) throw WireError(wire_error::kBadFrame, std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw WireError(wire_error::kBadFrame, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

InboundFrame parse_inbound(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw WireError(wire_error::kBadFrame, std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw WireError(wire_error::kBadFrame, "frame must be a JSON object");
  const auto version = int_field(j, "protocol_version");
  if (version != kProtocolVersion) {
    throw WireError(wire_error::kUnsupportedVersion,
                    "protocol_version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kProtocolVersion) + ")");
  }

  InboundFrame frame;
  if (const auto it = j.find("session_id"); it != j.end()) {
    if (!it->is_string()) throw WireError(wire_error::kBadFrame, "'session_id' must be a string");
    frame.session_id = it->get<std::string>();
  }
  const auto type = string_field(j, "type");
  if (type == "speech_final") {
    frame.body = SpeechFinalMsg{string_field(j, "text"), {int_field(j, "start_ms"), int_field(j, "end_ms")}};
  } else if (type == "affect_frame") {
    const auto ts = int_field(j, "ts_ms");
    if (ts < 0) throw WireError(wire_error::kBadFrame, "'ts_ms' must be non-negative");
    const auto name = string_field(j, "label");
    const auto label = parse_affect_label(name);
    if (!label) throw WireError(wire_error::kBadFrame, "unknown affect label '" + name + "'");
    frame.body = AffectFrameMsg{{ts, *label}};
  } else if (type == "wizard_action") {
    const auto name = string_field(j, "action");
    const auto action = parse_wizard_action(name);
    if (!action) throw WireError(wire_error::kBadFrame, "unknown wizard action '" + name + "'");
    frame.body = WizardActionMsg{*action};
  } else {
    throw WireError(wire_error::kBadFrame, "unknown frame type '" + type + "'");
  }
  return frame;
}

nlohmann::ordered_json to_json(const InboundFrame& frame) {
  nlohmann::ordered_json j;
  j["protocol_version"] = kProtocolVersion;
  std::visit(overloaded{
                 [&](const SpeechFinalMsg& m) {
                   j["type"] = "speech_final";
                   j["text"] = m.text;
                   j["start_ms"] = m.span.start_ms;
                   j["end_ms"] = m.span.end_ms;
                 },
                 [&](const AffectFrameMsg& m) {
                   j["type"] = "affect_frame";
                   j["ts_ms"] = m.frame.timestamp_ms;
                   j["label"] = std::string(to_string(m.frame.label));
                 },
                 [&](const WizardActionMsg& m) {
                   j["type"] = "wizard_action";
                   j["action"] = std::string(to_string(m.action));
                 },
             },
             frame.body);
  if (!frame.session_id.empty()) j["session_id"] = frame.session_id;
  return j;
}

nlohmann::ordered_json make_error_frame(const std::string& session_id, std::string_view code,
                                        const std::string& message, std::int64_t ts_ms) {
  nlohmann::ordered_json j;
  j["protocol_version"] = kProtocolVersion;
  j["type"] = "error";
  j["session_id"] = session_id;
  j["code"] = std::string(code);
  j["message"] = message;
  j["ts_ms"] = ts_ms;
  return j;
}

}  // namespace empathic
