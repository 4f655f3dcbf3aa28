#include "empathic/grounding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <thread>

#include <spdlog/spdlog.h>

#include "empathic/backend.hpp"
#include "empathic/errors.hpp"
#include "empathic/prompt.hpp"

namespace empathic {

namespace {

using Clock = std::chrono::steady_clock;

bool contains(const std::vector<std::string>& set, const std::string& value) {
  return std::find(set.begin(), set.end(), value) != set.end();
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// ```json ... ``` -> inner text; anything else is returned trimmed.
std::string_view strip_fence(std::string_view raw) {
  auto s = trim(raw);
  if (s.rfind("```", 0) != 0) return s;
  const auto nl = s.find('\n');
  if (nl == std::string_view::npos) return s;
  auto body = s.substr(nl + 1);
  const auto close = body.rfind("```");
  if (close == std::string_view::npos) return s;
  return trim(body.substr(0, close));
}

ValidationError make_error(ValidationErrorKind kind, std::string field, std::string value, std::string message) {
  return ValidationError{kind, std::move(field), std::move(value), std::move(message)};
}

std::string short_text(const nlohmann::json& j) {
  auto s = j.is_string() ? j.get<std::string>() : j.dump();
  if (s.size() > 80) s = s.substr(0, 77) + "...";
  return s;
}

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Runs one backend call on its own thread so a backend that ignores its
// timeout cannot stall the dialog. A call that overruns is abandoned.
std::string call_with_deadline(const std::shared_ptr<TextBackend>& backend, const PromptDocument& prompt,
                               std::chrono::milliseconds timeout) {
  auto task = std::make_shared<std::packaged_task<std::string()>>(
      [backend, prompt, timeout] { return backend->complete(prompt, timeout); });
  auto result = task->get_future();
  std::thread([task] { (*task)(); }).detach();
  if (result.wait_for(timeout) != std::future_status::ready) {
    throw BackendUnavailable("backend call exceeded " + std::to_string(timeout.count()) + " ms");
  }
  try {
    return result.get();
  } catch (const BackendUnavailable&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendUnavailable(std::string("backend error: ") + e.what());
  }
}

}  // namespace

std::vector<std::string> default_verbal_rules() {
  return {
      "Do not give medical advice or inappropriate recommendations.",
      "Do not ask the user any questions.",
      "Keep the utterance short and non-generic; make the user feel heard and reflect their emotion in an "
      "appropriate way.",
  };
}

void check_request(const GroundingRequest& request) {
  if (request.facial_labels.size() > 2) throw InvalidConfig("at most two facial labels");
  for (std::size_t i = 0; i < request.facial_labels.size(); ++i) {
    if (request.facial_labels[i] == AffectLabel::Neutral) throw InvalidConfig("facial labels exclude neutral");
    for (std::size_t j = 0; j < i; ++j) {
      if (request.facial_labels[j] == request.facial_labels[i]) throw InvalidConfig("duplicate facial label");
    }
  }
  if (request.emotion_options.empty()) throw InvalidConfig("emotion_options is empty");
  if (request.movement_options.empty()) throw InvalidConfig("movement_options is empty");
}

nlohmann::ordered_json to_json(const GroundingRequest& request) {
  nlohmann::ordered_json j;
  j["agent_utterance"] = request.agent_utterance;
  j["user_utterance"] = request.user_utterance;
  auto labels = nlohmann::ordered_json::array();
  for (auto l : request.facial_labels) labels.push_back(std::string(to_string(l)));
  j["facial_labels"] = std::move(labels);
  j["emotion_options"] = request.emotion_options;
  j["movement_options"] = request.movement_options;
  j["verbal_rules"] = request.verbal_rules;
  j["forbid_questions"] = request.forbid_questions;
  return j;
}

GroundingRequest grounding_request_from_json(const nlohmann::json& j) {
  GroundingRequest r;
  try {
    r.agent_utterance = j.at("agent_utterance").get<std::string>();
    r.user_utterance = j.at("user_utterance").get<std::string>();
    for (const auto& l : j.at("facial_labels")) {
      const auto label = parse_affect_label(l.get<std::string>());
      if (!label) throw Error("unknown facial label '" + l.get<std::string>() + "'");
      r.facial_labels.push_back(*label);
    }
    r.emotion_options = j.at("emotion_options").get<std::vector<std::string>>();
    r.movement_options = j.at("movement_options").get<std::vector<std::string>>();
    r.verbal_rules = j.at("verbal_rules").get<std::vector<std::string>>();
    r.forbid_questions = j.value("forbid_questions", true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad grounding request: ") + e.what());
  }
  return r;
}

std::string_view to_string(MoveSource source) {
  switch (source) {
    case MoveSource::Llm:
      return "llm";
    case MoveSource::Fallback:
      return "fallback";
    case MoveSource::Backchannel:
      return "backchannel";
  }
  return "llm";
}

nlohmann::ordered_json to_output_document(const GroundingMove& move) {
  nlohmann::ordered_json j;
  j["user_dominant_emotion"] = move.user_dominant_emotion;
  j["VAD"] = {{"valence", move.vad.valence}, {"arousal", move.vad.arousal}, {"dominance", move.vad.dominance}};
  j["agent_emotion"] = move.agent_emotion;
  j["head_movement"] = move.head_movement;
  j["utterance"] = move.utterance;
  j["explanation"] = move.explanation;
  return j;
}

nlohmann::ordered_json to_json(const GroundingMove& move) {
  auto j = to_output_document(move);
  j["source"] = std::string(to_string(move.source));
  return j;
}

GroundingMove grounding_move_from_json(const nlohmann::json& j) {
  GroundingMove m;
  try {
    m.user_dominant_emotion = j.at("user_dominant_emotion").get<std::string>();
    const auto& vad = j.at("VAD");
    m.vad = {vad.at("valence").get<double>(), vad.at("arousal").get<double>(), vad.at("dominance").get<double>()};
    m.agent_emotion = j.at("agent_emotion").get<std::string>();
    m.head_movement = j.at("head_movement").get<std::string>();
    m.utterance = j.at("utterance").get<std::string>();
    m.explanation = j.at("explanation").get<std::string>();
    const auto src = j.at("source").get<std::string>();
    if (src == "llm") {
      m.source = MoveSource::Llm;
    } else if (src == "fallback") {
      m.source = MoveSource::Fallback;
    } else if (src == "backchannel") {
      m.source = MoveSource::Backchannel;
    } else {
      throw Error("unknown move source '" + src + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("bad grounding move: ") + e.what());
  }
  return m;
}

std::string move_invariant_problem(const GroundingMove& move, const GroundingRequest& request) {
  if (blank(move.user_dominant_emotion)) return "user_dominant_emotion is empty";
  for (double v : {move.vad.valence, move.vad.arousal, move.vad.dominance}) {
    if (!std::isfinite(v) || v < -1.0 || v > 1.0) return "VAD component out of [-1, 1]";
  }
  if (!contains(request.emotion_options, move.agent_emotion)) return "agent_emotion not an option";
  if (!contains(request.movement_options, move.head_movement)) return "head_movement not an option";
  if (blank(move.utterance)) return "utterance is empty";
  if (blank(move.explanation)) return "explanation is empty";
  if (request.forbid_questions && move.utterance.find('?') != std::string::npos) return "utterance asks a question";
  return {};
}

std::string_view to_string(ValidationErrorKind kind) {
  switch (kind) {
    case ValidationErrorKind::MissingKey:
      return "MissingKey";
    case ValidationErrorKind::OptionViolation:
      return "OptionViolation";
    case ValidationErrorKind::RangeViolation:
      return "RangeViolation";
    case ValidationErrorKind::MalformedDocument:
      return "MalformedDocument";
    case ValidationErrorKind::RuleViolation:
      return "RuleViolation";
  }
  return "MalformedDocument";
}

std::string ValidationError::feedback() const {
  std::string out = "Your previous reply was rejected (" + std::string(to_string(kind));
  if (!field.empty()) out += " in '" + field + "'";
  if (!value.empty()) out += ", value '" + value + "'";
  out += "): " + message + ". Reply again with one JSON object in the required output format.";
  return out;
}

ValidationResult validate_move(std::string_view raw, const GroundingRequest& request) {
  using K = ValidationErrorKind;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(strip_fence(raw));
  } catch (const nlohmann::json::exception& e) {
    return make_error(K::MalformedDocument, "", "", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) return make_error(K::MalformedDocument, "", "", "expected a JSON object");

  static const std::vector<std::string> kStringKeys = {"user_dominant_emotion", "agent_emotion", "head_movement",
                                                       "utterance", "explanation"};
  static const std::vector<std::string> kVadKeys = {"valence", "arousal", "dominance"};
  std::vector<std::string> warnings;

  for (const auto& key : {"user_dominant_emotion", "VAD", "agent_emotion", "head_movement", "utterance",
                          "explanation"}) {
    if (!doc.contains(key)) return make_error(K::MissingKey, key, "", "required key is missing");
  }
  for (const auto& key : kStringKeys) {
    const auto& v = doc[key];
    if (!v.is_string()) return make_error(K::MalformedDocument, key, short_text(v), "expected a string");
    if (blank(v.get<std::string>())) return make_error(K::MissingKey, key, "", "required value is empty");
  }
  const auto& vad = doc["VAD"];
  if (!vad.is_object()) return make_error(K::MalformedDocument, "VAD", short_text(vad), "expected an object");
  for (const auto& key : kVadKeys) {
    if (!vad.contains(key)) return make_error(K::MissingKey, "VAD." + key, "", "required key is missing");
    const auto& v = vad[key];
    if (!v.is_number()) return make_error(K::MalformedDocument, "VAD." + key, short_text(v), "expected a number");
  }

  GroundingMove move;
  move.user_dominant_emotion = doc["user_dominant_emotion"].get<std::string>();
  move.agent_emotion = doc["agent_emotion"].get<std::string>();
  move.head_movement = doc["head_movement"].get<std::string>();
  move.utterance = doc["utterance"].get<std::string>();
  move.explanation = doc["explanation"].get<std::string>();
  move.source = MoveSource::Llm;

  if (!contains(request.emotion_options, move.agent_emotion)) {
    return make_error(K::OptionViolation, "agent_emotion", move.agent_emotion, "not one of the provided options");
  }
  if (!contains(request.movement_options, move.head_movement)) {
    return make_error(K::OptionViolation, "head_movement", move.head_movement, "not one of the provided options");
  }

  double* targets[] = {&move.vad.valence, &move.vad.arousal, &move.vad.dominance};
  for (std::size_t i = 0; i < kVadKeys.size(); ++i) {
    const double v = vad[kVadKeys[i]].get<double>();
    const auto field = "VAD." + kVadKeys[i];
    if (!std::isfinite(v) || std::abs(v) > 1.0 + kVadClampSlack + 1e-12) {
      return make_error(K::RangeViolation, field, vad[kVadKeys[i]].dump(), "must lie within [-1, 1]");
    }
    if (std::abs(v) > 1.0) {
      warnings.push_back(field + " " + vad[kVadKeys[i]].dump() + " clamped to [-1, 1]");
    }
    *targets[i] = std::clamp(v, -1.0, 1.0);
  }

  if (request.forbid_questions && move.utterance.find('?') != std::string::npos) {
    return make_error(K::RuleViolation, "utterance", move.utterance, "the utterance must not ask a question");
  }

  if (!parse_affect_label(move.user_dominant_emotion)) {
    warnings.push_back("user_dominant_emotion '" + move.user_dominant_emotion + "' is not a recognizer label");
  }
  for (const auto& [key, value] : doc.items()) {
    if (key != "VAD" && std::find(kStringKeys.begin(), kStringKeys.end(), key) == kStringKeys.end()) {
      warnings.push_back("ignored extra key '" + key + "'");
    }
  }
  return ValidatedMove{std::move(move), std::move(warnings)};
}

GroundingMove fallback_move(const GroundingRequest& request, const EmpathicOptions& options) {
  GroundingMove m;
  m.user_dominant_emotion = "not_assessed";
  m.vad = {};
  m.agent_emotion = contains(request.emotion_options, "neutral") ? "neutral" : request.emotion_options.front();
  m.head_movement = contains(request.movement_options, "head_nod") ? "head_nod" : request.movement_options.front();
  m.utterance = options.fallback_utterance;
  m.explanation = "fallback after the model produced no valid move";
  m.source = MoveSource::Fallback;
  return m;
}

GenerationResult generate_empathic(const GroundingRequest& request, const std::shared_ptr<TextBackend>& backend,
                                   const BackendProfile& profile, const EmpathicOptions& options) {
  check_request(request);
  check_profile(profile);
  if (!backend) throw InvalidConfig("no backend");
  if (blank(options.fallback_utterance)) throw InvalidConfig("fallback utterance is empty");

  const auto started = Clock::now();
  const auto per_call = std::chrono::milliseconds(profile.timeout_ms);
  const auto deadline = started + per_call * (profile.max_retries + 1);

  GenerationResult result;
  auto prompt = build_prompt(request, options.prompt_template ? *options.prompt_template : PromptTemplate::builtin());
  for (int attempt = 0; attempt <= profile.max_retries; ++attempt) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (remaining.count() <= 0) break;
    ++result.attempts;

    std::string raw;
    const auto call_start = Clock::now();
    try {
      raw = call_with_deadline(backend, prompt, std::min(per_call, remaining));
      result.backend_ms += elapsed_ms(call_start);
    } catch (const BackendUnavailable& e) {
      result.backend_ms += elapsed_ms(call_start);
      spdlog::warn("grounding backend '{}' attempt {}: {}", backend->name(), attempt + 1, e.what());
      result.violations.push_back(std::string("BackendUnavailable: ") + e.what());
      continue;
    }

    auto validated = validate_move(raw, request);
    if (auto* ok = std::get_if<ValidatedMove>(&validated)) {
      result.move = std::move(ok->move);
      result.warnings = std::move(ok->warnings);
      result.total_ms = elapsed_ms(started);
      return result;
    }
    const auto& err = std::get<ValidationError>(validated);
    result.violations.push_back(std::string(to_string(err.kind)) + ": " + err.field + " " + err.message);
    prompt.feedback.push_back(err.feedback());
  }

  spdlog::warn("grounding generation fell back after {} attempt(s)", result.attempts);
  result.move = fallback_move(request, options);
  result.total_ms = elapsed_ms(started);
  return result;
}

GroundingMove generate_backchannel(BackchannelRng& rng, const BackchannelConfig& config) {
  if (config.utterances.empty()) throw InvalidConfig("backchannel utterance set is empty");
  if (config.movements.empty()) throw InvalidConfig("backchannel movement set is empty");
  GroundingMove m;
  m.user_dominant_emotion = "not_assessed";
  m.vad = {};
  m.agent_emotion = "neutral";
  m.head_movement = config.movements[rng.pick(config.movements.size())];
  m.utterance = config.utterances[rng.pick(config.utterances.size())];
  m.explanation = "baseline backchannel";
  m.source = MoveSource::Backchannel;
  return m;
}

}  // namespace empathic
