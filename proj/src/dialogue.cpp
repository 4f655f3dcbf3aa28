#include "empathic/dialogue.hpp"

#include <fstream>
#include <set>

#include "empathic/errors.hpp"

namespace empathic {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(std::string_view s, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(E v, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table) {
    if (value == v) return name;
  }
  return "?";
}

constexpr std::pair<Phase, std::string_view> kPhases[] = {
    {Phase::Greeting, "greeting"},      {Phase::SocialChat, "social_chat"}, {Phase::PainOpen, "pain_open"},
    {Phase::PainFollowup, "pain_followup"}, {Phase::Farewell, "farewell"},
};
constexpr std::pair<QuestionKind, std::string_view> kKinds[] = {{QuestionKind::Open, "open"},
                                                                {QuestionKind::Closed, "closed"}};
constexpr std::pair<Condition, std::string_view> kConditions[] = {{Condition::Backchannel, "backchannel"},
                                                                  {Condition::Empathic, "empathic"}};
constexpr std::pair<SegmentStatus, std::string_view> kStatuses[] = {
    {SegmentStatus::Asked, "asked"}, {SegmentStatus::Answered, "answered"}, {SegmentStatus::Grounded, "grounded"}};
constexpr std::pair<WizardAction, std::string_view> kActions[] = {
    {WizardAction::NextQuestion, "next_question"},
    {WizardAction::UserRepeatResponse, "user_repeat_response"},
    {WizardAction::InterruptApology, "interrupt_apology"},
    {WizardAction::Irrelevant, "irrelevant"},
    {WizardAction::ListenOnly, "listen_only"},
};
constexpr std::pair<DirectiveKind, std::string_view> kDirectives[] = {
    {DirectiveKind::SpeakQuestion, "speak_question"}, {DirectiveKind::PerformGrounding, "perform_grounding"},
    {DirectiveKind::SpeakCanned, "speak_canned"},     {DirectiveKind::AwaitUser, "await_user"},
    {DirectiveKind::EndSession, "end_session"},       {DirectiveKind::RequestGrounding, "request_grounding"},
};

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

DiscourseSegment open_segment(const Question& q, std::string agent_utterance) {
  DiscourseSegment seg;
  seg.question_id = q.id;
  seg.agent_utterance = std::move(agent_utterance);
  seg.status = SegmentStatus::Asked;
  return seg;
}

void require_live(const SessionState& state, std::string_view what) {
  if (state.ended) throw ProtocolViolation(std::string(what) + ": the session has ended");
  if (state.segments.empty()) throw ProtocolViolation(std::string(what) + ": no open segment");
}

const std::string& canned_text(const CannedTexts& canned, WizardAction action) {
  switch (action) {
    case WizardAction::UserRepeatResponse:
      return canned.repeat_request;
    case WizardAction::InterruptApology:
      return canned.apology;
    default:
      return canned.irrelevant;
  }
}

nlohmann::ordered_json to_json(const UserResponse& r) {
  nlohmann::ordered_json j;
  j["text"] = r.text;
  j["affect"] = to_json(r.affect);
  return j;
}

}  // namespace

std::string_view to_string(Phase v) { return name_of(v, kPhases); }
std::string_view to_string(QuestionKind v) { return name_of(v, kKinds); }
std::string_view to_string(Condition v) { return name_of(v, kConditions); }
std::string_view to_string(SegmentStatus v) { return name_of(v, kStatuses); }
std::string_view to_string(WizardAction v) { return name_of(v, kActions); }
std::string_view to_string(DirectiveKind v) { return name_of(v, kDirectives); }
std::optional<Phase> parse_phase(std::string_view s) { return lookup(s, kPhases); }
std::optional<Condition> parse_condition(std::string_view s) { return lookup(s, kConditions); }
std::optional<WizardAction> parse_wizard_action(std::string_view s) { return lookup(s, kActions); }

void check_script(const DialogueScript& script) {
  if (script.questions.empty()) throw InvalidScript("script has no questions");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < script.questions.size(); ++i) {
    const auto& q = script.questions[i];
    const auto where = "/questions/" + std::to_string(i);
    if (blank(q.id)) throw InvalidScript(where + "/id: empty id");
    if (blank(q.text)) throw InvalidScript(where + "/text: empty text");
    if (!ids.insert(q.id).second) throw InvalidScript(where + "/id: duplicate id '" + q.id + "'");
    if (i > 0 && q.phase < script.questions[i - 1].phase) {
      throw InvalidScript(where + "/phase: '" + std::string(to_string(q.phase)) + "' cannot follow '" +
                          std::string(to_string(script.questions[i - 1].phase)) + "'");
    }
  }
}

nlohmann::ordered_json to_json(const DialogueScript& script) {
  auto qs = nlohmann::ordered_json::array();
  for (const auto& q : script.questions) {
    nlohmann::ordered_json j;
    j["id"] = q.id;
    j["text"] = q.text;
    j["kind"] = std::string(to_string(q.kind));
    j["phase"] = std::string(to_string(q.phase));
    qs.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["questions"] = std::move(qs);
  return out;
}

DialogueScript dialogue_script_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidScript("/: expected an object");
  const auto qs = j.find("questions");
  if (qs == j.end()) throw InvalidScript("/questions: missing");
  if (!qs->is_array()) throw InvalidScript("/questions: expected an array");

  auto string_field = [](const nlohmann::json& q, const std::string& where, const char* key) {
    const auto it = q.find(key);
    if (it == q.end()) throw InvalidScript(where + "/" + key + ": missing");
    if (!it->is_string()) throw InvalidScript(where + "/" + key + ": expected a string");
    return it->get<std::string>();
  };

  DialogueScript script;
  for (std::size_t i = 0; i < qs->size(); ++i) {
    const auto& q = (*qs)[i];
    const auto where = "/questions/" + std::to_string(i);
    if (!q.is_object()) throw InvalidScript(where + ": expected an object");
    Question question;
    question.id = string_field(q, where, "id");
    question.text = string_field(q, where, "text");
    const auto kind = string_field(q, where, "kind");
    const auto k = lookup(kind, kKinds);
    if (!k) throw InvalidScript(where + "/kind: unknown kind '" + kind + "'");
    question.kind = *k;
    const auto phase = string_field(q, where, "phase");
    const auto p = parse_phase(phase);
    if (!p) throw InvalidScript(where + "/phase: unknown phase '" + phase + "'");
    question.phase = *p;
    script.questions.push_back(std::move(question));
  }
  check_script(script);
  return script;
}

DialogueScript load_dialogue_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScriptLoadError("cannot open script '" + path + "'");
  try {
    return dialogue_script_from_json(nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const nlohmann::json::parse_error& e) {
    throw ScriptLoadError(path + ": " + e.what());
  } catch (const InvalidScript& e) {
    throw ScriptLoadError(path + ": " + e.what());
  }
}

Phase SessionState::phase() const {
  return cursor < script.questions.size() ? script.questions[cursor].phase : Phase::Farewell;
}

Transition start(DialogueScript script, Condition condition, CannedTexts canned) {
  check_script(script);
  Transition t;
  t.state.script = std::move(script);
  t.state.canned = std::move(canned);
  t.state.condition = condition;
  const auto& first = t.state.script.questions.front();
  t.state.segments.push_back(open_segment(first, first.text));
  t.directive = Directive{DirectiveKind::SpeakQuestion, first.text, std::nullopt, 0};
  return t;
}

Transition on_user_response(const SessionState& state, std::string text, UtteranceAffectSummary affect) {
  require_live(state, "user response");
  const auto& seg = state.segments.back();
  const auto index = state.segments.size() - 1;

  if (state.listen_pending && seg.status != SegmentStatus::Answered) {
    Transition t{state, {}};
    t.state.listen_pending = false;
    t.state.segments.back().listened.push_back(UserResponse{std::move(text), std::move(affect)});
    t.directive = Directive{DirectiveKind::AwaitUser, "", std::nullopt, index};
    return t;
  }
  if (seg.status != SegmentStatus::Asked) {
    throw ProtocolViolation("user response: current segment is " + std::string(to_string(seg.status)) +
                            ", expected asked");
  }
  Transition t{state, {}};
  auto& open = t.state.segments.back();
  open.user_response = UserResponse{std::move(text), std::move(affect)};
  open.status = SegmentStatus::Answered;
  t.directive = Directive{DirectiveKind::RequestGrounding, "", std::nullopt, index};
  return t;
}

Transition on_grounding_complete(const SessionState& state, GroundingMove move) {
  require_live(state, "grounding complete");
  const auto& seg = state.segments.back();
  if (seg.status != SegmentStatus::Answered) {
    throw ProtocolViolation("grounding complete: current segment is " + std::string(to_string(seg.status)) +
                            ", expected answered");
  }
  Transition t{state, {}};
  auto& open = t.state.segments.back();
  open.grounding_move = move;
  open.status = SegmentStatus::Grounded;
  t.directive = Directive{DirectiveKind::PerformGrounding, "", std::move(move), t.state.segments.size() - 1};
  return t;
}

Transition on_wizard(const SessionState& state, WizardAction action) {
  const auto label = "wizard " + std::string(to_string(action));
  require_live(state, label);
  const auto status = state.segments.back().status;
  if (status == SegmentStatus::Answered) {
    throw ProtocolViolation(label + ": a grounding move is still pending for the current segment");
  }

  Transition t{state, {}};
  auto& s = t.state;
  switch (action) {
    case WizardAction::NextQuestion: {
      if (status != SegmentStatus::Grounded) {
        throw ProtocolViolation(label + ": the current question has not been answered and grounded yet");
      }
      s.listen_pending = false;
      if (s.cursor + 1 >= s.script.questions.size()) {
        s.cursor = s.script.questions.size();
        s.ended = true;
        t.directive = Directive{DirectiveKind::EndSession, "", std::nullopt, s.segments.size() - 1};
        return t;
      }
      ++s.cursor;
      const auto& q = s.script.questions[s.cursor];
      s.segments.push_back(open_segment(q, q.text));
      t.directive = Directive{DirectiveKind::SpeakQuestion, q.text, std::nullopt, s.segments.size() - 1};
      return t;
    }
    case WizardAction::UserRepeatResponse:
    case WizardAction::InterruptApology:
    case WizardAction::Irrelevant: {
      const auto& text = canned_text(s.canned, action);
      s.listen_pending = false;
      if (status == SegmentStatus::Grounded) {
        s.segments.push_back(open_segment(s.script.questions[s.cursor], text));
      }
      t.directive = Directive{DirectiveKind::SpeakCanned, text, std::nullopt, s.segments.size() - 1};
      return t;
    }
    case WizardAction::ListenOnly:
      s.listen_pending = true;
      t.directive = Directive{DirectiveKind::AwaitUser, "", std::nullopt, s.segments.size() - 1};
      return t;
  }
  throw ProtocolViolation(label + ": unknown action");
}

std::vector<WizardAction> allowed_actions(const SessionState& state) {
  std::vector<WizardAction> out;
  for (auto a : kAllWizardActions) {
    try {
      (void)on_wizard(state, a);
      out.push_back(a);
    } catch (const ProtocolViolation&) {
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const SessionState& state) {
  nlohmann::ordered_json j;
  j["condition"] = std::string(to_string(state.condition));
  j["cursor"] = state.cursor;
  j["phase"] = std::string(to_string(state.phase()));
  j["listen_pending"] = state.listen_pending;
  j["ended"] = state.ended;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& seg : state.segments) {
    nlohmann::ordered_json s;
    s["question_id"] = seg.question_id;
    s["agent_utterance"] = seg.agent_utterance;
    s["status"] = std::string(to_string(seg.status));
    s["user_response"] = seg.user_response ? to_json(*seg.user_response) : nlohmann::ordered_json();
    s["grounding_move"] = seg.grounding_move ? to_json(*seg.grounding_move) : nlohmann::ordered_json();
    auto listened = nlohmann::ordered_json::array();
    for (const auto& r : seg.listened) listened.push_back(to_json(r));
    s["listened"] = std::move(listened);
    segs.push_back(std::move(s));
  }
  j["segments"] = std::move(segs);
  j["script"] = to_json(state.script);
  j["canned"] = {{"repeat_request", state.canned.repeat_request},
                 {"apology", state.canned.apology},
                 {"irrelevant", state.canned.irrelevant}};
  return j;
}

nlohmann::ordered_json to_json(const Directive& d) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(d.kind));
  j["segment_index"] = d.segment_index;
  if (!d.text.empty()) j["text"] = d.text;
  if (d.move) j["move"] = to_json(*d.move);
  return j;
}

}  // namespace empathic
