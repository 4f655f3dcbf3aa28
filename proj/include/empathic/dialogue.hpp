#pragma once
// Agent-initiated discourse-segment state machine.
//
// Every transition is a pure function of (state, event): it returns a new
// state plus the directive to realize, or throws ProtocolViolation and leaves
// the caller's state untouched.
//
// Segment lifecycle: asked -> answered -> grounded. Only a grounded segment
// lets the wizard move on. Canned wizard actions on a grounded segment reopen
// the floor with a new segment for the same question; on an asked segment
// they are spoken without opening one. listen_only makes the next user
// response a listened-only turn: it is stored on the current segment and never
// grounded.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathic/affect.hpp"
#include "empathic/grounding.hpp"

namespace empathic {

enum class Phase { Greeting, SocialChat, PainOpen, PainFollowup, Farewell };
enum class QuestionKind { Open, Closed };
enum class Condition { Backchannel, Empathic };
enum class SegmentStatus { Asked, Answered, Grounded };
enum class WizardAction { NextQuestion, UserRepeatResponse, InterruptApology, Irrelevant, ListenOnly };
enum class DirectiveKind { SpeakQuestion, PerformGrounding, SpeakCanned, AwaitUser, EndSession, RequestGrounding };

inline constexpr WizardAction kAllWizardActions[] = {WizardAction::NextQuestion, WizardAction::UserRepeatResponse,
                                                     WizardAction::InterruptApology, WizardAction::Irrelevant,
                                                     WizardAction::ListenOnly};

std::string_view to_string(Phase v);
std::string_view to_string(QuestionKind v);
std::string_view to_string(Condition v);
std::string_view to_string(SegmentStatus v);
std::string_view to_string(WizardAction v);
std::string_view to_string(DirectiveKind v);
std::optional<Phase> parse_phase(std::string_view s);
std::optional<Condition> parse_condition(std::string_view s);
std::optional<WizardAction> parse_wizard_action(std::string_view s);

struct Question {
  std::string id;
  std::string text;
  QuestionKind kind = QuestionKind::Open;
  Phase phase = Phase::Greeting;

  bool operator==(const Question&) const = default;
};

struct DialogueScript {
  std::vector<Question> questions;

  bool operator==(const DialogueScript&) const = default;
};

// Throws InvalidScript: empty, blank id or text, duplicate ids, phases out of
// order (greeting, social_chat, pain_open, pain_followup, farewell).
void check_script(const DialogueScript& script);
nlohmann::ordered_json to_json(const DialogueScript& script);
// Throws InvalidScript with a JSON-pointer path to the offending value.
DialogueScript dialogue_script_from_json(const nlohmann::json& j);
DialogueScript load_dialogue_script(const std::string& path);  // throws ScriptLoadError

struct CannedTexts {
  std::string repeat_request = "Sorry, I didn't catch that. Could you repeat it, please?";
  std::string apology = "Sorry for interrupting you. Please go on.";
  std::string irrelevant = "I'm sorry, I'm not able to answer that question.";

  bool operator==(const CannedTexts&) const = default;
};

struct UserResponse {
  std::string text;
  UtteranceAffectSummary affect;

  bool operator==(const UserResponse&) const = default;
};

struct DiscourseSegment {
  std::string question_id;
  std::string agent_utterance;
  std::optional<UserResponse> user_response;
  std::optional<GroundingMove> grounding_move;
  SegmentStatus status = SegmentStatus::Asked;
  std::vector<UserResponse> listened;  // responses heard under listen_only

  bool operator==(const DiscourseSegment&) const = default;
};

struct SessionState {
  DialogueScript script;
  CannedTexts canned;
  Condition condition = Condition::Empathic;
  std::size_t cursor = 0;
  std::vector<DiscourseSegment> segments;
  bool listen_pending = false;
  bool ended = false;

  Phase phase() const;
  const DiscourseSegment* current() const { return segments.empty() ? nullptr : &segments.back(); }

  bool operator==(const SessionState&) const = default;
};

struct Directive {
  DirectiveKind kind = DirectiveKind::AwaitUser;
  std::string text;                    // speak_question, speak_canned
  std::optional<GroundingMove> move;   // perform_grounding
  std::size_t segment_index = 0;

  bool operator==(const Directive&) const = default;
};

struct Transition {
  SessionState state;
  Directive directive;
};

Transition start(DialogueScript script, Condition condition, CannedTexts canned = {});

// asked -> answered, directive request_grounding; under listen_only the
// response is stored as listened and the directive is await_user.
Transition on_user_response(const SessionState& state, std::string text, UtteranceAffectSummary affect);

// answered -> grounded, directive perform_grounding. Never advances the cursor.
Transition on_grounding_complete(const SessionState& state, GroundingMove move);

Transition on_wizard(const SessionState& state, WizardAction action);

// Actions on_wizard would accept right now.
std::vector<WizardAction> allowed_actions(const SessionState& state);

nlohmann::ordered_json to_json(const SessionState& state);
nlohmann::ordered_json to_json(const Directive& directive);

}  // namespace empathic
