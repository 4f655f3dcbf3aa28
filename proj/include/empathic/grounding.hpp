#pragma once
// Grounding moves: the request handed to the generator, the validated move it
// returns, the empathic (LLM) route with retry/fallback and the backchannel
// baseline policy.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathic/affect.hpp"
#include "empathic/prompt.hpp"

namespace empathic {

class TextBackend;
struct BackendProfile;

inline const std::vector<std::string> kDefaultEmotionOptions = {"neutral", "sad", "happy", "concerned",
                                                                "surprised"};
inline const std::vector<std::string> kDefaultMovementOptions = {"no_movement", "head_nod"};
std::vector<std::string> default_verbal_rules();

// VAD components are accepted up to this far outside [-1, 1] and clamped.
inline constexpr double kVadClampSlack = 0.05;

struct GroundingRequest {
  std::string agent_utterance;
  std::string user_utterance;
  std::vector<AffectLabel> facial_labels;  // <= 2, non-neutral
  std::vector<std::string> emotion_options = kDefaultEmotionOptions;
  std::vector<std::string> movement_options = kDefaultMovementOptions;
  std::vector<std::string> verbal_rules = default_verbal_rules();
  // The default rules forbid asking the user anything; the validator rejects
  // utterances containing '?' while this is set.
  bool forbid_questions = true;

  bool operator==(const GroundingRequest&) const = default;
};

// Throws InvalidConfig when the request breaks its invariants.
void check_request(const GroundingRequest& request);

nlohmann::ordered_json to_json(const GroundingRequest& request);
GroundingRequest grounding_request_from_json(const nlohmann::json& j);

struct Vad {
  double valence = 0.0;
  double arousal = 0.0;
  double dominance = 0.0;

  bool operator==(const Vad&) const = default;
};

enum class MoveSource { Llm, Fallback, Backchannel };
std::string_view to_string(MoveSource source);

struct GroundingMove {
  std::string user_dominant_emotion;
  Vad vad;
  std::string agent_emotion;
  std::string head_movement;
  std::string utterance;
  std::string explanation;
  MoveSource source = MoveSource::Llm;

  bool operator==(const GroundingMove&) const = default;
};

// The model-facing document: the six content keys, no source.
nlohmann::ordered_json to_output_document(const GroundingMove& move);
nlohmann::ordered_json to_json(const GroundingMove& move);
GroundingMove grounding_move_from_json(const nlohmann::json& j);

// Every invariant a move must satisfy against the request that produced it.
// Returns an empty string when the move is valid, else the first problem.
std::string move_invariant_problem(const GroundingMove& move, const GroundingRequest& request);

enum class ValidationErrorKind { MissingKey, OptionViolation, RangeViolation, MalformedDocument, RuleViolation };
std::string_view to_string(ValidationErrorKind kind);

struct ValidationError {
  ValidationErrorKind kind;
  std::string field;  // offending key ("" for a document that is not an object)
  std::string value;  // offending value as text, when there is one
  std::string message;

  // One-line description fed back to the model on retry.
  std::string feedback() const;
};

struct ValidatedMove {
  GroundingMove move;
  std::vector<std::string> warnings;
};

using ValidationResult = std::variant<ValidatedMove, ValidationError>;

// Strict check of a raw model completion. Accepts one JSON object, optionally
// wrapped in a single ``` fence. The returned move has source Llm.
ValidationResult validate_move(std::string_view raw, const GroundingRequest& request);

struct EmpathicOptions {
  std::string fallback_utterance = "Thank you for sharing that with me.";
  std::optional<PromptTemplate> prompt_template;  // builtin when unset
};

struct GenerationResult {
  GroundingMove move;
  int attempts = 0;
  std::vector<std::string> violations;  // one per failed attempt
  std::vector<std::string> warnings;
  double backend_ms = 0.0;  // wall time spent waiting on the backend
  double total_ms = 0.0;
};

// Deterministic neutral move used after the retry budget is spent.
GroundingMove fallback_move(const GroundingRequest& request, const EmpathicOptions& options);

// prompt -> backend -> validate, retrying up to profile.max_retries times
// with the violation appended. Never throws for backend or model failures:
// those end in the fallback move. Each call is bounded by profile.timeout_ms
// and the whole call by timeout_ms * (max_retries + 1).
GenerationResult generate_empathic(const GroundingRequest& request, const std::shared_ptr<TextBackend>& backend,
                                   const BackendProfile& profile, const EmpathicOptions& options = {});

// Session-owned generator for the backchannel policy. mt19937_64 output is
// fixed by the standard, and draws use plain modulo, so sequences are
// identical across platforms.
class BackchannelRng {
 public:
  explicit BackchannelRng(std::uint64_t seed) : engine_(seed) {}
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
};

struct BackchannelConfig {
  std::vector<std::string> utterances = {"Noted.", "OK.", "I see.", "Alright."};
  std::vector<std::string> movements = kDefaultMovementOptions;
};

// Neutral acknowledgement with a uniformly drawn head movement and utterance.
// Throws InvalidConfig when either set is empty.
GroundingMove generate_backchannel(BackchannelRng& rng, const BackchannelConfig& config);

}  // namespace empathic
