#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace empathic {

struct GroundingRequest;

// Section headers of the shipped template, in the order they must appear.
inline const std::vector<std::string> kPromptSections = {
    "## ROLE",
    "## INPUT CHANNELS",
    "## MULTIMODAL AFFECT RECOGNITION",
    "## MULTIMODAL INTERPRETATION",
    "## CONVERSATION STRUCTURE",
    "## RULES",
};
inline constexpr std::string_view kFormatSection = "## INPUT AND OUTPUT FORMAT";

// Editable system-prompt template. Lines starting with "#!" are template
// comments. Placeholders: {{emotion_options}}, {{movement_options}},
// {{verbal_rules}}.
class PromptTemplate {
 public:
  static PromptTemplate builtin();
  static PromptTemplate load(const std::string& path);  // throws Error
  static PromptTemplate from_text(std::string text);

  const std::string& text() const { return text_; }
  // SHA-256 of the template text after comment stripping, lowercase hex.
  const std::string& checksum() const { return checksum_; }

  std::string render(const GroundingRequest& request) const;

 private:
  explicit PromptTemplate(std::string text);
  std::string text_;
  std::string checksum_;
};

struct PromptDocument {
  std::string system;
  std::string user;                   // the input payload, serialized JSON
  std::vector<std::string> feedback;  // retry notes, appended in order
};

// Payload keys: agent_utterance, user_utterance, facial_labels,
// BC_verbal_rules, BC_nonverbal_options. facial_labels is the string "none"
// when there are no labels.
nlohmann::ordered_json build_payload(const GroundingRequest& request);

PromptDocument build_prompt(const GroundingRequest& request,
                            const PromptTemplate& tmpl = PromptTemplate::builtin());

std::string sha256_hex(std::string_view data);

}  // namespace empathic
