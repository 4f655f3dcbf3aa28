#pragma once
// Text-generation backends: the deterministic mock rule table and a remote
// chat-completion endpoint.

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathic/affect.hpp"
#include "empathic/prompt.hpp"

namespace empathic {

enum class BackendKind { RemoteChat, Mock };
std::string_view to_string(BackendKind kind);

struct BackendProfile {
  BackendKind kind = BackendKind::Mock;
  // remote_chat
  std::string endpoint = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-3.5-turbo-0125";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  // mock
  std::string rules_path;

  int timeout_ms = 8000;
  int max_retries = 2;
};

// Throws InvalidConfig on timeout_ms <= 0 or max_retries < 0.
void check_profile(const BackendProfile& profile);
nlohmann::ordered_json to_json(const BackendProfile& profile);
BackendProfile backend_profile_from_json(const nlohmann::json& j);

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  // Returns the raw completion text. Throws BackendUnavailable on transport
  // failure or timeout.
  virtual std::string complete(const PromptDocument& prompt, std::chrono::milliseconds timeout) = 0;
  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
};

// --- mock -----------------------------------------------------------------

struct MockRule {
  std::string user_utterance;
  std::vector<AffectLabel> facial_labels;  // compared as a set
  nlohmann::ordered_json response;         // output document
  bool emit_malformed = false;
};

struct MockRuleTable {
  std::vector<MockRule> exact;
  std::map<AffectLabel, nlohmann::ordered_json> by_label;
  std::vector<std::string> positive_words;
  std::vector<std::string> negative_words;
  nlohmann::ordered_json positive_response;
  nlohmann::ordered_json negative_response;
  nlohmann::ordered_json neutral_response;

  static MockRuleTable load(const std::string& path);  // throws Error
  static MockRuleTable from_json(const nlohmann::json& j);
};

// Pure: exact (user_utterance, facial_labels) rules first, then the rule for
// the first facial label, then a word-list valence guess over the text.
std::string mock_complete(const MockRuleTable& rules, const nlohmann::json& payload);

class MockBackend : public TextBackend {
 public:
  explicit MockBackend(MockRuleTable rules) : rules_(std::move(rules)) {}
  std::string complete(const PromptDocument& prompt, std::chrono::milliseconds timeout) override;
  std::string name() const override { return "mock"; }
  bool deterministic() const override { return true; }
  const MockRuleTable& rules() const { return rules_; }

 private:
  MockRuleTable rules_;
};

// --- remote ---------------------------------------------------------------

// POSTs an OpenAI-style chat completion. The key is read from the profile's
// environment variable at construction and only ever sent as a header.
class RemoteChatBackend : public TextBackend {
 public:
  explicit RemoteChatBackend(BackendProfile profile);
  std::string complete(const PromptDocument& prompt, std::chrono::milliseconds timeout) override;
  std::string name() const override { return "remote_chat"; }
  bool deterministic() const override { return false; }

  nlohmann::ordered_json request_body(const PromptDocument& prompt) const;

 private:
  BackendProfile profile_;
  std::string api_key_;
};

std::shared_ptr<TextBackend> make_backend(const BackendProfile& profile);

}  // namespace empathic
