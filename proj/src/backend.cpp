#include "empathic/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "empathic/errors.hpp"

namespace empathic {

namespace {

std::vector<AffectLabel> parse_labels(const nlohmann::json& j, const std::string& where) {
  std::vector<AffectLabel> out;
  if (j.is_string() && j.get<std::string>() == "none") return out;
  if (!j.is_array()) throw Error(where + ": facial_labels must be an array or \"none\"");
  for (const auto& t : j) {
    const auto label = t.is_string() ? parse_affect_label(t.get<std::string>()) : std::nullopt;
    if (!label) throw Error(where + ": unknown facial label " + t.dump());
    out.push_back(*label);
  }
  return out;
}

bool same_label_set(std::vector<AffectLabel> a, std::vector<AffectLabel> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

std::vector<std::string> words_of(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalpha(uc) || c == '\'') {
      cur += static_cast<char>(std::tolower(uc));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

nlohmann::ordered_json require_response(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw Error(where + ": response must be an object");
  return nlohmann::ordered_json(j);
}

}  // namespace

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Mock ? "mock" : "remote_chat"; }

void check_profile(const BackendProfile& profile) {
  if (profile.timeout_ms <= 0) throw InvalidConfig("backend timeout_ms must be positive");
  if (profile.max_retries < 0) throw InvalidConfig("backend max_retries must be >= 0");
}

nlohmann::ordered_json to_json(const BackendProfile& profile) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(profile.kind));
  if (profile.kind == BackendKind::RemoteChat) {
    j["endpoint"] = profile.endpoint;
    j["path"] = profile.path;
    j["model"] = profile.model;
    j["api_key_env"] = profile.api_key_env;
    j["temperature"] = profile.temperature;
  } else {
    j["rules_path"] = profile.rules_path;
  }
  j["timeout_ms"] = profile.timeout_ms;
  j["max_retries"] = profile.max_retries;
  return j;
}

BackendProfile backend_profile_from_json(const nlohmann::json& j) {
  BackendProfile p;
  const auto kind = j.value("kind", std::string("mock"));
  if (kind == "mock") {
    p.kind = BackendKind::Mock;
  } else if (kind == "remote_chat") {
    p.kind = BackendKind::RemoteChat;
  } else {
    throw InvalidConfig("backend.kind must be 'mock' or 'remote_chat', got '" + kind + "'");
  }
  try {
    p.endpoint = j.value("endpoint", p.endpoint);
    p.path = j.value("path", p.path);
    p.model = j.value("model", p.model);
    p.api_key_env = j.value("api_key_env", p.api_key_env);
    p.temperature = j.value("temperature", p.temperature);
    p.rules_path = j.value("rules_path", p.rules_path);
    p.timeout_ms = j.value("timeout_ms", p.timeout_ms);
    p.max_retries = j.value("max_retries", p.max_retries);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("backend: ") + e.what());
  }
  check_profile(p);
  return p;
}

// --- mock -----------------------------------------------------------------

MockRuleTable MockRuleTable::from_json(const nlohmann::json& j) {
  MockRuleTable t;
  try {
    std::size_t i = 0;
    for (const auto& r : j.at("exact")) {
      const auto where = "exact[" + std::to_string(i++) + "]";
      MockRule rule;
      rule.user_utterance = r.at("user_utterance").get<std::string>();
      rule.facial_labels = parse_labels(r.at("facial_labels"), where);
      rule.emit_malformed = r.value("emit_malformed", false);
      if (!rule.emit_malformed) rule.response = require_response(r.at("response"), where);
      t.exact.push_back(std::move(rule));
    }
    for (const auto& [name, response] : j.at("by_label").items()) {
      const auto label = parse_affect_label(name);
      if (!label) throw Error("by_label: unknown label '" + name + "'");
      t.by_label[*label] = require_response(response, "by_label." + name);
    }
    const auto& valence = j.at("valence");
    t.positive_words = valence.at("positive_words").get<std::vector<std::string>>();
    t.negative_words = valence.at("negative_words").get<std::vector<std::string>>();
    t.positive_response = require_response(valence.at("positive"), "valence.positive");
    t.negative_response = require_response(valence.at("negative"), "valence.negative");
    t.neutral_response = require_response(valence.at("neutral"), "valence.neutral");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("mock rule table: ") + e.what());
  }
  return t;
}

MockRuleTable MockRuleTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mock rule table '" + path + "'");
  try {
    return from_json(nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("mock rule table '" + path + "': " + e.what());
  }
}

std::string mock_complete(const MockRuleTable& rules, const nlohmann::json& payload) {
  const auto utterance = payload.value("user_utterance", std::string());
  const auto labels = parse_labels(payload.value("facial_labels", nlohmann::json("none")), "payload");

  for (const auto& rule : rules.exact) {
    if (rule.user_utterance == utterance && same_label_set(rule.facial_labels, labels)) {
      if (rule.emit_malformed) return R"({"user_dominant_emotion": "neutral", "VAD": {"valence": )";
      return rule.response.dump();
    }
  }
  if (!labels.empty()) {
    if (const auto it = rules.by_label.find(labels.front()); it != rules.by_label.end()) return it->second.dump();
  }

  int score = 0;
  for (const auto& w : words_of(utterance)) {
    if (std::find(rules.positive_words.begin(), rules.positive_words.end(), w) != rules.positive_words.end()) ++score;
    if (std::find(rules.negative_words.begin(), rules.negative_words.end(), w) != rules.negative_words.end()) --score;
  }
  if (score > 0) return rules.positive_response.dump();
  if (score < 0) return rules.negative_response.dump();
  return rules.neutral_response.dump();
}

std::string MockBackend::complete(const PromptDocument& prompt, std::chrono::milliseconds) {
  return mock_complete(rules_, nlohmann::json::parse(prompt.user));
}

// --- remote ---------------------------------------------------------------

RemoteChatBackend::RemoteChatBackend(BackendProfile profile) : profile_(std::move(profile)) {
  check_profile(profile_);
  if (const char* key = std::getenv(profile_.api_key_env.c_str())) api_key_ = key;
  if (api_key_.empty()) spdlog::warn("remote backend: ${} is not set; sending no Authorization header", profile_.api_key_env);
}

nlohmann::ordered_json RemoteChatBackend::request_body(const PromptDocument& prompt) const {
  nlohmann::ordered_json body;
  body["model"] = profile_.model;
  body["temperature"] = profile_.temperature;
  body["response_format"] = {{"type", "json_object"}};
  auto messages = nlohmann::ordered_json::array();
  messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  for (const auto& note : prompt.feedback) messages.push_back({{"role", "user"}, {"content", note}});
  body["messages"] = std::move(messages);
  return body;
}

std::string RemoteChatBackend::complete(const PromptDocument& prompt, std::chrono::milliseconds timeout) {
  httplib::Client client(profile_.endpoint);
  const auto secs = static_cast<time_t>(timeout.count() / 1000);
  const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const auto body = request_body(prompt).dump();
  spdlog::debug("remote backend request {}{}: {}", profile_.endpoint, profile_.path, body);

  auto res = client.Post(profile_.path, headers, body, "application/json");
  if (!res) throw BackendUnavailable("request failed: " + httplib::to_string(res.error()));
  spdlog::debug("remote backend response {}: {}", res->status, res->body);
  if (res->status != 200) throw BackendUnavailable("HTTP status " + std::to_string(res->status));
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw BackendUnavailable(std::string("unexpected response body: ") + e.what());
  }
}

std::shared_ptr<TextBackend> make_backend(const BackendProfile& profile) {
  check_profile(profile);
  if (profile.kind == BackendKind::Mock) {
    if (profile.rules_path.empty()) throw InvalidConfig("mock backend needs rules_path");
    return std::make_shared<MockBackend>(MockRuleTable::load(profile.rules_path));
  }
  return std::make_shared<RemoteChatBackend>(profile);
}

}  // namespace empathic
