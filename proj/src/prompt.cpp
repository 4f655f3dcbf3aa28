#include "empathic/prompt.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "builtin_prompt_template.hpp"
#include "empathic/errors.hpp"
#include "empathic/grounding.hpp"

namespace empathic {

namespace {

std::string strip_template_comments(const std::string& raw) {
  std::istringstream in(raw);
  std::string out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("#!", 0) == 0) continue;
    out += line;
    out += '\n';
  }
  while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
  return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

void replace_all(std::string& text, std::string_view needle, const std::string& value) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), value);
    pos += value.size();
  }
}

}  // namespace

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

PromptTemplate::PromptTemplate(std::string text)
    : text_(strip_template_comments(text)), checksum_(sha256_hex(text_)) {}

PromptTemplate PromptTemplate::builtin() {
  static const PromptTemplate tmpl{std::string(kBuiltinPromptTemplate)};
  return tmpl;
}

PromptTemplate PromptTemplate::from_text(std::string text) { return PromptTemplate(std::move(text)); }

PromptTemplate PromptTemplate::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt template '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(buf.str());
}

std::string PromptTemplate::render(const GroundingRequest& request) const {
  std::string out = text_;
  std::vector<std::string> rules;
  for (std::size_t i = 0; i < request.verbal_rules.size(); ++i) {
    rules.push_back(std::string(1, static_cast<char>('a' + i % 26)) + ") " + request.verbal_rules[i]);
  }
  replace_all(out, "{{emotion_options}}", join(request.emotion_options, ", "));
  replace_all(out, "{{movement_options}}", join(request.movement_options, ", "));
  replace_all(out, "{{verbal_rules}}", join(rules, " "));
  return out;
}

nlohmann::ordered_json build_payload(const GroundingRequest& request) {
  nlohmann::ordered_json payload;
  payload["agent_utterance"] = request.agent_utterance;
  payload["user_utterance"] = request.user_utterance;
  if (request.facial_labels.empty()) {
    payload["facial_labels"] = "none";
  } else {
    auto labels = nlohmann::ordered_json::array();
    for (auto l : request.facial_labels) labels.push_back(std::string(to_string(l)));
    payload["facial_labels"] = std::move(labels);
  }
  payload["BC_verbal_rules"] = request.verbal_rules;
  payload["BC_nonverbal_options"] = {{"agent_emotion", request.emotion_options},
                                     {"head_movement", request.movement_options}};
  return payload;
}

PromptDocument build_prompt(const GroundingRequest& request, const PromptTemplate& tmpl) {
  return PromptDocument{tmpl.render(request), build_payload(request).dump(), {}};
}

}  // namespace empathic
