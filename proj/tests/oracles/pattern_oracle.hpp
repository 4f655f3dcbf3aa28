#pragma once
// Structural checks on engine state, written against the serialized form so
// they share nothing with the engine's own bookkeeping.

#include <string>

#include <nlohmann/json.hpp>

namespace oracle {

// Returns "" when the serialized state satisfies the segment pattern
// (asked answered grounded)* with at most one trailing incomplete segment.
inline std::string segment_pattern_problem(const nlohmann::json& state) {
  const auto& segs = state.at("segments");
  std::string prev_qid;
  const auto& questions = state.at("script").at("questions");
  std::size_t prev_index = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& s = segs[i];
    const auto status = s.at("status").get<std::string>();
    const bool last = i + 1 == segs.size();
    if (!last && status != "grounded") return "segment " + std::to_string(i) + " left " + status;
    const bool has_response = s.contains("user_response") && !s.at("user_response").is_null();
    const bool has_move = s.contains("grounding_move") && !s.at("grounding_move").is_null();
    if (status == "asked" && (has_response || has_move)) return "asked segment carries a response or move";
    if (status == "answered" && (!has_response || has_move)) return "answered segment without response or with move";
    if (status == "grounded" && (!has_response || !has_move)) return "grounded segment without response and move";

    std::size_t index = questions.size();
    for (std::size_t q = 0; q < questions.size(); ++q) {
      if (questions[q].at("id") == s.at("question_id")) index = q;
    }
    if (index == questions.size()) return "segment names an unknown question";
    if (i > 0 && index < prev_index) return "segments go back in script order";
    prev_index = index;
  }
  const auto cursor = state.at("cursor").get<std::size_t>();
  if (cursor > questions.size()) return "cursor past the end of the script";
  if (!segs.empty() && !state.at("ended").get<bool>() && prev_index != cursor) {
    return "current segment does not belong to the cursor question";
  }
  return "";
}

}  // namespace oracle
