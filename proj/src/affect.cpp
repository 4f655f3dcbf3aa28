#include "empathic/affect.hpp"

#include <algorithm>
#include <istream>
#include <stdexcept>

#include "empathic/errors.hpp"

namespace empathic {

namespace {

constexpr std::array<std::string_view, 8> kLabelNames = {
    "neutral", "surprise", "fear", "happiness", "sadness", "disgust", "anger", "contempt",
};

constexpr std::size_t kLabelCount = kLabelNames.size();

std::size_t index_of(AffectLabel label) { return static_cast<std::size_t>(label); }

}  // namespace

std::string_view to_string(AffectLabel label) { return kLabelNames[index_of(label)]; }

std::optional<AffectLabel> parse_affect_label(std::string_view token) {
  for (std::size_t i = 0; i < kLabelCount; ++i) {
    if (kLabelNames[i] == token) return static_cast<AffectLabel>(i);
  }
  return std::nullopt;
}

PooledLabel pool_window(std::span<const AffectFrame> frames, int window_len) {
  if (frames.empty()) throw EmptyWindow();
  if (window_len <= 0) throw std::invalid_argument("window_len must be positive");
  if (frames.size() > static_cast<std::size_t>(window_len)) {
    throw std::invalid_argument("window holds more frames than window_len");
  }

  std::array<int, kLabelCount> counts{};
  std::array<std::size_t, kLabelCount> first_seen{};
  first_seen.fill(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto k = index_of(frames[i].label);
    if (counts[k]++ == 0) first_seen[k] = i;
  }

  std::size_t best = index_of(frames.front().label);
  for (std::size_t k = 0; k < kLabelCount; ++k) {
    if (counts[k] > counts[best] || (counts[k] == counts[best] && counts[k] > 0 &&
                                     first_seen[k] < first_seen[best])) {
      best = k;
    }
  }
  return PooledLabel{static_cast<AffectLabel>(best), frames.front().timestamp_ms,
                     static_cast<int>(frames.size())};
}

std::vector<AffectFrame> segment_frames(std::span<const AffectFrame> stream, TimeSpan span) {
  if (span.start_ms > span.end_ms) {
    throw InvalidSpan("span start " + std::to_string(span.start_ms) + " is after end " +
                      std::to_string(span.end_ms));
  }
  std::vector<AffectFrame> out;
  for (const auto& f : stream) {
    if (f.timestamp_ms >= span.start_ms && f.timestamp_ms <= span.end_ms) out.push_back(f);
  }
  return out;
}

std::vector<PooledLabel> pool_stream(std::span<const AffectFrame> frames, int window_len) {
  if (window_len <= 0) throw std::invalid_argument("window_len must be positive");
  std::vector<PooledLabel> pooled;
  pooled.reserve(frames.size() / static_cast<std::size_t>(window_len) + 1);
  for (std::size_t start = 0; start < frames.size(); start += static_cast<std::size_t>(window_len)) {
    const auto n = std::min(frames.size() - start, static_cast<std::size_t>(window_len));
    pooled.push_back(pool_window(frames.subspan(start, n), window_len));
  }
  return pooled;
}

UtteranceAffectSummary summarize_utterance(std::span<const AffectFrame> frames, int window_len) {
  UtteranceAffectSummary summary;
  if (frames.empty()) return summary;
  summary.span = {frames.front().timestamp_ms, frames.back().timestamp_ms};

  const auto pooled = pool_stream(frames, window_len);
  std::array<std::size_t, kLabelCount> first_seen{};
  first_seen.fill(pooled.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    const auto label = pooled[i].label;
    if (summary.counts[label]++ == 0) first_seen[index_of(label)] = i;
  }

  std::vector<AffectLabel> candidates;
  for (const auto& [label, count] : summary.counts) {
    if (label != AffectLabel::Neutral) candidates.push_back(label);
  }
  std::stable_sort(candidates.begin(), candidates.end(), [&](AffectLabel a, AffectLabel b) {
    const int ca = summary.counts.at(a);
    const int cb = summary.counts.at(b);
    if (ca != cb) return ca > cb;
    return first_seen[index_of(a)] < first_seen[index_of(b)];
  });
  if (candidates.size() > 2) candidates.resize(2);
  summary.top_labels = std::move(candidates);
  return summary;
}

nlohmann::json to_json(const AffectFrame& frame) {
  return nlohmann::json{{"ts_ms", frame.timestamp_ms}, {"label", std::string(to_string(frame.label))}};
}

AffectFrame affect_frame_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("affect frame must be a JSON object");
  const auto ts = j.find("ts_ms");
  if (ts == j.end() || !ts->is_number_integer()) throw Error("affect frame needs integer 'ts_ms'");
  const auto lbl = j.find("label");
  if (lbl == j.end() || !lbl->is_string()) throw Error("affect frame needs string 'label'");
  const auto label = parse_affect_label(lbl->get<std::string>());
  if (!label) throw Error("unknown affect label '" + lbl->get<std::string>() + "'");
  const auto ms = ts->get<std::int64_t>();
  if (ms < 0) throw Error("negative ts_ms");
  return AffectFrame{ms, *label};
}

nlohmann::json to_json(const UtteranceAffectSummary& summary) {
  nlohmann::json top = nlohmann::json::array();
  for (auto l : summary.top_labels) top.push_back(std::string(to_string(l)));
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [label, n] : summary.counts) counts[std::string(to_string(label))] = n;
  return nlohmann::json{{"top_labels", std::move(top)},
                        {"counts", std::move(counts)},
                        {"span", {summary.span.start_ms, summary.span.end_ms}}};
}

std::vector<AffectFrame> read_affect_frames(std::istream& in) {
  std::vector<AffectFrame> frames;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    AffectFrame frame;
    try {
      frame = affect_frame_from_json(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw AffectParseError(lineno, e.what());
    } catch (const Error& e) {
      throw AffectParseError(lineno, e.what());
    }
    if (!frames.empty() && frame.timestamp_ms < frames.back().timestamp_ms) {
      throw AffectParseError(lineno, "timestamp decreases");
    }
    frames.push_back(frame);
  }
  return frames;
}

}  // namespace empathic
