#pragma once
// Facial-expression label ingestion, pooling and per-utterance summaries.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace empathic {

// The 8-class recognizer vocabulary. Order is the recognizer's output order.
enum class AffectLabel : std::uint8_t {
  Neutral,
  Surprise,
  Fear,
  Happiness,
  Sadness,
  Disgust,
  Anger,
  Contempt,
};

inline constexpr std::array<AffectLabel, 8> kAllAffectLabels = {
    AffectLabel::Neutral, AffectLabel::Surprise, AffectLabel::Fear,  AffectLabel::Happiness,
    AffectLabel::Sadness, AffectLabel::Disgust,  AffectLabel::Anger, AffectLabel::Contempt,
};

std::string_view to_string(AffectLabel label);
std::optional<AffectLabel> parse_affect_label(std::string_view token);

inline constexpr int kDefaultPoolWindow = 5;
inline constexpr int kNominalFrameRate = 15;

struct AffectFrame {
  std::int64_t timestamp_ms = 0;
  AffectLabel label = AffectLabel::Neutral;

  bool operator==(const AffectFrame&) const = default;
};

struct PooledLabel {
  AffectLabel label = AffectLabel::Neutral;
  std::int64_t window_start_ms = 0;
  int window_len = 0;

  bool operator==(const PooledLabel&) const = default;
};

// Closed interval [start_ms, end_ms] in session-relative milliseconds.
struct TimeSpan {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;

  bool operator==(const TimeSpan&) const = default;
};

struct UtteranceAffectSummary {
  std::vector<AffectLabel> top_labels;  // <= 2, never neutral, descending count
  std::map<AffectLabel, int> counts;    // over pooled labels
  TimeSpan span;

  bool operator==(const UtteranceAffectSummary&) const = default;
};

// Modal label of one window; ties go to the label that occurs first.
// Throws EmptyWindow on empty input and std::invalid_argument when the
// window holds more than window_len frames.
PooledLabel pool_window(std::span<const AffectFrame> frames, int window_len = kDefaultPoolWindow);

// Frames with start_ms <= ts <= end_ms, order preserved. Throws InvalidSpan
// when start_ms > end_ms.
std::vector<AffectFrame> segment_frames(std::span<const AffectFrame> stream, TimeSpan span);

// Pools consecutive non-overlapping windows aligned to the first frame and
// returns the two most frequent non-neutral pooled labels. The summary span
// covers the first to last frame (zero span when empty).
UtteranceAffectSummary summarize_utterance(std::span<const AffectFrame> frames,
                                           int window_len = kDefaultPoolWindow);

// Pooled labels for every window, exposed for diagnostics.
std::vector<PooledLabel> pool_stream(std::span<const AffectFrame> frames,
                                     int window_len = kDefaultPoolWindow);

// {"ts_ms": <int>, "label": "<label>"}
nlohmann::json to_json(const AffectFrame& frame);
AffectFrame affect_frame_from_json(const nlohmann::json& j);  // throws Error

nlohmann::json to_json(const UtteranceAffectSummary& summary);

// One record per line; blank lines skipped. Unknown labels, negative or
// decreasing timestamps raise AffectParseError naming the line.
std::vector<AffectFrame> read_affect_frames(std::istream& in);

}  // namespace empathic
