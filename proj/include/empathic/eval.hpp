#pragma once
// Batch evaluation over session-log corpora: affect ablation, policy
// comparison, synthetic sessions and the per-turn latency report.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "empathic/backend.hpp"
#include "empathic/event_log.hpp"
#include "empathic/session.hpp"

namespace empathic {

struct CorpusLog {
  std::string name;  // file name, or a caller-chosen label
  std::vector<SessionEvent> events;
};

// Every *.jsonl file in dir, sorted by file name. Throws MalformedLog.
std::vector<CorpusLog> load_corpus(const std::string& dir);

struct AblationTurn {
  std::string log;
  std::size_t segment_id = 0;
  std::string user_utterance;
  std::vector<AffectLabel> facial_labels;
  GroundingMove with_affect;
  GroundingMove without_affect;
  bool differs = false;
};

struct AblationReport {
  std::string backend;
  bool deterministic = true;
  std::vector<AblationTurn> turns;
  std::size_t differing_turns = 0;
  double differing_fraction() const;
};

// utterance, agent emotion and head movement all equal.
bool same_surface(const GroundingMove& a, const GroundingMove& b);

// One turn per logged grounding_request: the logged request is regenerated
// as-is and with facial_labels removed.
AblationReport run_ablation(const std::vector<CorpusLog>& corpus, const std::shared_ptr<TextBackend>& backend);
nlohmann::ordered_json to_json(const AblationReport& report);

struct PolicyStats {
  std::size_t turns = 0;
  std::vector<std::pair<std::string, std::size_t>> agent_emotions;  // option order, then first seen
  std::vector<std::pair<std::string, std::size_t>> head_movements;
  std::vector<std::pair<std::string, std::size_t>> sources;
  double mean_utterance_words = 0.0;
  double non_neutral_fraction = 0.0;
};

struct PolicyComparisonReport {
  std::uint64_t seed = 0;
  std::size_t logs = 0;
  PolicyStats backchannel;
  PolicyStats empathic;
};

// Replays every log under both conditions with the given seed. A null backend
// is rebuilt from each log's backend profile.
PolicyComparisonReport compare_policies(const std::vector<CorpusLog>& corpus, std::uint64_t seed,
                                        const std::shared_ptr<TextBackend>& backend = nullptr);
nlohmann::ordered_json to_json(const PolicyComparisonReport& report);

struct SyntheticOptions {
  int questions = 10;
  std::uint64_t seed = 1;
  int fps = 15;
  std::string session_id = "synthetic";
};

// Script with a greeting, social chat, one open pain question, follow-ups and
// a farewell, sized to `questions` (at least 3).
DialogueScript synthetic_script(int questions);

// Drives a full session on a virtual clock: per question an affect stream,
// speech_final, the grounding move, then next_question from the wizard.
// Uses config (its script is replaced), writes a log file when config.log_dir
// is set.
std::unique_ptr<Session> run_synthetic_session(const SessionConfig& config, const SyntheticOptions& options,
                                               std::shared_ptr<TextBackend> backend = nullptr);

struct LatencyReport {
  std::vector<TurnTiming> turns;
  double budget_ms = 50.0;
  double max_pipeline_ms() const;
  double mean_pipeline_ms() const;
  double percentile_pipeline_ms(double p) const;  // nearest rank, p in (0, 100]
  bool within_budget() const;
};

LatencyReport latency_report(const Session& session, double budget_ms = 50.0);
nlohmann::ordered_json to_json(const LatencyReport& report);

}  // namespace empathic
