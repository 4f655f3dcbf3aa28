#include "empathic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "empathic/errors.hpp"

namespace empathic {

namespace fs = std::filesystem;

std::vector<CorpusLog> load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error("corpus '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CorpusLog> corpus;
  for (const auto& f : files) {
    auto events = read_event_log_file(f.string());
    if (!events.empty()) corpus.push_back({f.filename().string(), std::move(events)});
  }
  return corpus;
}

bool same_surface(const GroundingMove& a, const GroundingMove& b) {
  return a.utterance == b.utterance && a.agent_emotion == b.agent_emotion && a.head_movement == b.head_movement;
}

double AblationReport::differing_fraction() const {
  return turns.empty() ? 0.0 : static_cast<double>(differing_turns) / static_cast<double>(turns.size());
}

AblationReport run_ablation(const std::vector<CorpusLog>& corpus, const std::shared_ptr<TextBackend>& backend) {
  if (!backend) throw InvalidConfig("ablation needs a backend");
  AblationReport report;
  report.backend = backend->name();
  report.deterministic = backend->deterministic();
  for (const auto& log : corpus) {
    if (log.events.empty()) continue;
    BackendProfile profile;
    EmpathicOptions options;
    try {
      const auto& start = log.events.front().payload;
      profile = backend_profile_from_json(start.at("backend"));
      options.fallback_utterance = start.at("fallback_utterance").get<std::string>();
    } catch (const std::exception& e) {
      throw MalformedLog(1, log.name + ": bad session_start payload: " + e.what());
    }
    for (std::size_t i = 0; i < log.events.size(); ++i) {
      const auto& e = log.events[i];
      if (e.kind != EventKind::GroundingRequest) continue;
      AblationTurn turn;
      GroundingRequest request;
      try {
        request = grounding_request_from_json(e.payload.at("request"));
        turn.segment_id = e.payload.at("segment_id").get<std::size_t>();
      } catch (const std::exception& ex) {
        throw MalformedLog(i + 1, log.name + ": bad grounding_request payload: " + ex.what());
      }
      turn.log = log.name;
      turn.user_utterance = request.user_utterance;
      turn.facial_labels = request.facial_labels;
      turn.with_affect = generate_empathic(request, backend, profile, options).move;
      request.facial_labels.clear();
      turn.without_affect = generate_empathic(request, backend, profile, options).move;
      turn.differs = !same_surface(turn.with_affect, turn.without_affect);
      if (turn.differs) ++report.differing_turns;
      report.turns.push_back(std::move(turn));
    }
  }
  return report;
}

nlohmann::ordered_json to_json(const AblationReport& report) {
  nlohmann::ordered_json j;
  j["backend"] = report.backend;
  j["deterministic"] = report.deterministic;
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : report.turns) {
    nlohmann::ordered_json r;
    r["log"] = t.log;
    r["segment_id"] = t.segment_id;
    r["user_utterance"] = t.user_utterance;
    auto labels = nlohmann::ordered_json::array();
    for (auto l : t.facial_labels) labels.push_back(std::string(to_string(l)));
    r["facial_labels"] = std::move(labels);
    r["with_affect_move"] = to_json(t.with_affect);
    r["without_affect_move"] = to_json(t.without_affect);
    r["differs"] = t.differs;
    turns.push_back(std::move(r));
  }
  j["turns"] = std::move(turns);
  j["summary"] = {{"turns", report.turns.size()},
                  {"differing_turns", report.differing_turns},
                  {"differing_fraction", report.differing_fraction()}};
  return j;
}

// --- policy comparison -------------------------------------------------------

namespace {

void bump(std::vector<std::pair<std::string, std::size_t>>& counts, const std::string& key) {
  for (auto& [k, n] : counts) {
    if (k == key) {
      ++n;
      return;
    }
  }
  counts.emplace_back(key, 1);
}

std::vector<std::pair<std::string, std::size_t>> zeroed(const std::vector<std::string>& keys) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& k : keys) out.emplace_back(k, 0);
  return out;
}

std::size_t word_count(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

void accumulate(PolicyStats& stats, const std::vector<SessionEvent>& events, std::size_t& words) {
  for (const auto& e : events) {
    if (e.kind != EventKind::GroundingMove) continue;
    const auto move = grounding_move_from_json(e.payload.at("move"));
    ++stats.turns;
    bump(stats.agent_emotions, move.agent_emotion);
    bump(stats.head_movements, move.head_movement);
    bump(stats.sources, std::string(to_string(move.source)));
    words += word_count(move.utterance);
  }
}

void finish(PolicyStats& stats, std::size_t words) {
  if (stats.turns == 0) return;
  std::size_t neutral = 0;
  for (const auto& [k, n] : stats.agent_emotions) {
    if (k == "neutral") neutral += n;
  }
  stats.mean_utterance_words = static_cast<double>(words) / static_cast<double>(stats.turns);
  stats.non_neutral_fraction = static_cast<double>(stats.turns - neutral) / static_cast<double>(stats.turns);
}

nlohmann::ordered_json counts_json(const std::vector<std::pair<std::string, std::size_t>>& counts) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [k, n] : counts) j[k] = n;
  return j;
}

nlohmann::ordered_json to_json(const PolicyStats& s) {
  nlohmann::ordered_json j;
  j["turns"] = s.turns;
  j["agent_emotion_counts"] = counts_json(s.agent_emotions);
  j["head_movement_counts"] = counts_json(s.head_movements);
  j["source_counts"] = counts_json(s.sources);
  j["mean_utterance_words"] = s.mean_utterance_words;
  j["non_neutral_fraction"] = s.non_neutral_fraction;
  return j;
}

}  // namespace

PolicyComparisonReport compare_policies(const std::vector<CorpusLog>& corpus, std::uint64_t seed,
                                        const std::shared_ptr<TextBackend>& backend) {
  PolicyComparisonReport report;
  report.seed = seed;
  report.logs = corpus.size();

  std::vector<std::string> emotions = kDefaultEmotionOptions;
  std::vector<std::string> movements = kDefaultMovementOptions;
  if (!corpus.empty() && !corpus.front().events.empty()) {
    const auto& start = corpus.front().events.front().payload;
    if (start.contains("emotion_options")) emotions = start["emotion_options"].get<std::vector<std::string>>();
    if (start.contains("movement_options")) movements = start["movement_options"].get<std::vector<std::string>>();
  }
  const std::vector<std::string> sources = {"llm", "fallback", "backchannel"};
  for (auto* stats : {&report.backchannel, &report.empathic}) {
    stats->agent_emotions = zeroed(emotions);
    stats->head_movements = zeroed(movements);
    stats->sources = zeroed(sources);
  }

  std::size_t bc_words = 0;
  std::size_t em_words = 0;
  for (const auto& log : corpus) {
    ReplayOverrides bc;
    bc.condition = Condition::Backchannel;
    bc.seed = seed;
    accumulate(report.backchannel, replay(log.events, bc), bc_words);

    ReplayOverrides em;
    em.condition = Condition::Empathic;
    em.seed = seed;
    em.backend = backend;
    accumulate(report.empathic, replay(log.events, em), em_words);
  }
  finish(report.backchannel, bc_words);
  finish(report.empathic, em_words);
  return report;
}

nlohmann::ordered_json to_json(const PolicyComparisonReport& report) {
  nlohmann::ordered_json j;
  j["seed"] = report.seed;
  j["logs"] = report.logs;
  j["conditions"] = {{"backchannel", to_json(report.backchannel)}, {"empathic", to_json(report.empathic)}};
  return j;
}

// --- synthetic sessions ------------------------------------------------------

namespace {

const char* const kSocialQuestions[] = {
    "How's the weather today?",
    "Did you do anything fun over the weekend?",
    "What did you have for breakfast this morning?",
};

const char* const kFollowupQuestions[] = {
    "How would you rate your pain right now, from zero to ten?",
    "Where do you feel the pain the most?",
    "Does the pain get worse at any particular time of day?",
    "How has the pain affected your sleep?",
    "Are you able to do your usual daily activities?",
    "What helps you when the pain is bad?",
};

const char* const kUserUtterances[] = {
    "cloudy.",
    "it's raining outside and sometimes it is showing to be snowy and I like it personally but it is a little bit "
    "uh not that comfortable but it's all right",
    "that is correct",
    "I slept badly last night",
    "my back has been hurting since Monday",
    "I went for a walk with my dog and it was lovely",
    "not much really",
    "the pain is about a four today",
    "I feel better than yesterday",
    "work has been stressful and I am tired",
    "I had lunch with my sister and we laughed a lot",
    "my knee still aches when I climb the stairs",
};

}  // namespace

DialogueScript synthetic_script(int questions) {
  if (questions < 3) throw InvalidConfig("a synthetic script needs at least 3 questions");
  DialogueScript script;
  auto add = [&](std::string text, QuestionKind kind, Phase phase) {
    char id[16];
    std::snprintf(id, sizeof id, "q%02zu", script.questions.size() + 1);
    script.questions.push_back({id, std::move(text), kind, phase});
  };
  const int middle = questions - 2;
  const int social = std::min(2, middle - 1);
  const int followups = middle - 1 - social;

  add("Hello, I'm your check-in assistant. How are you doing today?", QuestionKind::Open, Phase::Greeting);
  for (int i = 0; i < social; ++i) add(kSocialQuestions[i % std::size(kSocialQuestions)], QuestionKind::Open, Phase::SocialChat);
  add("Can you tell me about the pain you have been experiencing?", QuestionKind::Open, Phase::PainOpen);
  for (int i = 0; i < followups; ++i) {
    add(kFollowupQuestions[i % std::size(kFollowupQuestions)], i % 2 ? QuestionKind::Closed : QuestionKind::Open,
        Phase::PainFollowup);
  }
  add("Thank you for talking with me today. Goodbye!", QuestionKind::Closed, Phase::Farewell);
  return script;
}

std::unique_ptr<Session> run_synthetic_session(const SessionConfig& config, const SyntheticOptions& options,
                                               std::shared_ptr<TextBackend> backend) {
  if (options.fps <= 0) throw InvalidConfig("fps must be positive");
  auto cfg = config;
  cfg.script = synthetic_script(options.questions);
  cfg.seed = options.seed;
  cfg.auto_advance = false;

  auto now = std::make_shared<std::int64_t>(0);
  auto session = make_session(options.session_id, cfg, [now] { return *now; }, std::move(backend));
  session->start();

  // Plain modulo draws keep the input stream identical across standard libraries.
  std::mt19937_64 rng(options.seed);
  auto draw = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  for (int q = 0; q < options.questions; ++q) {
    const std::int64_t start = *now + 500;
    const std::int64_t duration = 1000 + static_cast<std::int64_t>(draw(2001));
    const auto dominant = kAllAffectLabels[draw(std::size(kAllAffectLabels))];
    const auto frames = duration * options.fps / 1000;
    for (std::int64_t i = 0; i <= frames; ++i) {
      const auto ts = start + static_cast<std::int64_t>(std::llround(static_cast<double>(i) * 1000.0 / options.fps));
      const auto label = draw(100) < 70 ? dominant : kAllAffectLabels[draw(std::size(kAllAffectLabels))];
      *now = ts;
      session->on_affect_frame({ts, label});
    }
    *now = start + duration;
    const auto& text = kUserUtterances[draw(std::size(kUserUtterances))];
    session->on_speech_final(text, {start, start + duration});
    *now += 300;
    session->on_wizard_message(WizardAction::NextQuestion);
  }
  return session;
}

// --- latency -----------------------------------------------------------------

double LatencyReport::max_pipeline_ms() const {
  double m = 0.0;
  for (const auto& t : turns) m = std::max(m, t.pipeline_ms());
  return m;
}

double LatencyReport::mean_pipeline_ms() const {
  if (turns.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& t : turns) sum += t.pipeline_ms();
  return sum / static_cast<double>(turns.size());
}

double LatencyReport::percentile_pipeline_ms(double p) const {
  if (turns.empty()) return 0.0;
  std::vector<double> v;
  for (const auto& t : turns) v.push_back(t.pipeline_ms());
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

bool LatencyReport::within_budget() const { return max_pipeline_ms() < budget_ms; }

LatencyReport latency_report(const Session& session, double budget_ms) {
  return {session.turn_timings(), budget_ms};
}

nlohmann::ordered_json to_json(const LatencyReport& report) {
  nlohmann::ordered_json j;
  auto turns = nlohmann::ordered_json::array();
  for (const auto& t : report.turns) {
    turns.push_back({{"segment_id", t.segment_id},
                     {"total_ms", t.total_ms},
                     {"backend_ms", t.backend_ms},
                     {"pipeline_ms", t.pipeline_ms()}});
  }
  j["turns"] = std::move(turns);
  j["summary"] = {{"turns", report.turns.size()},
                  {"budget_ms", report.budget_ms},
                  {"max_pipeline_ms", report.max_pipeline_ms()},
                  {"mean_pipeline_ms", report.mean_pipeline_ms()},
                  {"p95_pipeline_ms", report.percentile_pipeline_ms(95.0)},
                  {"within_budget", report.within_budget()}};
  return j;
}

}  // namespace empathic
