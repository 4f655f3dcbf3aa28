// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <spdlog/spdlog.h>

#include "empathic/affect.hpp"
#include "empathic/backend.hpp"
#include "empathic/dialogue.hpp"
#include "empathic/errors.hpp"
#include "empathic/eval.hpp"
#include "empathic/grounding.hpp"
#include "empathic/session.hpp"
#include "oracles/affect_oracle.hpp"
#include "oracles/move_oracle.hpp"
#include "oracles/pattern_oracle.hpp"

using namespace empathic;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances.
constexpr int kAffectStreams = 1000;
constexpr int kAffectMaxLen = 300;
constexpr double kAffectRuntimeLimitS = 5.0;
constexpr int kFuzzOutputs = 10000;
constexpr double kDeadlineSlackMs = 25.0;  // scheduler slack on top of timeout_ms * (max_retries + 1)
constexpr int kEnumDepth = 8;
constexpr int kUnprunedDepth = 6;
constexpr int kReplayQuestions = 10;
constexpr int kBackchannelDraws = 10000;
constexpr double kMovementLow = 0.47;
constexpr double kMovementHigh = 0.53;
constexpr double kLatencyBudgetMs = 50.0;

const std::string kConfigDir = EMPATHIC_CONFIG_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

SessionConfig mock_config() {
  auto c = load_session_config(kConfigDir + "/session.json");
  c.log_dir.clear();
  c.backend.kind = BackendKind::Mock;
  c.backend.rules_path = kConfigDir + "/mock_rules.json";
  return c;
}

// --- 1. affect summaries ------------------------------------------------------

Outcome affect_oracle_equivalence() {
  std::mt19937_64 rng(20240601);
  int mismatches = 0;
  std::string first;
  double library_s = 0.0;
  const auto t0 = Clock::now();
  for (int s = 0; s < kAffectStreams; ++s) {
    const int len = 1 + static_cast<int>(rng() % kAffectMaxLen);
    // Few distinct labels per stream so counts collide and tie-breaks matter.
    const int alphabet = 1 + static_cast<int>(rng() % 4);
    std::vector<AffectLabel> labels;
    for (int i = 0; i < alphabet; ++i) labels.push_back(kAllAffectLabels[rng() % kAllAffectLabels.size()]);
    std::vector<AffectFrame> frames;
    std::int64_t ts = static_cast<std::int64_t>(rng() % 1000);
    for (int i = 0; i < len; ++i) {
      frames.push_back({ts, labels[rng() % labels.size()]});
      ts += 50 + static_cast<std::int64_t>(rng() % 40);
    }
    const int window = s % 2 == 0 ? kDefaultPoolWindow : 1 + static_cast<int>(rng() % 12);

    const auto lt = Clock::now();
    const auto got = summarize_utterance(frames, window);
    library_s += seconds_since(lt);
    const auto want = oracle::summarize(frames, window);

    bool same = got.top_labels == want.top;
    for (int l = 0; l < 8; ++l) {
      const auto it = got.counts.find(static_cast<AffectLabel>(l));
      same = same && (it == got.counts.end() ? 0 : it->second) == want.counts[l];
    }
    same = same && got.span == TimeSpan{frames.front().timestamp_ms, frames.back().timestamp_ms};
    if (!same) {
      if (mismatches == 0) first = "stream " + std::to_string(s) + " (len " + std::to_string(len) + ", window " +
                                   std::to_string(window) + ")";
      ++mismatches;
    }
  }
  const double total_s = seconds_since(t0);
  std::ostringstream d;
  d << kAffectStreams << " streams, " << mismatches << " mismatches";
  if (!first.empty()) d << " (first: " << first << ")";
  d << ", library " << library_s << " s, total " << total_s << " s";
  return {mismatches == 0 && total_s < kAffectRuntimeLimitS, d.str()};
}

// --- 2. golden fixtures -------------------------------------------------------

const std::string kCloudy = "cloudy.";
const std::string kRaining =
    "it's raining outside and sometimes it is showing to be snowy and I like it personally but it is a little bit uh "
    "not that comfortable but it's all right";
const std::string kCorrect = "that is correct";

Outcome golden_fixtures() {
  const auto config = mock_config();
  const auto backend = make_backend(config.backend);
  struct Fixture {
    std::string user;
    std::string with_affect;
    std::string without_affect;
  };
  const std::vector<Fixture> fixtures = {
      {kCloudy, "I'm glad you find joy in it", "It looks like a cloudy day."},
      {kRaining, "It sounds like a lovely mix!", "Sounds like a mixed weather day"},
      {kCorrect, "I appreciate your honesty and strength", "I understand your pain. Take care"},
  };
  int verbatim = 0;
  std::string bad;
  for (const auto& f : fixtures) {
    GroundingRequest r;
    r.user_utterance = f.user;
    r.facial_labels = {AffectLabel::Happiness};
    const auto with = generate_empathic(r, backend, config.backend).move.utterance;
    r.facial_labels.clear();
    const auto without = generate_empathic(r, backend, config.backend).move.utterance;
    verbatim += with == f.with_affect;
    verbatim += without == f.without_affect;
    if (with != f.with_affect) bad += " [" + with + "]";
    if (without != f.without_affect) bad += " [" + without + "]";
  }

  // The same turns through a recorded session and run_ablation.
  auto now = std::make_shared<std::int64_t>(0);
  auto cfg = config;
  cfg.script = DialogueScript{{{"q1", "How's the weather today?", QuestionKind::Open, Phase::SocialChat},
                               {"q2", "And where you are right now?", QuestionKind::Open, Phase::SocialChat},
                               {"q3", "So your back has been hurting all week?", QuestionKind::Closed,
                                Phase::PainOpen}}};
  auto session = make_session("fixtures", cfg, [now] { return *now; });
  session->start();
  for (const auto& f : fixtures) {
    const auto start = *now + 300;
    for (std::int64_t ts = start; ts <= start + 2000; ts += 66) {
      *now = ts;
      session->on_affect_frame({ts, AffectLabel::Happiness});
    }
    session->on_speech_final(f.user, {start, start + 2000});
    *now += 200;
    session->on_wizard_message(WizardAction::NextQuestion);
  }
  const auto report = run_ablation({{"fixtures", session->log().events()}}, backend);
  bool ablation_ok = report.turns.size() == 3;
  for (const auto& t : report.turns) ablation_ok = ablation_ok && t.differs;

  std::ostringstream d;
  d << verbatim << "/6 utterances verbatim" << bad << "; ablation " << report.differing_turns << "/"
    << report.turns.size() << " turns differ";
  return {verbatim == 6 && ablation_ok, d.str()};
}

// --- 3. output-constraint fuzzing ---------------------------------------------

using K = ValidationErrorKind;

struct Mutant {
  std::string raw;
  std::optional<K> expected;  // nullopt: must be accepted
  bool any_outcome = false;   // random corruption, class not predicted
};

class MutantFactory {
 public:
  explicit MutantFactory(std::uint64_t seed) : rng_(seed) {}

  Mutant next(const GroundingRequest& request) {
    auto doc = base(request);
    switch (rng_() % 22) {
      case 0:
        return {doc.dump() + std::string(1 + rng_() % 3, '}'), K::MalformedDocument};
      case 1: {
        const auto s = doc.dump();
        return {s.substr(0, rng_() % s.size()), K::MalformedDocument};
      }
      case 2:
        return {pick<std::string>({"[]", "42", "\"text\"", "null", "true", "[{\"utterance\":\"hi\"}]"}),
                K::MalformedDocument};
      case 3:
        return {pick<std::string>({"", "   ", "Sure! Here is the JSON you asked for.", "```json\n```"}),
                K::MalformedDocument};
      case 4:
        doc.erase(pick_key());
        return {doc.dump(), K::MissingKey};
      case 5:
        doc["VAD"].erase(pick_vad());
        return {doc.dump(), K::MissingKey};
      case 6:
        doc[pick_string_key()] = pick<std::string>({"", " ", "\t\n"});
        return {doc.dump(), K::MissingKey};
      case 7:
        doc[pick_string_key()] = pick<nlohmann::json>({1, nullptr, true, nlohmann::json::array({"a"}), {{"x", 1}}});
        return {doc.dump(), K::MalformedDocument};
      case 8:
        doc["VAD"] = pick<nlohmann::json>({0.5, "positive", nullptr, nlohmann::json::array({0.1, 0.2, 0.3})});
        return {doc.dump(), K::MalformedDocument};
      case 9:
        doc["VAD"][pick_vad()] = pick<nlohmann::json>({"0.5", nullptr, true, nlohmann::json::array()});
        return {doc.dump(), K::MalformedDocument};
      case 10:
        doc["agent_emotion"] = pick<std::string>({"joyful", "Neutral", "angry", "sadness", "happy ", "empathetic"});
        return {doc.dump(), K::OptionViolation};
      case 11:
        doc["head_movement"] = pick<std::string>({"head_shake", "nod", "Head_Nod", "tilt", "none"});
        return {doc.dump(), K::OptionViolation};
      case 12: {
        const double magnitude = 1.0 + kVadClampSlack + 0.001 + uniform() * 1e3;
        doc["VAD"][pick_vad()] = rng_() % 2 ? magnitude : -magnitude;
        return {doc.dump(), K::RangeViolation};
      }
      case 13:
        doc["utterance"] = doc["utterance"].get<std::string>() + pick<std::string>({"?", " how are you?", " right?"});
        return {doc.dump(), K::RuleViolation};
      case 14: {
        const double v = 1.0 + uniform() * kVadClampSlack;
        doc["VAD"][pick_vad()] = rng_() % 2 ? v : -v;
        return {doc.dump(), std::nullopt};
      }
      case 15:
        doc[pick<std::string>({"confidence", "notes", "vad"})] = "extra";
        return {doc.dump(), std::nullopt};
      case 16:
        doc["user_dominant_emotion"] = pick<std::string>({"joy", "mixed", "calm"});
        return {doc.dump(), std::nullopt};
      case 17:
        return {"```json\n" + doc.dump(2) + "\n```", std::nullopt};
      case 18: {
        auto s = doc.dump();
        for (int i = 0; i < 1 + static_cast<int>(rng_() % 4); ++i) s[rng_() % s.size()] = static_cast<char>(rng_() % 128);
        return {s, std::nullopt, true};
      }
      case 19: {
        std::string s;
        for (int i = 0; i < static_cast<int>(rng_() % 200); ++i) s.push_back(static_cast<char>(rng_() % 256));
        return {s, std::nullopt, true};
      }
      case 20:
        doc["VAD"][pick_vad()] = pick<nlohmann::json>({1e308, -1e308, 2, -7});
        return {doc.dump(), K::RangeViolation};
      default:
        return {doc.dump(), std::nullopt};
    }
  }

 private:
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }

  template <typename T>
  T pick(std::vector<T> options) {
    return options[rng_() % options.size()];
  }
  std::string pick_key() {
    return pick<std::string>({"user_dominant_emotion", "VAD", "agent_emotion", "head_movement", "utterance",
                              "explanation"});
  }
  std::string pick_string_key() {
    return pick<std::string>({"user_dominant_emotion", "agent_emotion", "head_movement", "utterance", "explanation"});
  }
  std::string pick_vad() { return pick<std::string>({"valence", "arousal", "dominance"}); }

  nlohmann::json base(const GroundingRequest& r) {
    auto vad = [&] { return std::round((uniform() * 2.0 - 1.0) * 100.0) / 100.0; };
    return {{"user_dominant_emotion", pick<std::string>({"sadness", "happiness", "neutral", "fear"})},
            {"VAD", {{"valence", vad()}, {"arousal", vad()}, {"dominance", vad()}}},
            {"agent_emotion", r.emotion_options[rng_() % r.emotion_options.size()]},
            {"head_movement", r.movement_options[rng_() % r.movement_options.size()]},
            {"utterance", pick<std::string>({"That sounds hard", "I'm glad to hear it.", "Thank you for telling me"})},
            {"explanation", "pattern test"}};
  }

  std::mt19937_64 rng_;
};

// Serves a fixed sequence of completions.
class SequenceBackend : public TextBackend {
 public:
  explicit SequenceBackend(std::vector<std::string> outputs) : outputs_(std::move(outputs)) {}
  std::string complete(const PromptDocument&, std::chrono::milliseconds) override {
    return outputs_.at(next_++ % outputs_.size());
  }
  std::string name() const override { return "sequence"; }
  bool deterministic() const override { return true; }
  std::size_t served() const { return next_; }

 private:
  std::vector<std::string> outputs_;
  std::atomic<std::size_t> next_{0};
};

// Sleeps before answering with a valid move.
class SlowBackend : public TextBackend {
 public:
  SlowBackend(std::vector<int> delays_ms, std::string reply) : delays_(std::move(delays_ms)), reply_(std::move(reply)) {}
  std::string complete(const PromptDocument&, std::chrono::milliseconds) override {
    const auto i = calls_++;
    std::this_thread::sleep_for(std::chrono::milliseconds(delays_[std::min(i, delays_.size() - 1)]));
    return reply_;
  }
  std::string name() const override { return "slow"; }
  bool deterministic() const override { return false; }

 private:
  std::vector<int> delays_;
  std::string reply_;
  std::atomic<std::size_t> calls_{0};
};

Outcome output_fuzzing() {
  GroundingRequest request;
  request.agent_utterance = "How's the weather today?";
  request.user_utterance = "cloudy.";
  request.facial_labels = {AffectLabel::Sadness};

  MutantFactory factory(77);
  std::vector<Mutant> mutants;
  for (int i = 0; i < kFuzzOutputs; ++i) mutants.push_back(factory.next(request));

  int escapes = 0;
  int misclassified = 0;
  int accepted = 0;
  std::map<std::string, int> by_class;
  std::string first_problem;
  for (std::size_t i = 0; i < mutants.size(); ++i) {
    const auto& m = mutants[i];
    const auto result = validate_move(m.raw, request);
    if (const auto* ok = std::get_if<ValidatedMove>(&result)) {
      ++accepted;
      if (!oracle::move_is_valid(ok->move, request)) {
        ++escapes;
        if (first_problem.empty()) first_problem = "escape at mutant " + std::to_string(i);
      }
      if (!m.any_outcome && m.expected) {
        ++misclassified;
        if (first_problem.empty()) first_problem = "mutant " + std::to_string(i) + " accepted: " + m.raw;
      }
    } else {
      const auto& err = std::get<ValidationError>(result);
      ++by_class[std::string(to_string(err.kind))];
      if (!m.any_outcome && m.expected != err.kind) {
        ++misclassified;
        if (first_problem.empty()) {
          first_problem = "mutant " + std::to_string(i) + " got " + std::string(to_string(err.kind)) + ": " + m.raw;
        }
      }
    }
  }

  // The generator over the same outputs: every call ends in a valid move,
  // falling back when its attempts are used up.
  BackendProfile profile;
  profile.timeout_ms = 1000;
  profile.max_retries = 2;
  std::vector<std::string> raws;
  for (const auto& m : mutants) raws.push_back(m.raw);
  auto sequence = std::make_shared<SequenceBackend>(raws);
  int calls = 0;
  int fallbacks = 0;
  int late = 0;
  int gen_escapes = 0;
  const double budget_ms = profile.timeout_ms * (profile.max_retries + 1);
  while (sequence->served() < raws.size()) {
    const auto t0 = Clock::now();
    const auto r = generate_empathic(request, sequence, profile);
    const double took = ms_since(t0);
    ++calls;
    fallbacks += r.move.source == MoveSource::Fallback;
    late += took > budget_ms + kDeadlineSlackMs;
    gen_escapes += !oracle::move_is_valid(r.move, request);
  }

  // Backends that answer late or never within the per-call timeout.
  BackendProfile tight;
  tight.timeout_ms = 40;
  tight.max_retries = 2;
  const double tight_budget = tight.timeout_ms * (tight.max_retries + 1);
  const auto valid_reply =
      R"({"user_dominant_emotion":"sadness","VAD":{"valence":-0.3,"arousal":0.1,"dominance":0.0},)"
      R"("agent_emotion":"concerned","head_movement":"head_nod","utterance":"That sounds hard","explanation":"x"})";
  int slow_runs = 0;
  int slow_late = 0;
  int slow_wrong = 0;
  double slow_max = 0.0;
  for (int i = 0; i < 10; ++i) {
    auto never = std::make_shared<SlowBackend>(std::vector<int>{150}, valid_reply);
    auto t0 = Clock::now();
    auto r = generate_empathic(request, never, tight);
    double took = ms_since(t0);
    slow_max = std::max(slow_max, took);
    slow_late += took > tight_budget + kDeadlineSlackMs;
    slow_wrong += r.move.source != MoveSource::Fallback || !oracle::move_is_valid(r.move, request);

    auto recovers = std::make_shared<SlowBackend>(std::vector<int>{150, 1}, valid_reply);
    t0 = Clock::now();
    r = generate_empathic(request, recovers, tight);
    took = ms_since(t0);
    slow_max = std::max(slow_max, took);
    slow_late += took > tight_budget + kDeadlineSlackMs;
    slow_wrong += r.move.source != MoveSource::Llm || r.move.utterance != "That sounds hard";
    slow_runs += 2;
  }
  std::this_thread::sleep_for(std::chrono::milliseconds(200));  // let abandoned calls finish

  std::ostringstream d;
  d << kFuzzOutputs << " outputs, " << accepted << " accepted, " << escapes << " escapes, " << misclassified
    << " misclassified (";
  bool sep = false;
  for (const auto& [k, n] : by_class) {
    d << (sep ? ", " : "") << k << " " << n;
    sep = true;
  }
  d << "); generator " << calls << " calls, " << fallbacks << " fallbacks, " << gen_escapes << " escapes, " << late
    << " over budget; slow backends " << slow_runs << " runs, max " << slow_max << " ms vs " << tight_budget
    << " ms budget, " << slow_late << " late, " << slow_wrong << " wrong";
  if (!first_problem.empty()) d << "; " << first_problem;
  return {escapes == 0 && misclassified == 0 && gen_escapes == 0 && late == 0 && slow_late == 0 && slow_wrong == 0,
          d.str()};
}

// --- 4. state-machine soundness -----------------------------------------------

enum class Ev { Speech, Grounding, Next, Repeat, Apology, Irrelevant, Listen };
constexpr Ev kEvents[] = {Ev::Speech, Ev::Grounding, Ev::Next, Ev::Repeat, Ev::Apology, Ev::Irrelevant, Ev::Listen};

WizardAction to_action(Ev e) {
  switch (e) {
    case Ev::Next: return WizardAction::NextQuestion;
    case Ev::Repeat: return WizardAction::UserRepeatResponse;
    case Ev::Apology: return WizardAction::InterruptApology;
    case Ev::Irrelevant: return WizardAction::Irrelevant;
    default: return WizardAction::ListenOnly;
  }
}

struct EnumStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t corrupted = 0;
  std::size_t pattern_failures = 0;
  std::size_t wrong_exception = 0;
  std::size_t allowed_mismatch = 0;
  std::string first_problem;
};

void explore(const SessionState& state, int depth, bool prune, EnumStats& stats, std::vector<Ev>& trace) {
  if (depth == 0) return;
  GroundingMove move;
  move.user_dominant_emotion = "neutral";
  move.agent_emotion = "neutral";
  move.head_movement = "head_nod";
  move.utterance = "I see.";
  move.explanation = "enumeration";
  move.source = MoveSource::Backchannel;
  const auto allowed = allowed_actions(state);

  for (const auto ev : kEvents) {
    const auto before = to_json(state).dump();
    std::optional<Transition> t;
    bool rejected = false;
    try {
      switch (ev) {
        case Ev::Speech: t = on_user_response(state, "fine", {}); break;
        case Ev::Grounding: t = on_grounding_complete(state, move); break;
        default: t = on_wizard(state, to_action(ev)); break;
      }
    } catch (const ProtocolViolation&) {
      rejected = true;
    } catch (const std::exception& e) {
      ++stats.wrong_exception;
      if (stats.first_problem.empty()) stats.first_problem = std::string("unexpected exception: ") + e.what();
      continue;
    }
    trace.push_back(ev);
    if (ev != Ev::Speech && ev != Ev::Grounding) {
      const bool listed = std::find(allowed.begin(), allowed.end(), to_action(ev)) != allowed.end();
      if (listed == rejected) ++stats.allowed_mismatch;
    }
    if (rejected) {
      ++stats.rejected;
      if (to_json(state).dump() != before) {
        ++stats.corrupted;
        if (stats.first_problem.empty()) stats.first_problem = "state changed by a rejected event";
      }
      if (!prune) explore(state, depth - 1, prune, stats, trace);
    } else {
      ++stats.accepted;
      const auto problem = oracle::segment_pattern_problem(nlohmann::json::parse(to_json(t->state).dump()));
      if (!problem.empty()) {
        ++stats.pattern_failures;
        if (stats.first_problem.empty()) {
          std::string path;
          for (auto e : trace) path += std::to_string(static_cast<int>(e));
          stats.first_problem = problem + " after trace " + path;
        }
      }
      explore(t->state, depth - 1, prune, stats, trace);
    }
    trace.pop_back();
  }
}

Outcome state_machine_soundness() {
  const DialogueScript script{{{"g", "Hello, how are you?", QuestionKind::Open, Phase::Greeting},
                               {"p", "Where does it hurt?", QuestionKind::Open, Phase::PainOpen},
                               {"f", "Goodbye!", QuestionKind::Closed, Phase::Farewell}}};
  std::ostringstream d;
  bool pass = true;
  for (const auto condition : {Condition::Empathic, Condition::Backchannel}) {
    for (const bool prune : {true, false}) {
      EnumStats stats;
      std::vector<Ev> trace;
      explore(start(script, condition).state, prune ? kEnumDepth : kUnprunedDepth, prune, stats, trace);
      const bool ok = stats.corrupted == 0 && stats.pattern_failures == 0 && stats.wrong_exception == 0 &&
                      stats.allowed_mismatch == 0 && stats.accepted > 0 && stats.rejected > 0;
      pass = pass && ok;
      d << to_string(condition) << (prune ? " depth " : " unpruned depth ") << (prune ? kEnumDepth : kUnprunedDepth)
        << ": " << stats.accepted << " accepted, " << stats.rejected << " rejected, " << stats.corrupted
        << " corrupted, " << stats.pattern_failures << " pattern failures, " << stats.allowed_mismatch
        << " allowed-action mismatches";
      if (!stats.first_problem.empty()) d << " (" << stats.first_problem << ")";
      d << "; ";
    }
  }
  auto text = d.str();
  text.resize(text.size() - 2);
  return {pass, text};
}

// --- 5. replay determinism ----------------------------------------------------

std::string moves_of(const std::vector<SessionEvent>& events) {
  std::string out;
  for (const auto& e : events) {
    if (e.kind == EventKind::GroundingMove) out += e.payload.dump() + "\n";
  }
  return out;
}

bool is_prefix_of(const std::vector<SessionEvent>& a, const std::vector<SessionEvent>& b) {
  if (a.size() > b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].kind != b[i].kind || a[i].seq != b[i].seq || a[i].ts_ms != b[i].ts_ms ||
        a[i].payload.dump() != b[i].payload.dump()) {
      return false;
    }
  }
  return true;
}

Outcome replay_determinism() {
  auto config = mock_config();
  config.seed = 1234;
  SyntheticOptions options;
  options.questions = kReplayQuestions;
  options.seed = 1234;
  const auto session = run_synthetic_session(config, options);
  const auto& original = session->log().events();

  const auto replayed = replay(original);
  const auto want = moves_of(original);
  const bool moves_equal = !want.empty() && moves_of(replayed) == want;
  std::size_t move_count = 0;
  for (const auto& e : original) move_count += e.kind == EventKind::GroundingMove;

  std::size_t bad_prefixes = 0;
  std::string first_bad;
  for (std::size_t k = 1; k <= original.size(); ++k) {
    const std::vector<SessionEvent> prefix(original.begin(), original.begin() + static_cast<std::ptrdiff_t>(k));
    try {
      const auto out = replay(prefix);
      if (!is_prefix_of(out, original)) {
        ++bad_prefixes;
        if (first_bad.empty()) first_bad = "prefix " + std::to_string(k) + " diverges";
      }
    } catch (const std::exception& e) {
      ++bad_prefixes;
      if (first_bad.empty()) first_bad = "prefix " + std::to_string(k) + ": " + e.what();
    }
  }

  std::ostringstream d;
  d << move_count << " grounding moves " << (moves_equal ? "byte-identical" : "DIFFER") << " over "
    << original.size() << " events; " << original.size() << " truncated prefixes, " << bad_prefixes << " invalid";
  if (!first_bad.empty()) d << " (" << first_bad << ")";
  return {moves_equal && move_count == static_cast<std::size_t>(kReplayQuestions) && bad_prefixes == 0, d.str()};
}

// --- 6. backchannel policy ----------------------------------------------------

Outcome backchannel_policy() {
  const auto config = mock_config();
  BackchannelRng rng(config.seed);
  std::map<std::string, int> movements;
  int neutral = 0;
  int foreign = 0;
  for (int i = 0; i < kBackchannelDraws; ++i) {
    const auto m = generate_backchannel(rng, config.backchannel);
    neutral += m.agent_emotion == "neutral";
    ++movements[m.head_movement];
    const auto& set = config.backchannel.utterances;
    foreign += std::find(set.begin(), set.end(), m.utterance) == set.end();
  }
  std::ostringstream d;
  d << kBackchannelDraws << " draws, neutral " << neutral << ", foreign utterances " << foreign << ", movements";
  bool in_band = movements.size() == config.backchannel.movements.size();
  for (const auto& mv : config.backchannel.movements) {
    const double f = static_cast<double>(movements[mv]) / kBackchannelDraws;
    d << " " << mv << "=" << f;
    in_band = in_band && f >= kMovementLow && f <= kMovementHigh;
  }
  return {neutral == kBackchannelDraws && foreign == 0 && in_band, d.str()};
}

// --- 7. turn latency ----------------------------------------------------------

Outcome turn_latency() {
  auto config = mock_config();
  SyntheticOptions options;
  options.questions = kReplayQuestions;
  const auto session = run_synthetic_session(config, options);
  const auto report = latency_report(*session, kLatencyBudgetMs);
  std::ostringstream d;
  d << report.turns.size() << " turns, pipeline max " << report.max_pipeline_ms() << " ms, mean "
    << report.mean_pipeline_ms() << " ms, budget " << kLatencyBudgetMs << " ms";
  return {!report.turns.empty() && report.within_budget(), d.str()};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::off);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"affect-summary oracle equivalence", affect_oracle_equivalence},
      {"golden grounding fixtures and ablation", golden_fixtures},
      {"output-constraint fuzzing", output_fuzzing},
      {"state-machine soundness", state_machine_soundness},
      {"replay determinism", replay_determinism},
      {"backchannel policy", backchannel_policy},
      {"turn latency excluding backend", turn_latency},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
