#include <atomic>
#include <future>
#include <thread>

#include "doctest.h"
#include "vpsim/pipeline.hpp"

using namespace vpsim;
using namespace vpsim::pipeline;

namespace {

scenario::SystemPrompt test_prompt() {
  return scenario::build_system_prompt({"influenza", {"fever", "cough", "muscle aches"}, 1},
                                       scenario::generate_persona(1));
}

AudioClip speech(std::size_t samples = 1600) {
  AudioClip clip;
  clip.bytes.assign(samples * 2, 0);
  return clip;
}

struct Recorder {
  std::mutex mu;
  std::vector<TurnState> states;
  std::vector<std::string> order;

  TurnObserver observer() {
    TurnObserver o;
    o.on_state = [this](TurnState s) {
      std::lock_guard lock(mu);
      states.push_back(s);
      order.push_back(std::string(to_string(s)));
    };
    o.on_turn_logged = [this](const Turn& t) {
      std::lock_guard lock(mu);
      order.push_back(t.ok() ? "logged" : "logged_failed");
    };
    o.on_sentiment = [this](std::uint64_t, const sentiment::ClassificationResult&, double) {
      std::lock_guard lock(mu);
      order.push_back("sentiment");
    };
    return o;
  }
};

// Blocks inside complete() until released.
class GateModel final : public ChatModel {
 public:
  std::promise<void> entered;
  std::shared_future<void> release;
  explicit GateModel(std::shared_future<void> r) : release(std::move(r)) {}
  std::string complete(std::span<const ChatMessage>, const GenerationParams&, double) override {
    entered.set_value();
    release.wait();
    return "it hurts";
  }
};

class FailingModel final : public ChatModel {
 public:
  std::string complete(std::span<const ChatMessage>, const GenerationParams&, double) override {
    throw AdapterProtocolError("HTTP 500");
  }
};

bool legal_path(const std::vector<TurnState>& states) {
  TurnState prev = TurnState::idle;
  for (auto s : states) {
    if (!is_legal(prev, s)) return false;
    prev = s;
  }
  return prev == TurnState::idle;
}

}  // namespace

TEST_CASE("transition table") {
  CHECK(transition(TurnState::idle, TurnEvent::input_started) == TurnState::listening);
  CHECK(transition(TurnState::listening, TurnEvent::input_captured) == TurnState::thinking);
  CHECK(transition(TurnState::thinking, TurnEvent::reply_ready) == TurnState::speaking);
  CHECK(transition(TurnState::speaking, TurnEvent::playback_done) == TurnState::idle);
  for (auto s : {TurnState::idle, TurnState::listening, TurnState::thinking, TurnState::speaking}) {
    CHECK(transition(s, TurnEvent::error) == TurnState::idle);
  }
  try {
    transition(TurnState::listening, TurnEvent::playback_done);
    FAIL("expected an illegal transition");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("playback_done") != std::string::npos);
    CHECK(msg.find("Listening") != std::string::npos);
  }
  // Total: every pair either transitions or throws.
  int legal = 0;
  for (auto s : {TurnState::idle, TurnState::listening, TurnState::thinking, TurnState::speaking}) {
    for (auto e : {TurnEvent::input_started, TurnEvent::input_captured, TurnEvent::reply_ready,
                   TurnEvent::playback_done, TurnEvent::error}) {
      try {
        transition(s, e);
        ++legal;
      } catch (const Error&) {
      }
    }
  }
  CHECK(legal == 8);
}

TEST_CASE("text turn with a scripted patient") {
  FakeClock clock;
  auto adapters = make_mock_adapters(clock);
  adapters.patient_model = std::make_shared<MockPatientModel>(clock, 0.0, std::vector<std::string>{"my chest hurts"});
  Recorder rec;
  DialogueSession session(test_prompt(), scenario::ConversationMemory(), rec.observer());
  auto turn = session.run_turn(std::string("What brings you in?"), adapters, clock);
  CHECK(turn.ok());
  CHECK(turn.turn_id == 1);
  CHECK(turn.patient_text == "my chest hurts");
  CHECK(turn.timings.stt_s == 0);
  CHECK(turn.audio_ref.has_value());
  CHECK(session.reply_audio(1).has_value());
  CHECK(session.state() == TurnState::idle);
  CHECK(rec.states ==
        std::vector<TurnState>{TurnState::listening, TurnState::thinking, TurnState::speaking, TurnState::idle});
  CHECK(session.memory().size() == 2);
}

TEST_CASE("fake clock stage delays are measured exactly") {
  FakeClock clock;
  auto adapters = make_mock_adapters(clock, {0.14, 0.56, 0.24});
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  auto turn = session.run_turn(speech(), adapters, clock);
  REQUIRE(turn.ok());
  CHECK(std::abs(turn.timings.stt_s - 0.14) <= 1e-3);
  CHECK(std::abs(turn.timings.llm_s - 0.56) <= 1e-3);
  CHECK(std::abs(turn.timings.tts_s - 0.24) <= 1e-3);
  CHECK(turn.timings.total_s >= 0.94 - 1e-9);
  CHECK(turn.timings.total_s >= turn.timings.stt_s + turn.timings.llm_s + turn.timings.tts_s - 1e-9);
}

TEST_CASE("patient model timeout fails the turn and returns to Idle") {
  FakeClock clock;
  auto adapters = make_mock_adapters(clock, {0, 30.0, 0});
  Recorder rec;
  DialogueSession session(test_prompt(), scenario::ConversationMemory(), rec.observer());
  auto turn = session.run_turn(std::string("Hello"), adapters, clock);
  CHECK_FALSE(turn.ok());
  REQUIRE(turn.failure.has_value());
  CHECK(turn.failure->stage == Stage::generation);
  CHECK(turn.failure->kind == "timeout");
  CHECK(turn.patient_text.empty());
  CHECK(session.state() == TurnState::idle);
  CHECK(rec.states.back() == TurnState::idle);
  CHECK(legal_path(rec.states));
  // Failed turns stay out of memory but are logged.
  CHECK(session.memory().empty());
  CHECK(session.turns().size() == 1);
  CHECK(rec.order == std::vector<std::string>{"Listening", "Thinking", "logged_failed", "Idle"});
}

TEST_CASE("a call that returns late still counts as a timeout") {
  FakeClock clock;
  class Slow final : public ChatModel {
   public:
    explicit Slow(Clock& c) : clock(c) {}
    Clock& clock;
    std::string complete(std::span<const ChatMessage>, const GenerationParams&, double) override {
      clock.sleep_for_s(25);
      return "finally";
    }
  };
  auto adapters = make_mock_adapters(clock);
  adapters.patient_model = std::make_shared<Slow>(clock);
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  auto turn = session.run_turn(std::string("Hello"), adapters, clock);
  REQUIRE_FALSE(turn.ok());
  CHECK(turn.failure->kind == "timeout");
}

TEST_CASE("protocol errors and bad audio") {
  FakeClock clock;
  auto adapters = make_mock_adapters(clock);
  adapters.patient_model = std::make_shared<FailingModel>();
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  auto turn = session.run_turn(std::string("Hello"), adapters, clock);
  REQUIRE_FALSE(turn.ok());
  CHECK(turn.failure->kind == "protocol");
  CHECK(turn.failure->message.find("HTTP 500") != std::string::npos);

  AudioClip wav = speech();
  wav.codec = "audio/wav";
  CHECK_THROWS_AS(session.run_turn(wav, make_mock_adapters(clock), clock), Error);
  CHECK_THROWS_AS(session.run_turn(std::string(" "), make_mock_adapters(clock), clock), Error);
  CHECK(session.state() == TurnState::idle);
}

TEST_CASE("turn ids increase and a concurrent turn is rejected") {
  SteadyClock clock;
  std::promise<void> go;
  auto gate = std::make_shared<GateModel>(go.get_future().share());
  auto adapters = make_mock_adapters(clock);
  adapters.patient_model = gate;
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  auto first = std::async(std::launch::async, [&] { return session.run_turn(std::string("one"), adapters, clock); });
  gate->entered.get_future().wait();
  CHECK(session.busy());
  CHECK_THROWS_AS(session.run_turn(std::string("two"), make_mock_adapters(clock), clock), TurnInFlight);
  go.set_value();
  auto t1 = first.get();
  CHECK(t1.ok());
  CHECK(t1.patient_text == "it hurts");
  auto t2 = session.run_turn(std::string("three"), make_mock_adapters(clock), clock);
  CHECK(t2.turn_id == t1.turn_id + 1);
}

TEST_CASE("sentiment is attached after the turn is logged") {
  FakeClock clock;
  Recorder rec;
  auto classifier = std::make_shared<sentiment::RuleBasedClassifier>();
  DialogueSession session(test_prompt(), scenario::ConversationMemory(), rec.observer());
  auto turn = session.run_turn(std::string("I'm glad you came in"), make_mock_adapters(clock), clock, classifier);
  session.wait_for_sentiment();
  CHECK_FALSE(turn.doctor_sentiment.has_value());
  auto logged = session.turns().at(0);
  CHECK(logged.doctor_sentiment == sentiment::SentimentLabel::positive);
  std::lock_guard lock(rec.mu);
  CHECK(rec.order == std::vector<std::string>{"Listening", "Thinking", "Speaking", "logged", "Idle", "sentiment"});
}

TEST_CASE("blocking sentiment is part of the reply and its latency") {
  FakeClock clock;
  auto inner = std::make_shared<sentiment::RuleBasedClassifier>();
  auto slow = std::make_shared<DelayedClassifier>(inner, clock, 0.3);
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  auto turn = session.run_turn(std::string("Hurry up"), make_mock_adapters(clock, {0, 0.5, 0.2}), clock, slow,
                               PipelineOptions{true});
  CHECK(turn.doctor_sentiment == sentiment::SentimentLabel::negative);
  CHECK(std::abs(turn.timings.sentiment_s - 0.3) < 1e-6);
  CHECK(std::abs(turn.timings.total_s - 1.0) < 1e-6);
}

TEST_CASE("a slow sentiment classifier does not delay the reply") {
  SteadyClock clock;
  auto inner = std::make_shared<sentiment::RuleBasedClassifier>();
  auto slow = std::make_shared<DelayedClassifier>(inner, clock, 0.5);
  DialogueSession session(test_prompt(), scenario::ConversationMemory());
  const double t0 = clock.now_s();
  auto turn = session.run_turn(std::string("Thank you"), make_mock_adapters(clock), clock, slow);
  const double reply = clock.now_s() - t0;
  CHECK(reply < 0.1);
  session.wait_for_sentiment();
  auto logged = session.turns().at(0);
  CHECK(logged.doctor_sentiment == sentiment::SentimentLabel::positive);
  CHECK(logged.timings.sentiment_s >= 0.5);
  CHECK(logged.timings.total_s < 0.1);
}

TEST_CASE("memory feeds the patient model and mock replies are replayable") {
  auto run = [] {
    FakeClock clock;
    DialogueSession session(test_prompt(), scenario::ConversationMemory());
    for (const char* line : {"Hello", "How long?", "Any fever?", "Anything else?"}) {
      session.run_turn(std::string(line), make_mock_adapters(clock), clock);
    }
    return session.turns();
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].patient_text == b[i].patient_text);
  CHECK(transcript_hash(a) == transcript_hash(b));
  CHECK(transcript_hash(a).size() == 64);
  const auto syms = std::vector<std::string>{"fever", "cough", "muscle aches"};
  for (const auto& t : a) {
    bool mentions = false;
    for (const auto& s : syms) mentions = mentions || t.patient_text.find(s) != std::string::npos;
    CHECK(mentions);
  }
}

TEST_CASE("prior turns continue numbering") {
  Turn t;
  t.turn_id = 7;
  t.doctor_text = "x";
  t.patient_text = "y";
  FakeClock clock;
  DialogueSession session(test_prompt(), scenario::ConversationMemory(), {}, {t});
  auto next = session.run_turn(std::string("Hello"), make_mock_adapters(clock), clock);
  CHECK(next.turn_id == 8);
}

TEST_CASE("latency report") {
  auto make = [](double stt, double llm, double tts, double total, TurnStatus status = TurnStatus::ok) {
    Turn t;
    t.timings = {stt, llm, tts, 0, total};
    t.status = status;
    return t;
  };
  SUBCASE("single turn within budget") {
    std::vector<Turn> turns{make(0.14, 0.56, 0.24, 1.24)};
    auto r = latency_report(turns, 1.5);
    CHECK(r.budget_met);
    CHECK(r.total.mean == doctest::Approx(1.24));
  }
  SUBCASE("identical turns") {
    std::vector<Turn> turns(3, make(0.1, 0.5, 0.2, 0.8));
    auto r = latency_report(turns);
    CHECK(r.stt.mean == doctest::Approx(0.1));
    CHECK(r.llm.mean == doctest::Approx(0.5));
    CHECK(r.tts.median == doctest::Approx(0.2));
    CHECK(r.total.p95 == doctest::Approx(0.8));
  }
  SUBCASE("over budget") {
    std::vector<Turn> turns{make(0, 0, 0, 1.0), make(0, 0, 0, 2.0), make(0, 0, 0, 3.0),
                            make(0, 0, 0, 9.0, TurnStatus::failed)};
    auto r = latency_report(turns, 1.5);
    CHECK(r.total.mean == doctest::Approx(2.0));
    CHECK(r.total.median == doctest::Approx(2.0));
    CHECK(r.total.p95 == doctest::Approx(2.9));
    CHECK_FALSE(r.budget_met);
    CHECK(r.turn_count == 3);
  }
  SUBCASE("no ok turns") {
    std::vector<Turn> turns{make(0, 0, 0, 1.0, TurnStatus::failed)};
    CHECK_THROWS_AS(latency_report(turns), Error);
  }
}

TEST_CASE("audio validation") {
  CHECK_NOTHROW(validate_audio(speech()));
  AudioClip odd = speech();
  odd.bytes.push_back(0);
  CHECK_THROWS_AS(validate_audio(odd), Error);
  AudioClip empty;
  CHECK_THROWS_AS(validate_audio(empty), Error);
}

TEST_CASE("symptoms can be read back out of a rendered prompt") {
  auto syms = symptoms_in_prompt(test_prompt().rendered);
  CHECK(syms == std::vector<std::string>{"fever", "cough", "muscle aches"});
}
