#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "vpsim/adapters.hpp"
#include "vpsim/clock.hpp"
#include "vpsim/memory.hpp"
#include "vpsim/prompt.hpp"
#include "vpsim/sentiment.hpp"
#include "vpsim/turn.hpp"

namespace vpsim::pipeline {

using TurnInput = std::variant<std::string, AudioClip>;

// Callbacks a session fires while a turn runs. All calls for one session are
// made in causal order; on_sentiment may come from a worker thread.
struct TurnObserver {
  std::function<void(TurnState)> on_state;
  // Called with the finished turn before run_turn returns, so a consumer can
  // make it durable before the reply is acknowledged.
  std::function<void(const Turn&)> on_turn_logged;
  std::function<void(std::uint64_t turn_id, const sentiment::ClassificationResult&, double seconds)>
      on_sentiment;
};

struct PipelineOptions {
  // When false, sentiment runs off the reply's critical path.
  bool sentiment_blocking = false;
};

class TurnInFlight : public Error {
 public:
  TurnInFlight() : Error(ErrorCode::conflict, "a turn is already in flight for this session") {}
};

// One conversation: prompt, memory, state machine, and the turn log. At most
// one turn runs at a time; distinct sessions are independent.
class DialogueSession {
 public:
  DialogueSession(scenario::SystemPrompt prompt, scenario::ConversationMemory memory,
                  TurnObserver observer = {}, std::vector<Turn> prior_turns = {});
  ~DialogueSession();

  DialogueSession(const DialogueSession&) = delete;
  DialogueSession& operator=(const DialogueSession&) = delete;

  // The clock must outlive the session; sentiment tasks still use it after
  // run_turn returns.
  //
  // Runs transcription (audio only), generation and synthesis in order.
  // Adapter failures produce a failed turn rather than an exception; a
  // concurrent call throws TurnInFlight; empty input throws
  // Error(invalid_argument).
  Turn run_turn(const TurnInput& input, const AdapterSet& adapters, Clock& clock,
                std::shared_ptr<sentiment::Classifier> classifier = nullptr,
                PipelineOptions options = {});

  std::vector<Turn> turns() const;
  TurnState state() const;
  scenario::ConversationMemory memory() const;
  const scenario::SystemPrompt& prompt() const noexcept { return prompt_; }
  bool busy() const;
  // Synthesized reply audio for recent turns only.
  std::optional<AudioClip> reply_audio(std::uint64_t turn_id) const;

  // Blocks until every dispatched sentiment task has attached its result.
  void wait_for_sentiment();

 private:
  void set_state(TurnEvent event);
  void fail(Turn& turn, Stage stage, const std::string& kind, const std::string& message);
  void attach_sentiment(std::uint64_t turn_id, const sentiment::ClassificationResult& result,
                        double seconds);

  scenario::SystemPrompt prompt_;
  TurnObserver observer_;

  mutable std::mutex mu_;
  scenario::ConversationMemory memory_;
  std::vector<Turn> turns_;
  TurnState state_ = TurnState::idle;
  std::uint64_t next_turn_id_ = 1;
  bool in_flight_ = false;
  static constexpr std::size_t kRetainedAudio = 8;
  std::map<std::uint64_t, AudioClip> reply_audio_;

  std::mutex pending_mu_;
  std::vector<std::future<void>> pending_;
};

struct StageSummary {
  double mean = 0;
  double median = 0;
  double p95 = 0;
};

struct LatencyReport {
  StageSummary stt;
  StageSummary llm;
  StageSummary tts;
  StageSummary sentiment;
  StageSummary total;
  double budget_s = 0;
  bool budget_met = false;
  std::size_t turn_count = 0;
};

inline constexpr double kDefaultLatencyBudgetS = 1.5;

// Over ok turns only. p95 interpolates linearly between order statistics.
// Throws Error(invalid_argument) when there are no ok turns.
LatencyReport latency_report(std::span<const Turn> turns, double budget_s = kDefaultLatencyBudgetS);

// SHA-256 over "id\tdoctor\tpatient\n" for each turn, hex encoded.
std::string transcript_hash(std::span<const Turn> turns);

}  // namespace vpsim::pipeline
