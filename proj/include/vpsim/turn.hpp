#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "vpsim/sentiment.hpp"

namespace vpsim::pipeline {

enum class TurnState { idle, listening, thinking, speaking };

enum class TurnEvent {
  input_started,   // Idle -> Listening
  input_captured,  // Listening -> Thinking
  reply_ready,     // Thinking -> Speaking
  playback_done,   // Speaking -> Idle
  error,           // any -> Idle
};

std::string_view to_string(TurnState s);
std::string_view to_string(TurnEvent e);
TurnState parse_turn_state(std::string_view s);

// Total over (state, event): the legal pairs return the next state, every
// other pair throws Error(invalid_argument) naming both.
TurnState transition(TurnState state, TurnEvent event);
bool is_legal(TurnState from, TurnState to);

struct StageTimings {
  double stt_s = 0;
  double llm_s = 0;
  double tts_s = 0;
  double sentiment_s = 0;
  double total_s = 0;

  bool operator==(const StageTimings&) const = default;
};

enum class Stage { transcription, generation, synthesis, sentiment };
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);

enum class TurnStatus { ok, failed };
std::string_view to_string(TurnStatus s);

struct FailureCause {
  Stage stage = Stage::generation;
  std::string kind;  // "timeout" | "protocol" | "invalid_input"
  std::string message;

  bool operator==(const FailureCause&) const = default;
};

struct Turn {
  std::uint64_t turn_id = 0;
  std::string doctor_text;
  std::string patient_text;  // empty when failed
  std::optional<std::string> audio_ref;
  StageTimings timings;
  std::optional<sentiment::SentimentLabel> doctor_sentiment;
  bool sentiment_unparsed = false;
  std::optional<std::string> sentiment_error;
  TurnStatus status = TurnStatus::ok;
  std::optional<FailureCause> failure;

  bool ok() const { return status == TurnStatus::ok; }
  bool operator==(const Turn&) const = default;
};

}  // namespace vpsim::pipeline
