#include "vpsim/turn.hpp"

#include "vpsim/error.hpp"

namespace vpsim::pipeline {

std::string_view to_string(TurnState s) {
  switch (s) {
    case TurnState::idle: return "Idle";
    case TurnState::listening: return "Listening";
    case TurnState::thinking: return "Thinking";
    case TurnState::speaking: return "Speaking";
  }
  return "Idle";
}

std::string_view to_string(TurnEvent e) {
  switch (e) {
    case TurnEvent::input_started: return "input_started";
    case TurnEvent::input_captured: return "input_captured";
    case TurnEvent::reply_ready: return "reply_ready";
    case TurnEvent::playback_done: return "playback_done";
    case TurnEvent::error: return "error";
  }
  return "error";
}

TurnState parse_turn_state(std::string_view s) {
  for (auto st : {TurnState::idle, TurnState::listening, TurnState::thinking, TurnState::speaking}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::parse_error, "unknown turn state '" + std::string(s) + "'");
}

TurnState transition(TurnState state, TurnEvent event) {
  if (event == TurnEvent::error) return TurnState::idle;
  switch (state) {
    case TurnState::idle:
      if (event == TurnEvent::input_started) return TurnState::listening;
      break;
    case TurnState::listening:
      if (event == TurnEvent::input_captured) return TurnState::thinking;
      break;
    case TurnState::thinking:
      if (event == TurnEvent::reply_ready) return TurnState::speaking;
      break;
    case TurnState::speaking:
      if (event == TurnEvent::playback_done) return TurnState::idle;
      break;
  }
  throw Error(ErrorCode::invalid_argument, "illegal transition: " + std::string(to_string(event)) +
                                               " in state " + std::string(to_string(state)));
}

bool is_legal(TurnState from, TurnState to) {
  if (to == TurnState::idle) return true;  // error resets from anywhere
  return (from == TurnState::idle && to == TurnState::listening) ||
         (from == TurnState::listening && to == TurnState::thinking) ||
         (from == TurnState::thinking && to == TurnState::speaking);
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::transcription: return "transcription";
    case Stage::generation: return "generation";
    case Stage::synthesis: return "synthesis";
    case Stage::sentiment: return "sentiment";
  }
  return "generation";
}

Stage parse_stage(std::string_view s) {
  for (auto st : {Stage::transcription, Stage::generation, Stage::synthesis, Stage::sentiment}) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::parse_error, "unknown stage '" + std::string(s) + "'");
}

std::string_view to_string(TurnStatus s) { return s == TurnStatus::ok ? "ok" : "failed"; }

}  // namespace vpsim::pipeline
