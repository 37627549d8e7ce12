#include "vpsim/memory.hpp"

#include "vpsim/error.hpp"
#include "vpsim/text.hpp"

namespace vpsim::scenario {

std::string_view to_string(Speaker s) { return s == Speaker::doctor ? "doctor" : "patient"; }

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw Error(ErrorCode::parse_error, "unknown message role '" + std::string(s) + "'");
}

ConversationMemory::ConversationMemory(std::size_t window, std::size_t char_budget)
    : window_(window), char_budget_(char_budget) {
  if (window == 0 || char_budget == 0) {
    throw Error(ErrorCode::invalid_argument, "memory window and char budget must be positive");
  }
}

ConversationMemory ConversationMemory::append(Speaker speaker, std::string_view text) const {
  if (text.empty()) throw Error(ErrorCode::invalid_argument, "cannot remember an empty turn");
  ConversationMemory next = *this;
  MemoryTurn turn{speaker, std::string(text), false};
  if (turn.text.size() > char_budget_) {
    turn.text = text::truncate_utf8(turn.text, char_budget_);
    turn.truncated = true;
  }
  next.chars_ += turn.text.size();
  next.turns_.push_back(std::move(turn));
  while (next.turns_.size() > window_) {
    next.chars_ -= next.turns_.front().text.size();
    next.turns_.pop_front();
  }
  while (next.chars_ > char_budget_ && next.turns_.size() > 1) {
    next.chars_ -= next.turns_.front().text.size();
    next.turns_.pop_front();
  }
  return next;
}

ConversationMemory ConversationMemory::from_turns(std::size_t window, std::size_t char_budget,
                                                  std::deque<MemoryTurn> turns) {
  ConversationMemory m(window, char_budget);
  for (const auto& t : turns) m.chars_ += t.text.size();
  m.turns_ = std::move(turns);
  return m;
}

ConversationMemory append_turn(const ConversationMemory& memory, Speaker speaker, std::string_view text) {
  return memory.append(speaker, text);
}

std::vector<ChatMessage> render_context(const SystemPrompt& prompt, const ConversationMemory& memory,
                                        std::string_view utterance) {
  if (text::trim(utterance).empty()) throw Error(ErrorCode::invalid_argument, "empty utterance");
  std::string said = text::truncate_utf8(utterance, memory.char_budget());

  // Walk back from the newest turn while the budget allows.
  std::size_t room = memory.char_budget() - said.size();
  const auto& turns = memory.turns();
  std::size_t keep = 0;
  for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
    if (it->text.size() > room) break;
    room -= it->text.size();
    ++keep;
  }

  std::vector<ChatMessage> out;
  out.reserve(keep + 2);
  out.push_back({Role::system, prompt.rendered});
  for (auto i = turns.size() - keep; i < turns.size(); ++i) {
    const auto& t = turns[i];
    out.push_back({t.speaker == Speaker::doctor ? Role::user : Role::assistant, t.text});
  }
  out.push_back({Role::user, std::move(said)});
  return out;
}

}  // namespace vpsim::scenario
