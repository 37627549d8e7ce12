#pragma once

#include <cstddef>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "vpsim/prompt.hpp"

namespace vpsim::scenario {

enum class Speaker { doctor, patient };
std::string_view to_string(Speaker s);

struct MemoryTurn {
  Speaker speaker = Speaker::doctor;
  std::string text;
  bool truncated = false;

  bool operator==(const MemoryTurn&) const = default;
};

inline constexpr std::size_t kDefaultMemoryWindow = 12;
inline constexpr std::size_t kDefaultCharBudget = 8000;

// Short-term conversation memory. A value type: append() returns a new
// memory and leaves this one untouched. Retained turns are always a
// contiguous suffix of what was appended.
class ConversationMemory {
 public:
  explicit ConversationMemory(std::size_t window = kDefaultMemoryWindow,
                              std::size_t char_budget = kDefaultCharBudget);

  // Oldest turns go first when either limit is exceeded; the char budget is
  // enforced after the window. If the new turn alone exceeds the budget it
  // is cut to fit and flagged truncated. Throws on empty text.
  [[nodiscard]] ConversationMemory append(Speaker speaker, std::string_view text) const;

  const std::deque<MemoryTurn>& turns() const noexcept { return turns_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t char_budget() const noexcept { return char_budget_; }
  std::size_t char_count() const noexcept { return chars_; }
  std::size_t size() const noexcept { return turns_.size(); }
  bool empty() const noexcept { return turns_.empty(); }

  // Builds a memory from arbitrary turns without enforcing limits; used to
  // rebuild state and by tests that need over-budget fixtures.
  static ConversationMemory from_turns(std::size_t window, std::size_t char_budget,
                                       std::deque<MemoryTurn> turns);

 private:
  std::size_t window_;
  std::size_t char_budget_;
  std::size_t chars_ = 0;
  std::deque<MemoryTurn> turns_;
};

ConversationMemory append_turn(const ConversationMemory& memory, Speaker speaker,
                               std::string_view text);

enum class Role { system, user, assistant };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// [system, memory oldest..newest, utterance]. Memory turns are dropped
// oldest-first until memory + utterance fit in char_budget. The system
// prompt is never dropped. Throws on an empty utterance.
std::vector<ChatMessage> render_context(const SystemPrompt& prompt, const ConversationMemory& memory,
                                        std::string_view utterance);

}  // namespace vpsim::scenario
