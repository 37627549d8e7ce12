#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace vpsim::service {

enum class EventKind { state, turn_completed, turn_failed, sentiment_attached, session_closed };
std::string_view to_string(EventKind k);

struct SessionEvent {
  std::uint64_t seq = 0;  // per session, strictly increasing
  std::string session_id;
  EventKind kind = EventKind::state;
  nlohmann::ordered_json payload;

  nlohmann::ordered_json to_json() const;
};

// A consumer's bounded queue. When a publish would overflow it the
// subscription is dropped instead of blocking the publisher.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : capacity_(capacity) {}

  // nullopt on timeout or once closed and drained.
  std::optional<SessionEvent> next(double timeout_s);
  bool closed() const;
  bool overflowed() const;
  void close();

 private:
  friend class EventHub;
  bool offer(const SessionEvent& ev);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<SessionEvent> queue_;
  std::size_t capacity_;
  bool closed_ = false;
  bool overflowed_ = false;
};

class EventHub {
 public:
  EventHub(std::string session_id, std::size_t capacity)
      : session_id_(std::move(session_id)), capacity_(capacity) {}

  std::shared_ptr<Subscription> subscribe();
  // Assigns the next sequence number and fans out. Never blocks on consumers.
  SessionEvent publish(EventKind kind, nlohmann::ordered_json payload);
  void close_all();
  std::size_t subscriber_count() const;

 private:
  std::string session_id_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::uint64_t seq_ = 0;
  std::vector<std::shared_ptr<Subscription>> subs_;
};

}  // namespace vpsim::service
