#include "vpsim/events.hpp"

#include <algorithm>
#include <chrono>

namespace vpsim::service {

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::state: return "state";
    case EventKind::turn_completed: return "turn_completed";
    case EventKind::turn_failed: return "turn_failed";
    case EventKind::sentiment_attached: return "sentiment_attached";
    case EventKind::session_closed: return "session_closed";
  }
  return "unknown";
}

nlohmann::ordered_json SessionEvent::to_json() const {
  return {{"seq", seq}, {"session_id", session_id}, {"kind", to_string(kind)}, {"payload", payload}};
}

std::optional<SessionEvent> Subscription::next(double timeout_s) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) return std::nullopt;
  SessionEvent ev = std::move(queue_.front());
  queue_.pop_front();
  return ev;
}

bool Subscription::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

bool Subscription::overflowed() const {
  std::lock_guard lock(mu_);
  return overflowed_;
}

void Subscription::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool Subscription::offer(const SessionEvent& ev) {
  {
    std::lock_guard lock(mu_);
    if (closed_) return false;
    if (queue_.size() >= capacity_) {
      // Drop the consumer rather than the event: a gap would break ordering.
      overflowed_ = true;
      closed_ = true;
    } else {
      queue_.push_back(ev);
    }
  }
  cv_.notify_all();
  return !overflowed();
}

std::shared_ptr<Subscription> EventHub::subscribe() {
  auto sub = std::make_shared<Subscription>(capacity_);
  std::lock_guard lock(mu_);
  subs_.push_back(sub);
  return sub;
}

SessionEvent EventHub::publish(EventKind kind, nlohmann::ordered_json payload) {
  std::lock_guard lock(mu_);
  SessionEvent ev{++seq_, session_id_, kind, std::move(payload)};
  std::erase_if(subs_, [&](const std::shared_ptr<Subscription>& s) { return !s->offer(ev); });
  return ev;
}

void EventHub::close_all() {
  std::lock_guard lock(mu_);
  for (auto& s : subs_) s->close();
  subs_.clear();
}

std::size_t EventHub::subscriber_count() const {
  std::lock_guard lock(mu_);
  return subs_.size();
}

}  // namespace vpsim::service
