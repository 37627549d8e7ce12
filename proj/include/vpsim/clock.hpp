#pragma once

#include <atomic>
#include <cstdint>

namespace vpsim::pipeline {

// Time source injected into the pipeline and the mock adapters.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_s() const = 0;
  virtual void sleep_for_s(double seconds) = 0;
};

class SteadyClock final : public Clock {
 public:
  double now_s() const override;
  void sleep_for_s(double seconds) override;
};

// Sleeping advances the shared fake time instantly. Time is kept in integer
// nanoseconds so sums of injected delays are exact.
class FakeClock final : public Clock {
 public:
  double now_s() const override;
  void sleep_for_s(double seconds) override;
  void advance_s(double seconds) { sleep_for_s(seconds); }

 private:
  std::atomic<std::int64_t> ns_{0};
};

}  // namespace vpsim::pipeline
