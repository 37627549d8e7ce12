#include "vpsim/clock.hpp"

#include <chrono>
#include <cmath>
#include <thread>

namespace vpsim::pipeline {

double SteadyClock::now_s() const {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void SteadyClock::sleep_for_s(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

double FakeClock::now_s() const { return static_cast<double>(ns_.load()) * 1e-9; }

void FakeClock::sleep_for_s(double seconds) {
  if (seconds > 0) ns_.fetch_add(std::llround(seconds * 1e9));
}

}  // namespace vpsim::pipeline
