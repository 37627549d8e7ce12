#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace vpsim {

// Seeded generator with platform-independent output. std::mt19937_64 is
// fully specified by the standard; the distributions are not, so bounded
// draws are done here by rejection.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

// Seed from the OS entropy source.
std::uint64_t fresh_seed();

}  // namespace vpsim
