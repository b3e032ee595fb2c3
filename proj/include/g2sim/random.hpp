#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace g2sim {

// Purpose of a random substream. Each (seed, purpose, index) triple selects an
// independent, reproducible generator.
enum class StreamPurpose : std::uint32_t {
  Emitter = 1,
  Background = 2,
  Routing = 3,
  Jitter = 4,
};

class Rng {
 public:
  Rng(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Exponential waiting time; +inf for a zero rate.
  double exponential(double rate);

  bool bernoulli(double p) { return p >= 1.0 || (p > 0.0 && uniform() < p); }

  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace g2sim
