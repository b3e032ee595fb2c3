#include "g2sim/random.hpp"

#include <cmath>
#include <numbers>

namespace g2sim {

Rng::Rng(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  engine_.seed(seq);
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(uniform()) / rate;
}

double Rng::normal() {
  // Box-Muller; the std distributions are not reproducible across library vendors.
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform()));
  const double phi = 2.0 * std::numbers::pi * uniform();
  spare_normal_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

}  // namespace g2sim
