#pragma once

// Measured photophysical lifetimes (ns) of the NV ensemble. These are the only
// place these numbers live; scenarios refer to them by key.

#include <optional>
#include <string_view>

#include "g2sim/kinetics.hpp"

namespace g2sim {

struct LifetimePreset {
  std::string_view key;
  std::string_view label;
  double tau21;
  double tau12;
  double tau23;
  double tau31;
  double quantum_yield_percent;

  RateSet rates() const { return RateSet::from_lifetimes(tau21, tau12, tau23, tau31); }
};

inline constexpr LifetimePreset kGlassPreset{"glass", "Facing glass", 60.0, 51.0, 23.0, 300.0, 27.0};
inline constexpr LifetimePreset kSilverPreset{"silver", "Facing silver", 9.7, 27.0, 27.4, 102.0, 74.0};

inline std::optional<LifetimePreset> find_preset(std::string_view key) {
  if (key == kGlassPreset.key) return kGlassPreset;
  if (key == kSilverPreset.key) return kSilverPreset;
  return std::nullopt;
}

}  // namespace g2sim
