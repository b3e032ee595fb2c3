#pragma once

// Detection channel: SPP ring geometry in the back focal plane and the
// Bernoulli loss chain from emitter to APD.
//
// A radiative event survives, in order: dipole -> SPP coupling, SPP
// propagation, leakage into the substrate, collection by a fiber (chosen by
// emission azimuth in the Fourier plane, or by the beam splitter in the
// direct plane), the beam-splitter arm, and the detector quantum efficiency.
// Background events are injected at detector level and bypass the chain.

#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "g2sim/montecarlo.hpp"
#include "g2sim/random.hpp"

namespace g2sim {

enum class Channel : std::uint8_t { A = 0, B = 1 };

enum class ImagingPlane : std::uint8_t { Fourier, Direct };

struct DetectionGeometry {
  double n_spp = 1.04;
  double n_glass = 1.5;
  double fiber_a_angle = 0.0;                // rad
  double fiber_b_angle = std::numbers::pi;   // rad
  double fiber_effective_diameter = 0.07 * 2.0 * std::numbers::pi;
  double ring_radius_bfp = 1.0;
  bool fourier_filter_on = true;
  ImagingPlane plane = ImagingPlane::Fourier;

  void validate() const;
};

struct EfficiencyBudget {
  double p_couple_vertical = 1.0;
  double p_couple_horizontal = 1.0;
  double p_survive = 1.0;
  double p_leak = 1.0;
  double p_collect = 1.0;  // per fiber
  double p_bs = 0.5;
  double p_qe = 1.0;
  bool via_spp = true;     // false: direct fluorescence, coupling stages bypassed

  void validate() const;
};

struct DipoleMix {
  double fraction_vertical = 1.0 / 3.0;

  void validate() const;
};

struct DetectorHit {
  Channel channel = Channel::A;
  std::int64_t time_ps = 0;

  friend bool operator==(const DetectorHit&, const DetectorHit&) = default;
};

struct RingAngles {
  double na;         // numerical aperture of the ring, equals n_spp
  double theta_lrm;  // leakage angle in the substrate (rad)
};

RingAngles spp_ring_na(double n_spp, double n_glass = 1.5);

// |k / k_z|^2 for an SPP with in-plane index n_spp and an evanescent tail in air.
double coupling_ratio(double n_spp);

// Fraction of the ring perimeter covered by one fiber, d / (2 pi R), clamped.
double collection_fraction(double fiber_effective_diameter, double ring_radius_bfp);

// Probability that a radiative event produces a click on the given channel.
double detection_probability(Channel channel, const DetectionGeometry& geom,
                             const EfficiencyBudget& budget, const DipoleMix& mix);

std::optional<DetectorHit> route_event(const EmissionEvent& event, const DetectionGeometry& geom,
                                       const EfficiencyBudget& budget, const DipoleMix& mix, Rng& rng,
                                       double jitter_sigma_ps = 0.0);

// Stateful wrapper over route_event that owns its random stream and an
// optional non-uniform emission pattern over azimuth.
class Router {
 public:
  Router(DetectionGeometry geom, EfficiencyBudget budget, DipoleMix mix, std::uint64_t seed,
         double jitter_sigma_ps = 0.0);

  std::optional<DetectorHit> route(const EmissionEvent& event);

  // Relative emission weight over azimuth, bounded by max_weight. Identity by default.
  void set_azimuth_weight(std::function<double(double)> weight, double max_weight);

  const DetectionGeometry& geometry() const { return geom_; }
  const EfficiencyBudget& budget() const { return budget_; }

 private:
  DetectionGeometry geom_;
  EfficiencyBudget budget_;
  DipoleMix mix_;
  Rng rng_;
  double jitter_sigma_ps_;
  std::function<double(double)> weight_;
  double max_weight_ = 1.0;
};

enum class ScenarioKind { Glass, SilverFiltered, SilverUnfiltered };

ScenarioKind parse_scenario_kind(std::string_view name);
std::string_view to_string(ScenarioKind kind);

struct ScenarioBudget {
  EfficiencyBudget budget;
  DipoleMix mix;
  DetectionGeometry geometry;
  double rho = 1.0;  // detector-level signal fraction
};

// Per-APD count-rate target the SPP presets are calibrated to (Hz).
inline constexpr double kTargetRatePerApdHz = 7.5e3;

ScenarioBudget scenario_budget(ScenarioKind kind);

// Solves the survival stage so that ensemble_rate_hz * detection_probability
// equals target_hz on channel A. Throws InvalidArgument if unreachable.
EfficiencyBudget calibrate_survival(EfficiencyBudget budget, const DetectionGeometry& geom,
                                    const DipoleMix& mix, double ensemble_rate_hz, double target_hz);

// Per-detector background rate that dilutes a signal rate to fraction rho.
double background_rate_for_rho(double signal_rate, double rho);

// Lossless detection: every radiative event reaches one of the two APDs.
EfficiencyBudget ideal_budget();

}  // namespace g2sim
