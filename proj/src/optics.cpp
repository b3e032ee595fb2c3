#include "g2sim/optics.hpp"

#include <algorithm>
#include <cmath>

#include "g2sim/errors.hpp"
#include "g2sim/presets.hpp"

namespace g2sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool unit_interval(double p) { return p >= 0.0 && p <= 1.0; }

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

double angular_distance(double a, double b) {
  const double d = std::abs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

// Ring fraction covered by both fiber arcs.
double arc_overlap_fraction(double half_width, double centre_distance) {
  const double near_side = std::max(0.0, 2.0 * half_width - centre_distance);
  const double far_side = std::max(0.0, 2.0 * half_width - (kTwoPi - centre_distance));
  return std::min(1.0, (near_side + far_side) / kTwoPi);
}

double spp_stage_probability(const EfficiencyBudget& b, const DipoleMix& mix) {
  if (!b.via_spp) return 1.0;
  const double couple =
      mix.fraction_vertical * b.p_couple_vertical + (1.0 - mix.fraction_vertical) * b.p_couple_horizontal;
  return couple * b.p_survive * b.p_leak;
}

}  // namespace

void DetectionGeometry::validate() const {
  if (!(n_glass > 1.0)) throw Error(ErrorKind::InvalidGeometry, "n_glass must exceed 1");
  if (!(n_spp > 1.0) || !(n_spp < n_glass)) {
    throw Error(ErrorKind::InvalidGeometry, "require 1 < n_spp < n_glass");
  }
  if (!(fiber_effective_diameter > 0.0) || !(ring_radius_bfp > 0.0)) {
    throw Error(ErrorKind::InvalidGeometry, "fiber diameter and ring radius must be positive");
  }
  for (double a : {fiber_a_angle, fiber_b_angle}) {
    if (!(a >= 0.0 && a < kTwoPi)) throw Error(ErrorKind::InvalidGeometry, "fiber angle outside [0, 2pi)");
  }
}

void EfficiencyBudget::validate() const {
  for (double p : {p_couple_vertical, p_couple_horizontal, p_survive, p_leak, p_collect, p_bs, p_qe}) {
    if (!unit_interval(p)) throw Error(ErrorKind::InvalidArgument, "budget probabilities must lie in [0,1]");
  }
}

void DipoleMix::validate() const {
  if (!unit_interval(fraction_vertical)) {
    throw Error(ErrorKind::InvalidArgument, "fraction_vertical must lie in [0,1]");
  }
}

RingAngles spp_ring_na(double n_spp, double n_glass) {
  if (!(n_spp >= 1.0)) throw Error(ErrorKind::InvalidGeometry, "n_spp below the critical NA of 1");
  if (!(n_spp < n_glass)) throw Error(ErrorKind::InvalidGeometry, "n_spp >= n_glass: no real leakage angle");
  return {n_spp, std::asin(n_spp / n_glass)};
}

double coupling_ratio(double n_spp) {
  if (!(n_spp > 1.0)) throw Error(ErrorKind::InvalidGeometry, "n_spp must exceed 1");
  const double n2 = n_spp * n_spp;
  return n2 / (n2 - 1.0);
}

double collection_fraction(double fiber_effective_diameter, double ring_radius_bfp) {
  if (!(fiber_effective_diameter >= 0.0) || !(ring_radius_bfp > 0.0)) {
    throw Error(ErrorKind::InvalidGeometry, "diameter must be >= 0 and radius > 0");
  }
  return std::clamp(fiber_effective_diameter / (kTwoPi * ring_radius_bfp), 0.0, 1.0);
}

double detection_probability(Channel channel, const DetectionGeometry& geom, const EfficiencyBudget& budget,
                             const DipoleMix& mix) {
  (void)channel;  // both channels see the same probability under uniform azimuth
  double collect = 0.0;
  if (geom.plane == ImagingPlane::Fourier) {
    const double half_width = std::numbers::pi * budget.p_collect;
    const double overlap =
        arc_overlap_fraction(half_width, angular_distance(geom.fiber_a_angle, geom.fiber_b_angle));
    collect = budget.p_collect - 0.5 * overlap;
  } else {
    collect = 0.5 * budget.p_collect;
  }
  return spp_stage_probability(budget, mix) * collect * budget.p_bs * budget.p_qe;
}

namespace {

std::optional<DetectorHit> route_impl(const EmissionEvent& event, const DetectionGeometry& geom,
                                      const EfficiencyBudget& b, const DipoleMix& mix, Rng& rng,
                                      double jitter_sigma_ps, const std::function<double(double)>* weight,
                                      double max_weight) {
  auto finish = [&](Channel ch) -> std::optional<DetectorHit> {
    double t_ps = event.time * 1e3;
    if (jitter_sigma_ps > 0.0) t_ps += jitter_sigma_ps * rng.normal();
    return DetectorHit{ch, std::max<std::int64_t>(0, std::llround(t_ps))};
  };
  auto coin = [&rng] { return rng.uniform() < 0.5 ? Channel::A : Channel::B; };

  if (event.kind == EventKind::Background) return finish(coin());

  if (b.via_spp) {
    const bool vertical = rng.bernoulli(mix.fraction_vertical);
    if (!rng.bernoulli(vertical ? b.p_couple_vertical : b.p_couple_horizontal)) return std::nullopt;
    if (!rng.bernoulli(b.p_survive)) return std::nullopt;
    if (!rng.bernoulli(b.p_leak)) return std::nullopt;
  }

  Channel channel = Channel::A;
  if (geom.plane == ImagingPlane::Fourier) {
    double phi = kTwoPi * rng.uniform();
    if (weight != nullptr && *weight) {
      while (rng.uniform() * max_weight > (*weight)(phi)) phi = kTwoPi * rng.uniform();
    }
    const double half_width = std::numbers::pi * b.p_collect;
    const bool in_a = angular_distance(phi, geom.fiber_a_angle) <= half_width;
    const bool in_b = angular_distance(phi, geom.fiber_b_angle) <= half_width;
    if (in_a && in_b) {
      channel = coin();
    } else if (in_a) {
      channel = Channel::A;
    } else if (in_b) {
      channel = Channel::B;
    } else {
      return std::nullopt;
    }
  } else {
    if (!rng.bernoulli(b.p_collect)) return std::nullopt;
    channel = coin();
  }

  if (!rng.bernoulli(b.p_bs)) return std::nullopt;
  if (!rng.bernoulli(b.p_qe)) return std::nullopt;
  return finish(channel);
}

}  // namespace

std::optional<DetectorHit> route_event(const EmissionEvent& event, const DetectionGeometry& geom,
                                       const EfficiencyBudget& budget, const DipoleMix& mix, Rng& rng,
                                       double jitter_sigma_ps) {
  return route_impl(event, geom, budget, mix, rng, jitter_sigma_ps, nullptr, 1.0);
}

Router::Router(DetectionGeometry geom, EfficiencyBudget budget, DipoleMix mix, std::uint64_t seed,
               double jitter_sigma_ps)
    : geom_(geom),
      budget_(budget),
      mix_(mix),
      rng_(seed, StreamPurpose::Routing),
      jitter_sigma_ps_(jitter_sigma_ps) {
  budget_.validate();
  mix_.validate();
  if (!(jitter_sigma_ps >= 0.0)) throw Error(ErrorKind::InvalidArgument, "jitter sigma must be >= 0");
}

std::optional<DetectorHit> Router::route(const EmissionEvent& event) {
  return route_impl(event, geom_, budget_, mix_, rng_, jitter_sigma_ps_, &weight_, max_weight_);
}

void Router::set_azimuth_weight(std::function<double(double)> weight, double max_weight) {
  if (!(max_weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "max_weight must be positive");
  weight_ = std::move(weight);
  max_weight_ = max_weight;
}

ScenarioKind parse_scenario_kind(std::string_view name) {
  if (name == "glass" || name == "Glass") return ScenarioKind::Glass;
  if (name == "silver_filtered" || name == "SilverFiltered") return ScenarioKind::SilverFiltered;
  if (name == "silver_unfiltered" || name == "SilverUnfiltered") return ScenarioKind::SilverUnfiltered;
  throw Error(ErrorKind::UnknownScenario, std::string(name));
}

std::string_view to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Glass: return "glass";
    case ScenarioKind::SilverFiltered: return "silver_filtered";
    case ScenarioKind::SilverUnfiltered: return "silver_unfiltered";
  }
  return "unknown";
}

EfficiencyBudget calibrate_survival(EfficiencyBudget budget, const DetectionGeometry& geom,
                                    const DipoleMix& mix, double ensemble_rate_hz, double target_hz) {
  budget.p_survive = 1.0;
  const double p_full = detection_probability(Channel::A, geom, budget, mix);
  const double needed = target_hz / (ensemble_rate_hz * p_full);
  if (!(needed > 0.0 && needed <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "target rate unreachable with this budget");
  }
  budget.p_survive = needed;
  return budget;
}

double background_rate_for_rho(double signal_rate, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorKind::InvalidArgument, "rho must lie in (0,1]");
  return signal_rate * (1.0 - rho) / rho;
}

EfficiencyBudget ideal_budget() {
  EfficiencyBudget b;
  b.p_bs = 1.0;
  b.via_spp = false;
  return b;
}

ScenarioBudget scenario_budget(ScenarioKind kind) {
  ScenarioBudget out;
  if (kind == ScenarioKind::Glass) {
    out.geometry.plane = ImagingPlane::Direct;
    out.geometry.fourier_filter_on = false;
    out.budget.via_spp = false;
    out.budget.p_collect = 0.05;
    out.budget.p_bs = 0.5;
    out.budget.p_qe = 0.65;
    return out;
  }

  // SPP chain: vertical dipoles couple eta times better than horizontal ones;
  // an isotropic dipole ensemble has one third of its weight vertical.
  out.mix.fraction_vertical = 1.0 / 3.0;
  out.budget.p_couple_vertical = 0.6;
  out.budget.p_couple_horizontal = 0.6 / coupling_ratio(out.geometry.n_spp);
  out.budget.p_leak = 0.5;
  out.budget.p_collect = collection_fraction(out.geometry.fiber_effective_diameter, out.geometry.ring_radius_bfp);
  out.budget.p_bs = 0.5;
  out.budget.p_qe = 0.65;

  // Survival is the free stage: calibrated so the N = 10 silver ensemble
  // gives the target per-APD count rate.
  constexpr int kCalibrationEmitters = 10;
  const double ensemble_hz = kCalibrationEmitters * photon_rate(kSilverPreset.rates()) * 1e9;
  out.budget = calibrate_survival(out.budget, out.geometry, out.mix, ensemble_hz, kTargetRatePerApdHz);

  if (kind == ScenarioKind::SilverUnfiltered) {
    out.geometry.fourier_filter_on = false;
    out.rho = 0.8;
  }
  return out;
}

}  // namespace g2sim
