#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "g2sim/correlator.hpp"
#include "g2sim/errors.hpp"
#include "g2sim/kinetics.hpp"
#include "g2sim/montecarlo.hpp"
#include "g2sim/optics.hpp"
#include "g2sim/presets.hpp"

using namespace g2sim;

namespace {

EmissionEvent photon(double t = 1.0) { return {t, 0, EventKind::Radiative}; }

struct Tally {
  std::size_t a = 0, b = 0, lost = 0;
};

Tally route_many(const DetectionGeometry& g, const EfficiencyBudget& b, const DipoleMix& m, std::size_t n,
                 std::uint64_t seed) {
  Rng rng(seed, StreamPurpose::Routing);
  Tally t;
  for (std::size_t i = 0; i < n; ++i) {
    const auto hit = route_event(photon(), g, b, m, rng);
    if (!hit) {
      ++t.lost;
    } else if (hit->channel == Channel::A) {
      ++t.a;
    } else {
      ++t.b;
    }
  }
  return t;
}

double binomial_sigma(double p, std::size_t n) { return std::sqrt(p * (1.0 - p) / static_cast<double>(n)); }

}  // namespace

TEST_CASE("spp_ring_na") {
  const RingAngles r = spp_ring_na(1.04, 1.5);
  CHECK(r.na == 1.04);
  CHECK(std::abs(r.theta_lrm - 0.7661044868696596) < 1e-14);
  CHECK(std::abs(spp_ring_na(1.0, 1.5).theta_lrm - 0.7297276562269663) < 1e-14);
  CHECK_THROWS_AS(spp_ring_na(1.6, 1.5), Error);
  try {
    spp_ring_na(1.6, 1.5);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidGeometry);
  }
}

TEST_CASE("coupling_ratio") {
  CHECK(std::abs(coupling_ratio(1.04) - 13.254901960784297) < 1e-10);
  CHECK(std::abs(coupling_ratio(std::numbers::sqrt2) - 2.0) < 1e-12);
  CHECK(coupling_ratio(1.0 + 1e-9) > 1e8);
  CHECK_THROWS_AS(coupling_ratio(1.0), Error);
}

TEST_CASE("collection_fraction") {
  CHECK(collection_fraction(0.07 * 2.0 * std::numbers::pi, 1.0) == doctest::Approx(0.07).epsilon(1e-14));
  CHECK(collection_fraction(0.0, 1.0) == 0.0);
  CHECK(collection_fraction(2.0 * std::numbers::pi * 3.0, 3.0) == 1.0);
  CHECK(collection_fraction(100.0, 1.0) == 1.0);
  CHECK_THROWS_AS(collection_fraction(1.0, 0.0), Error);
  const DetectionGeometry g;
  CHECK(collection_fraction(g.fiber_effective_diameter, g.ring_radius_bfp) == doctest::Approx(0.07));
}

TEST_CASE("DetectionGeometry validation") {
  DetectionGeometry g;
  CHECK_NOTHROW(g.validate());
  g.n_spp = 1.6;
  CHECK_THROWS_AS(g.validate(), Error);
  g = DetectionGeometry{};
  g.fiber_a_angle = 7.0;
  CHECK_THROWS_AS(g.validate(), Error);
  EfficiencyBudget b;
  b.p_qe = 1.5;
  CHECK_THROWS_AS(b.validate(), Error);
  CHECK_THROWS_AS(DipoleMix{-0.1}.validate(), Error);
}

TEST_CASE("route_event: lossless ring split evenly between two half-ring fibers") {
  DetectionGeometry g;
  g.fiber_a_angle = 0.0;
  g.fiber_b_angle = std::numbers::pi;
  EfficiencyBudget b = ideal_budget();
  b.via_spp = true;
  b.p_collect = 0.5;
  const std::size_t n = 200000;
  const Tally t = route_many(g, b, DipoleMix{}, n, 1);
  CHECK(t.lost == 0);
  const double sigma = std::sqrt(0.25 * static_cast<double>(n));
  CHECK(std::abs(static_cast<double>(t.a) - 0.5 * static_cast<double>(n)) < 3.0 * sigma);
  CHECK(detection_probability(Channel::A, g, b, DipoleMix{}) == doctest::Approx(0.5));
}

TEST_CASE("route_event: detected fraction equals the budget product") {
  const ScenarioBudget sb = scenario_budget(ScenarioKind::SilverFiltered);
  DetectionGeometry g = sb.geometry;
  g.fiber_b_angle = 0.5 * std::numbers::pi;
  const std::size_t n = 2000000;
  const Tally t = route_many(g, sb.budget, sb.mix, n, 2);
  const double p = detection_probability(Channel::A, g, sb.budget, sb.mix);
  const double pa = static_cast<double>(t.a) / static_cast<double>(n);
  const double pb = static_cast<double>(t.b) / static_cast<double>(n);
  CHECK(std::abs(pa - p) < 3.0 * binomial_sigma(p, n));
  CHECK(std::abs(pb - p) < 3.0 * binomial_sigma(p, n));

  // Independent product of the stages.
  const EfficiencyBudget& b = sb.budget;
  const double spp = (sb.mix.fraction_vertical * b.p_couple_vertical +
                      (1.0 - sb.mix.fraction_vertical) * b.p_couple_horizontal) *
                     b.p_survive * b.p_leak;
  CHECK(p == doctest::Approx(spp * b.p_collect * b.p_bs * b.p_qe).epsilon(1e-12));
}

TEST_CASE("route_event: overlapping fibers share the collected light") {
  const ScenarioBudget sb = scenario_budget(ScenarioKind::SilverFiltered);
  DetectionGeometry g = sb.geometry;
  g.fiber_a_angle = g.fiber_b_angle = 1.0;
  const double p_ab = detection_probability(Channel::A, sb.geometry, sb.budget, sb.mix);
  const double p_aa = detection_probability(Channel::A, g, sb.budget, sb.mix);
  CHECK(p_aa == doctest::Approx(0.5 * p_ab));
  const std::size_t n = 2000000;
  const Tally t = route_many(g, sb.budget, sb.mix, n, 3);
  const double pa = static_cast<double>(t.a) / static_cast<double>(n);
  CHECK(std::abs(pa - p_aa) < 3.0 * binomial_sigma(p_aa, n));
}

TEST_CASE("route_event: vertical vs horizontal dipoles differ by the coupling ratio") {
  DetectionGeometry g;
  EfficiencyBudget b;
  b.p_couple_vertical = 0.9;
  b.p_couple_horizontal = 0.9 / coupling_ratio(g.n_spp);
  b.p_collect = 0.5;
  b.p_bs = 1.0;
  const std::size_t n = 1000000;
  const Tally v = route_many(g, b, DipoleMix{1.0}, n, 4);
  const Tally h = route_many(g, b, DipoleMix{0.0}, n, 5);
  const double nv = static_cast<double>(v.a + v.b);
  const double nh = static_cast<double>(h.a + h.b);
  const double ratio = nv / nh;
  const double sigma = ratio * std::sqrt(1.0 / nv + 1.0 / nh);
  CHECK(std::abs(ratio - coupling_ratio(g.n_spp)) < 3.0 * sigma);
}

TEST_CASE("route_event: background bypasses the loss chain") {
  EfficiencyBudget b;
  b.p_survive = 0.0;
  Rng rng(1, StreamPurpose::Routing);
  std::size_t n_a = 0;
  const std::size_t n = 100000;
  for (std::size_t i = 0; i < n; ++i) {
    const auto hit = route_event({2.0, kBackgroundEmitter, EventKind::Background}, DetectionGeometry{}, b,
                                 DipoleMix{}, rng);
    REQUIRE(hit.has_value());
    if (hit->channel == Channel::A) ++n_a;
  }
  CHECK(std::abs(static_cast<double>(n_a) - 0.5 * n) < 3.0 * std::sqrt(0.25 * n));
  CHECK(!route_event(photon(), DetectionGeometry{}, b, DipoleMix{}, rng).has_value());
}

TEST_CASE("route_event: timestamps in integer picoseconds, jitter is zero-mean") {
  EfficiencyBudget b = ideal_budget();
  Rng rng(8, StreamPurpose::Routing);
  const auto hit = route_event(photon(12.3456), DetectionGeometry{}, b, DipoleMix{}, rng);
  REQUIRE(hit);
  CHECK(hit->time_ps == 12346);

  std::vector<double> offsets;
  for (int i = 0; i < 20000; ++i) {
    const auto h = route_event(photon(1000.0), DetectionGeometry{}, b, DipoleMix{}, rng, 50.0);
    REQUIRE(h);
    offsets.push_back(static_cast<double>(h->time_ps) - 1e6);
  }
  CHECK(std::abs(g2sim::testing::mean(offsets)) < 3.0 * 50.0 / std::sqrt(20000.0));
  CHECK(g2sim::testing::stddev(offsets) == doctest::Approx(50.0).epsilon(0.03));
}

TEST_CASE("Router: azimuth weight hook") {
  DetectionGeometry g;
  g.fiber_a_angle = 0.0;
  g.fiber_b_angle = std::numbers::pi;
  EfficiencyBudget b = ideal_budget();
  b.p_collect = 0.5;
  Router uniform(g, b, DipoleMix{}, 6);
  Router skewed(g, b, DipoleMix{}, 6);
  // All emission towards fiber A's half of the ring.
  skewed.set_azimuth_weight([](double phi) { return std::cos(phi) > 0.0 ? 1.0 : 0.0; }, 1.0);
  std::size_t ua = 0, sa = 0;
  for (int i = 0; i < 10000; ++i) {
    if (uniform.route(photon())->channel == Channel::A) ++ua;
    if (skewed.route(photon())->channel == Channel::A) ++sa;
  }
  CHECK(ua > 4500);
  CHECK(ua < 5500);
  CHECK(sa == 10000);
  CHECK_THROWS_AS(skewed.set_azimuth_weight([](double) { return 1.0; }, 0.0), Error);
}

TEST_CASE("scenario_budget presets") {
  const ScenarioBudget glass = scenario_budget(ScenarioKind::Glass);
  CHECK(!glass.budget.via_spp);
  CHECK(glass.geometry.plane == ImagingPlane::Direct);
  CHECK(glass.rho == 1.0);

  const ScenarioBudget silver = scenario_budget(ScenarioKind::SilverFiltered);
  CHECK(silver.rho == 1.0);
  CHECK(silver.budget.via_spp);
  CHECK(silver.budget.p_collect == doctest::Approx(0.07));
  const double per_apd_hz = 10.0 * photon_rate(kSilverPreset.rates()) * 1e9 *
                            detection_probability(Channel::A, silver.geometry, silver.budget, silver.mix);
  CHECK(per_apd_hz == doctest::Approx(kTargetRatePerApdHz));
  CHECK(per_apd_hz >= 5e3);
  CHECK(per_apd_hz <= 1e4);

  const ScenarioBudget unfiltered = scenario_budget(ScenarioKind::SilverUnfiltered);
  CHECK(unfiltered.rho == 0.8);
  CHECK(!unfiltered.geometry.fourier_filter_on);

  CHECK(parse_scenario_kind("glass") == ScenarioKind::Glass);
  CHECK(to_string(ScenarioKind::SilverUnfiltered) == "silver_unfiltered");
  CHECK_THROWS_AS(parse_scenario_kind("gold"), Error);
}

TEST_CASE("calibrate_survival and background_rate_for_rho") {
  const ScenarioBudget sb = scenario_budget(ScenarioKind::SilverFiltered);
  CHECK_THROWS_AS(calibrate_survival(sb.budget, sb.geometry, sb.mix, 1.0, 1e9), Error);
  CHECK(background_rate_for_rho(0.01, 1.0) == 0.0);
  CHECK(background_rate_for_rho(0.01, 0.8) == doctest::Approx(0.0025));
  CHECK_THROWS_AS(background_rate_for_rho(0.01, 0.0), Error);
}

TEST_CASE("thinning a Poisson stream keeps it Poisson") {
  // Route a background-free Poisson process of "photons" through a lossy
  // budget; the detected cross-correlation must stay flat.
  const auto events = poisson_background(0.2, 2e6, 31);
  EfficiencyBudget b;
  b.p_survive = 0.5;
  b.p_collect = 0.5;
  DetectionGeometry g;
  Rng rng(31, StreamPurpose::Routing);
  TimeTagStream a, bb;
  a.channel = Channel::A;
  bb.channel = Channel::B;
  a.duration_ps = bb.duration_ps = static_cast<std::int64_t>(2e9);
  for (const auto& ev : events) {
    const auto hit = route_event({ev.time, 0, EventKind::Radiative}, g, b, DipoleMix{}, rng);
    if (!hit) continue;
    (hit->channel == Channel::A ? a.tags : bb.tags).push_back(hit->time_ps);
  }
  const auto h = cross_correlate(a, bb, 50000, 1000);
  std::size_t within = 0;
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    if (std::abs(h.g2[i] - 1.0) <= 3.0 * h.sigma[i]) ++within;
  }
  CHECK(static_cast<double>(within) >= 0.95 * static_cast<double>(h.n_bins()));
}
