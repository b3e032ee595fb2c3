#pragma once

// End-to-end run: simulate emitters -> route to detectors -> correlate A
// with B -> fit -> photophysics report, deterministic from the scenario seed.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "g2sim/correlator.hpp"
#include "g2sim/fitter.hpp"
#include "g2sim/io.hpp"
#include "g2sim/scenario.hpp"

namespace g2sim {

inline constexpr const char* kToolVersion = "0.1.0";

struct DetectionRecord {
  ChannelPair tags;
  double background_rate = 0.0;  // per detector, 1/ns
  std::uint64_t n_emitted = 0;   // radiative events
};

// Expected signal count rate on one detector, in 1/ns.
double expected_signal_rate(const Scenario& s);

// Per-detector background implied by the scenario's rho or explicit rate.
double resolved_background_rate(const Scenario& s);

DetectionRecord simulate_detection(const Scenario& s);

CorrelationHistogram correlate_channels(const ChannelPair& tags, std::int64_t window_ps, std::int64_t bin_width_ps,
                                        Estimator estimator = Estimator::AllPairs);

struct PipelineResult {
  DetectionRecord detection;
  CorrelationHistogram histogram;
  FitResult fit;
  std::optional<PhotophysicsReport> report;
  std::string report_error;
  nlohmann::json manifest;
};

// Writes tags.ttag, histogram.csv/.json, fit.json, report.txt and
// manifest.json into out_dir when given.
PipelineResult run_pipeline(const Scenario& s, const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string config_hash(const Scenario& s);

}  // namespace g2sim
