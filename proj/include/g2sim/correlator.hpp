#pragma once

// Coincidence histograms g2(tau) between two time-tag streams.
//
// Lags are tau = t_b - t_a in integer picoseconds. Bin k is centred on
// k * bin_width and collects lags by magnitude, so a lag d and its mirror -d
// always land in bins k and -k:
//
//   bin 0:      2|d| <  bin_width
//   bin k > 0:  (2k - 1) bin_width <= 2d < (2k + 1) bin_width
//
// Each bin is normalized by the number of integer lags it spans (bin_width,
// or bin_width - 1 for the centre bin when bin_width is even):
//
//   g2_k = counts_k * T / (n_a * n_b * width_k)

#include <cstdint>
#include <span>
#include <vector>

#include "g2sim/optics.hpp"

namespace g2sim {

struct TimeTagStream {
  std::vector<std::int64_t> tags;  // ps, non-decreasing
  Channel channel = Channel::A;
  std::int64_t duration_ps = 0;

  // Throws EmptyStream / UnsortedInput / InvalidArgument.
  void validate() const;
};

enum class Estimator : std::uint8_t { AllPairs, StartStop };

struct CorrelationHistogram {
  std::int64_t bin_width = 0;  // ps
  std::int64_t lag_min = 0;    // centre of the first bin, ps
  std::int64_t lag_max = 0;    // centre of the last bin, ps
  std::vector<std::uint64_t> counts;
  std::vector<double> g2;
  std::vector<double> sigma;
  double rate_a = 0.0;  // Hz
  double rate_b = 0.0;  // Hz
  std::int64_t duration = 0;  // ps
  std::uint64_t n_a = 0;
  std::uint64_t n_b = 0;
  Estimator estimator = Estimator::AllPairs;

  std::size_t n_bins() const { return counts.size(); }
  std::int64_t lag(std::size_t i) const { return lag_min + static_cast<std::int64_t>(i) * bin_width; }
  double lag_ns(std::size_t i) const { return static_cast<double>(lag(i)) * 1e-3; }
};

// Number of integer lags in bin k.
std::int64_t bin_span(std::int64_t k, std::int64_t bin_width);

// Signed bin index of a lag.
std::int64_t lag_bin(std::int64_t lag, std::int64_t bin_width);

// Adds all-pairs coincidences between every tag of `a` and the stream `b`
// into counts (size 2 * half_bins + 1). Disjoint chunks of `a` can be
// accumulated independently and summed.
void accumulate_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b,
                      std::int64_t half_bins, std::int64_t bin_width, std::span<std::uint64_t> counts);

// Fills g2/sigma/rates from raw counts.
void normalize(CorrelationHistogram& h);

CorrelationHistogram cross_correlate(const TimeTagStream& a, const TimeTagStream& b, std::int64_t lag_max,
                                     std::int64_t bin_width, Estimator estimator = Estimator::AllPairs);

// Cross-correlation of a stream with itself, excluding each tag's self-pair.
CorrelationHistogram auto_correlate(const TimeTagStream& a, std::int64_t lag_max, std::int64_t bin_width);

struct SymmetryReport {
  std::size_t bins_checked = 0;
  std::uint64_t total_counts = 0;
};

// Checks h_ba(tau) == h_ab(-tau) bin-exactly; throws SymmetryViolation.
SymmetryReport swap_symmetry_check(const CorrelationHistogram& h_ab, const CorrelationHistogram& h_ba);

}  // namespace g2sim
