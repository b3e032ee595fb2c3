#include "g2sim/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "g2sim/errors.hpp"

namespace g2sim {
namespace {

void check_window(std::int64_t lag_max, std::int64_t bin_width) {
  if (!(bin_width > 0) || lag_max < bin_width) {
    throw Error(ErrorKind::InvalidArgument, "require lag_max >= bin_width > 0");
  }
  if (lag_max % bin_width != 0) {
    throw Error(ErrorKind::InvalidArgument, "lag_max must be a multiple of bin_width");
  }
}

CorrelationHistogram empty_histogram(const TimeTagStream& a, const TimeTagStream& b, std::int64_t lag_max,
                                     std::int64_t bin_width, Estimator estimator) {
  CorrelationHistogram h;
  h.bin_width = bin_width;
  h.lag_min = -lag_max;
  h.lag_max = lag_max;
  h.counts.assign(static_cast<std::size_t>(2 * (lag_max / bin_width) + 1), 0);
  h.duration = std::min(a.duration_ps, b.duration_ps);
  h.n_a = a.tags.size();
  h.n_b = b.tags.size();
  h.estimator = estimator;
  return h;
}

// Lags strictly inside this bound (in doubled units) fall in the window.
std::int64_t doubled_reach(std::int64_t half_bins, std::int64_t bin_width) {
  return (2 * half_bins + 1) * bin_width;
}

}  // namespace

void TimeTagStream::validate() const {
  if (tags.empty()) throw Error(ErrorKind::EmptyStream, "time-tag stream has no events");
  if (!std::is_sorted(tags.begin(), tags.end())) throw Error(ErrorKind::UnsortedInput, "tags are not sorted");
  if (tags.front() < 0 || tags.back() > duration_ps) {
    throw Error(ErrorKind::InvalidArgument, "tags outside [0, duration]");
  }
  if (!(duration_ps > 0)) throw Error(ErrorKind::InvalidArgument, "duration must be positive");
}

std::int64_t bin_span(std::int64_t k, std::int64_t bin_width) {
  if (k == 0) return bin_width % 2 == 0 ? bin_width - 1 : bin_width;
  return bin_width;
}

std::int64_t lag_bin(std::int64_t lag, std::int64_t bin_width) {
  const std::int64_t mag = lag < 0 ? -lag : lag;
  const std::int64_t k = (2 * mag + bin_width) / (2 * bin_width);
  return lag < 0 ? -k : k;
}

void accumulate_pairs(std::span<const std::int64_t> a, std::span<const std::int64_t> b, std::int64_t half_bins,
                      std::int64_t bin_width, std::span<std::uint64_t> counts) {
  const std::int64_t reach2 = doubled_reach(half_bins, bin_width);
  // Smallest lag admitted: 2d > -reach2  <=>  d >= -(reach2 - 1) / 2
  const std::int64_t min_lag = -((reach2 - 1) / 2);
  std::size_t first = 0;
  for (const std::int64_t ta : a) {
    while (first < b.size() && b[first] - ta < min_lag) ++first;
    for (std::size_t j = first; j < b.size(); ++j) {
      const std::int64_t d = b[j] - ta;
      if (2 * d >= reach2) break;
      counts[static_cast<std::size_t>(lag_bin(d, bin_width) + half_bins)] += 1;
    }
  }
}

void normalize(CorrelationHistogram& h) {
  const std::size_t n = h.counts.size();
  h.g2.assign(n, 0.0);
  h.sigma.assign(n, 0.0);
  const double t = static_cast<double>(h.duration);
  h.rate_a = t > 0.0 ? static_cast<double>(h.n_a) / t * 1e12 : 0.0;
  h.rate_b = t > 0.0 ? static_cast<double>(h.n_b) / t * 1e12 : 0.0;
  const double pairs = static_cast<double>(h.n_a) * static_cast<double>(h.n_b);
  if (!(pairs > 0.0) || !(t > 0.0)) return;
  const std::int64_t half_bins = h.lag_max / h.bin_width;
  for (std::size_t i = 0; i < n; ++i) {
    const std::int64_t k = static_cast<std::int64_t>(i) - half_bins;
    const double denom = pairs * static_cast<double>(bin_span(k, h.bin_width)) / t;
    const double c = static_cast<double>(h.counts[i]);
    h.g2[i] = c / denom;
    h.sigma[i] = std::sqrt(c) / denom;
  }
}

CorrelationHistogram cross_correlate(const TimeTagStream& a, const TimeTagStream& b, std::int64_t lag_max,
                                     std::int64_t bin_width, Estimator estimator) {
  check_window(lag_max, bin_width);
  a.validate();
  b.validate();
  CorrelationHistogram h = empty_histogram(a, b, lag_max, bin_width, estimator);
  const std::int64_t half_bins = lag_max / bin_width;

  if (estimator == Estimator::AllPairs) {
    accumulate_pairs(a.tags, b.tags, half_bins, bin_width, h.counts);
  } else {
    // Start on a, stop on the first b at or after it.
    const std::int64_t reach2 = doubled_reach(half_bins, bin_width);
    auto stop = b.tags.begin();
    for (const std::int64_t ta : a.tags) {
      stop = std::lower_bound(stop, b.tags.end(), ta);
      if (stop == b.tags.end()) break;
      const std::int64_t d = *stop - ta;
      if (2 * d < reach2) h.counts[static_cast<std::size_t>(lag_bin(d, bin_width) + half_bins)] += 1;
    }
  }
  normalize(h);
  return h;
}

CorrelationHistogram auto_correlate(const TimeTagStream& a, std::int64_t lag_max, std::int64_t bin_width) {
  check_window(lag_max, bin_width);
  a.validate();
  CorrelationHistogram h = empty_histogram(a, a, lag_max, bin_width, Estimator::AllPairs);
  const std::int64_t half_bins = lag_max / bin_width;
  const std::int64_t reach2 = doubled_reach(half_bins, bin_width);
  const auto& t = a.tags;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      const std::int64_t d = t[j] - t[i];
      if (2 * d >= reach2) break;
      const std::int64_t k = lag_bin(d, bin_width);
      h.counts[static_cast<std::size_t>(half_bins + k)] += 1;
      h.counts[static_cast<std::size_t>(half_bins - k)] += 1;
    }
  }
  normalize(h);
  return h;
}

SymmetryReport swap_symmetry_check(const CorrelationHistogram& h_ab, const CorrelationHistogram& h_ba) {
  if (h_ab.bin_width != h_ba.bin_width || h_ab.lag_max != h_ba.lag_max || h_ab.n_bins() != h_ba.n_bins()) {
    throw Error(ErrorKind::SymmetryViolation, "histograms have different binning");
  }
  SymmetryReport report;
  const std::size_t n = h_ab.n_bins();
  for (std::size_t i = 0; i < n; ++i) {
    if (h_ba.counts[i] != h_ab.counts[n - 1 - i]) {
      throw Error(ErrorKind::SymmetryViolation,
                  "bin at lag " + std::to_string(h_ba.lag(i)) + " ps: " + std::to_string(h_ba.counts[i]) +
                      " vs mirrored " + std::to_string(h_ab.counts[n - 1 - i]));
    }
    report.total_counts += h_ba.counts[i];
  }
  report.bins_checked = n;
  return report;
}

}  // namespace g2sim
