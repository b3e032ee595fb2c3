#pragma once

// Test-only reference implementations. Kept deliberately naive and separate
// from the library code paths they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "g2sim/kinetics.hpp"

namespace g2sim::testing {

// O(n_a * n_b) pair enumeration with bins centred on k * bin_width.
inline std::vector<std::uint64_t> brute_force_pairs(const std::vector<std::int64_t>& a,
                                                    const std::vector<std::int64_t>& b, std::int64_t lag_max,
                                                    std::int64_t bin_width) {
  const std::int64_t half = lag_max / bin_width;
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(2 * half + 1), 0);
  for (std::int64_t ta : a) {
    for (std::int64_t tb : b) {
      const std::int64_t d = tb - ta;
      const double mag = 2.0 * static_cast<double>(d < 0 ? -d : d);
      for (std::int64_t k = 0; k <= half; ++k) {
        const double lo = k == 0 ? -1.0 : static_cast<double>((2 * k - 1) * bin_width);
        const double hi = static_cast<double>((2 * k + 1) * bin_width);
        const bool inside = k == 0 ? mag < hi : (mag >= lo && mag < hi);
        if (inside) {
          counts[static_cast<std::size_t>(half + (d < 0 ? -k : k))] += 1;
          break;
        }
      }
    }
  }
  return counts;
}

// Kolmogorov-Smirnov distance between samples and Exp(rate).
inline double ks_exponential(std::vector<double> samples, double rate) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double cdf = 1.0 - std::exp(-rate * samples[i]);
    d = std::max({d, std::abs(cdf - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - cdf)});
  }
  return d;
}

// Asymptotic 1% critical value of the one-sample KS statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

// Single-emitter g2 averaged over [centre - width/2, centre + width/2] (ns),
// Simpson's rule on the ODE oracle.
inline std::vector<double> bin_averaged_oracle(const RateSet& rates, const std::vector<double>& centres,
                                               const std::vector<double>& widths) {
  constexpr int kPanels = 20;
  std::vector<double> out;
  out.reserve(centres.size());
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const double lo = centres[i] - 0.5 * widths[i];
    const double hi = centres[i] + 0.5 * widths[i];
    std::vector<double> grid;
    for (int j = 0; j <= kPanels; ++j) grid.push_back(std::abs(lo + (hi - lo) * j / kPanels));
    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    const auto values = conditional_intensity(rates, sorted);
    double acc = 0.0;
    for (int j = 0; j <= kPanels; ++j) {
      const auto pos = std::lower_bound(sorted.begin(), sorted.end(), grid[static_cast<std::size_t>(j)]) - sorted.begin();
      const double w = (j == 0 || j == kPanels) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
      acc += w * values[static_cast<std::size_t>(pos)];
    }
    out.push_back(acc / (3.0 * kPanels));
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace g2sim::testing
