#pragma once

// Three-level emitter model: ground (1), excited (2), metastable shelving
// level (3). Rates are in 1/ns, lags in ns.
//
// The second-order correlation of N independent emitters with a
// signal fraction rho per detector is
//
//   g2(tau) = 1 - (beta e^{-gamma1 |tau|} - (beta - 1) e^{-gamma2 |tau|}) rho^2 / N
//
// so that g2(0) = 1 - rho^2 / N. The two-exponential form is exact for the
// three-level rate equations when gamma1, gamma2 are the nonzero eigenvalues
// of the rate matrix. derived_params() gives the usual closed-form
// approximations of those eigenvalues; exact_params() gives the eigenvalues.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace g2sim {

struct RateSet {
  double k12 = 0.0;  // excitation
  double k21 = 0.0;  // radiative decay
  double k23 = 0.0;  // shelving
  double k31 = 0.0;  // deshelving

  // Throws DegenerateRates on negative/non-finite rates or k21 <= 0.
  void validate() const;

  static RateSet from_lifetimes(double tau21, double tau12, double tau23, double tau31);
};

struct DerivedParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double beta = 1.0;
  // beta - 1 without the rounding of 1 + x; NaN means "use beta - 1".
  double beta_excess = std::numeric_limits<double>::quiet_NaN();

  double excess() const { return std::isnan(beta_excess) ? beta - 1.0 : beta_excess; }
};

struct EnsembleConfig {
  int n_emitters = 1;
  double rho = 1.0;

  void validate() const;
};

struct Populations {
  double p1 = 1.0;
  double p2 = 0.0;
  double p3 = 0.0;
};

// Approximate shape parameters:
//   gamma1 = k12 + k21
//   gamma2 = k31 + k12 k23 / (k12 + k21)
//   beta   = 1 + k12 k23 / (k31 (k12 + k21))
DerivedParams derived_params(const RateSet& rates);

// Exact shape parameters from the eigenvalues of the rate matrix.
DerivedParams exact_params(const RateSet& rates);

// Inverse of derived_params given the excitation rate.
RateSet invert_rates(const DerivedParams& dp, double k12);

// Inverse of exact_params given the excitation rate. Uses
//   gamma1 + gamma2 = k12 + k21 + k23 + k31
//   gamma1 gamma2   = k12 k23 + k31 (k12 + k21 + k23)
//   beta gamma1 - (beta - 1) gamma2 = k12 / p2_ss
RateSet invert_rates_exact(const DerivedParams& dp, double k12);

double g2_model(double tau, const DerivedParams& dp, const EnsembleConfig& cfg);
double g2_zero(const EnsembleConfig& cfg);

double quantum_yield(const RateSet& rates);

Populations steady_state(const RateSet& rates);

// Stationary photon emission rate of one emitter, k21 * p2 (1/ns).
double photon_rate(const RateSet& rates);

// Single-emitter g2 oracle: integrates the population equations from the
// post-emission state p1 = 1 and returns k21 p2(tau) / (k21 p2_ss) on the grid.
// tau_grid must be sorted and non-negative.
std::vector<double> conditional_intensity(const RateSet& rates, std::span<const double> tau_grid,
                                          double rel_tol = 1e-12);

}  // namespace g2sim
