#include "g2sim/kinetics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "g2sim/errors.hpp"

namespace g2sim {
namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

Eigen::Matrix3d rate_matrix(const RateSet& r) {
  // dp/dt = M p with p = (p1, p2, p3)
  Eigen::Matrix3d m;
  m << -r.k12, r.k21, r.k31,
       r.k12, -(r.k21 + r.k23), 0.0,
       0.0, r.k23, -r.k31;
  return m;
}

}  // namespace

void RateSet::validate() const {
  if (!finite_nonneg(k12) || !finite_nonneg(k21) || !finite_nonneg(k23) || !finite_nonneg(k31)) {
    throw Error(ErrorKind::DegenerateRates, "rates must be finite and non-negative");
  }
  if (!(k21 > 0.0)) throw Error(ErrorKind::DegenerateRates, "k21 must be positive");
}

RateSet RateSet::from_lifetimes(double tau21, double tau12, double tau23, double tau31) {
  auto inv = [](double t) { return std::isinf(t) ? 0.0 : 1.0 / t; };
  RateSet r{inv(tau12), inv(tau21), inv(tau23), inv(tau31)};
  r.validate();
  return r;
}

void EnsembleConfig::validate() const {
  if (n_emitters < 1) throw Error(ErrorKind::InvalidArgument, "n_emitters must be >= 1");
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorKind::InvalidArgument, "rho out of [0,1]");
}

DerivedParams derived_params(const RateSet& r) {
  r.validate();
  const double g1 = r.k12 + r.k21;
  if (!(g1 > 0.0)) throw Error(ErrorKind::DegenerateRates, "k12 + k21 = 0");
  const double shelving = r.k12 * r.k23;
  if (shelving > 0.0 && r.k31 == 0.0) {
    throw Error(ErrorKind::DegenerateRates, "k31 = 0 with k12*k23 > 0: beta diverges");
  }
  DerivedParams dp;
  dp.gamma1 = g1;
  dp.gamma2 = r.k31 + shelving / g1;
  dp.beta_excess = shelving > 0.0 ? shelving / (r.k31 * g1) : 0.0;
  dp.beta = 1.0 + dp.beta_excess;
  return dp;
}

DerivedParams exact_params(const RateSet& r) {
  r.validate();
  if (r.k23 == 0.0) {
    // Level 3 is unreachable; the k31 mode carries zero weight.
    return {r.k12 + r.k21, r.k31, 1.0};
  }
  if (r.k31 == 0.0) {
    throw Error(ErrorKind::DegenerateRates, "k31 = 0 with k23 > 0: shelving is absorbing");
  }
  const double s = r.k12 + r.k21 + r.k23 + r.k31;
  const double p = r.k12 * r.k23 + r.k31 * (r.k12 + r.k21 + r.k23);
  const double disc = s * s - 4.0 * p;
  if (!(disc > 0.0)) {
    throw Error(ErrorKind::DegenerateRates,
                "rate matrix has complex or repeated eigenvalues; g2 is not bi-exponential");
  }
  const double root = std::sqrt(disc);
  const double l1 = 0.5 * (s + root);
  const double l2 = p / l1;  // avoids cancellation in (s - root) / 2
  const double d = r.k12 + r.k21 + r.k23 + r.k12 * r.k23 / r.k31;
  return {l1, l2, (d - l2) / (l1 - l2)};
}

RateSet invert_rates(const DerivedParams& dp, double k12) {
  if (!(k12 > 0.0) || !(k12 < dp.gamma1)) {
    throw Error(ErrorKind::InvalidInversion, "require 0 < k12 < gamma1");
  }
  if (!(dp.beta >= 1.0)) throw Error(ErrorKind::InvalidInversion, "beta < 1");
  if (!(dp.gamma2 > 0.0)) throw Error(ErrorKind::InvalidInversion, "gamma2 must be positive");
  RateSet r;
  r.k12 = k12;
  r.k21 = dp.gamma1 - k12;
  r.k31 = dp.gamma2 / dp.beta;
  r.k23 = dp.gamma1 * dp.gamma2 * dp.excess() / (dp.beta * k12);
  return r;
}

RateSet invert_rates_exact(const DerivedParams& dp, double k12) {
  if (!(k12 > 0.0) || !(k12 < dp.gamma1 + dp.gamma2)) {
    throw Error(ErrorKind::InvalidInversion, "require 0 < k12 < gamma1 + gamma2");
  }
  if (!(dp.gamma2 > 0.0)) throw Error(ErrorKind::InvalidInversion, "gamma2 must be positive");
  const double s = dp.gamma1 + dp.gamma2;
  const double p = dp.gamma1 * dp.gamma2;
  const double d = dp.beta * dp.gamma1 - dp.excess() * dp.gamma2;
  if (!(d > 0.0)) throw Error(ErrorKind::InvalidInversion, "shape parameters give a non-positive excited population");
  RateSet r;
  r.k12 = k12;
  r.k31 = p / d;
  const double radiative_plus_shelving = s - k12 - r.k31;
  r.k23 = (p - r.k31 * (k12 + radiative_plus_shelving)) / k12;
  if (std::abs(r.k23) <= 1e-14 * s) r.k23 = 0.0;
  r.k21 = radiative_plus_shelving - r.k23;
  if (!(r.k21 > 0.0) || !(r.k23 >= 0.0) || !(r.k31 > 0.0)) {
    throw Error(ErrorKind::InvalidInversion,
                "shape parameters are not reachable by a three-level system with this k12");
  }
  return r;
}

double g2_model(double tau, const DerivedParams& dp, const EnsembleConfig& cfg) {
  const double t = std::abs(tau);
  const double e1 = std::exp(-dp.gamma1 * t);
  const double shape = e1 + dp.excess() * (e1 - std::exp(-dp.gamma2 * t));
  return 1.0 - shape * cfg.rho * cfg.rho / cfg.n_emitters;
}

double g2_zero(const EnsembleConfig& cfg) {
  cfg.validate();
  return 1.0 - cfg.rho * cfg.rho / cfg.n_emitters;
}

double quantum_yield(const RateSet& r) {
  const double total = r.k21 + r.k23;
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateRates, "k21 + k23 = 0");
  return r.k21 / total;
}

Populations steady_state(const RateSet& r) {
  r.validate();
  Eigen::Matrix3d a = rate_matrix(r);
  a.row(2).setOnes();  // replace one balance equation by normalization
  Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
  lu.setThreshold(1e-14);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularSystem, "rate matrix has no unique stationary distribution");
  }
  const Eigen::Vector3d p = lu.solve(Eigen::Vector3d(0.0, 0.0, 1.0));
  Populations out{std::clamp(p(0), 0.0, 1.0), std::clamp(p(1), 0.0, 1.0), std::clamp(p(2), 0.0, 1.0)};
  const double sum = out.p1 + out.p2 + out.p3;
  out.p1 /= sum;
  out.p2 /= sum;
  out.p3 /= sum;
  return out;
}

double photon_rate(const RateSet& r) { return r.k21 * steady_state(r).p2; }

std::vector<double> conditional_intensity(const RateSet& r, std::span<const double> tau_grid,
                                          double rel_tol) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 3>;

  if (tau_grid.empty()) return {};
  if (tau_grid.front() < 0.0 || !std::is_sorted(tau_grid.begin(), tau_grid.end())) {
    throw Error(ErrorKind::InvalidArgument, "tau grid must be sorted and non-negative");
  }
  const double p2_ss = steady_state(r).p2;
  if (!(p2_ss > 0.0)) throw Error(ErrorKind::DegenerateRates, "no stationary emission (p2 = 0)");

  auto system = [&r](const State& p, State& dpdt, double /*t*/) {
    dpdt[0] = -r.k12 * p[0] + r.k21 * p[1] + r.k31 * p[2];
    dpdt[1] = r.k12 * p[0] - (r.k21 + r.k23) * p[1];
    dpdt[2] = r.k23 * p[1] - r.k31 * p[2];
  };

  std::vector<double> times;
  times.reserve(tau_grid.size() + 1);
  if (tau_grid.front() > 0.0) times.push_back(0.0);
  times.insert(times.end(), tau_grid.begin(), tau_grid.end());
  const std::size_t offset = times.size() - tau_grid.size();

  std::vector<double> out;
  out.reserve(times.size());
  State p{1.0, 0.0, 0.0};
  const double fastest = r.k12 + r.k21 + r.k23 + r.k31;
  const double dt0 = 1e-3 / std::max(fastest, 1e-12);
  try {
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(rel_tol * 1e-2, rel_tol);
    odeint::integrate_times(stepper, system, p, times.begin(), times.end(), dt0,
                            [&out](const State& x, double) { out.push_back(x[1]); },
                            odeint::max_step_checker(1'000'000));
  } catch (const std::runtime_error& e) {
    throw Error(ErrorKind::IntegrationFailure, e.what());
  }
  if (out.size() != times.size()) {
    throw Error(ErrorKind::IntegrationFailure, "integrator did not reach every grid point");
  }
  std::vector<double> g2(out.begin() + static_cast<std::ptrdiff_t>(offset), out.end());
  for (double& v : g2) v /= p2_ss;
  return g2;
}

}  // namespace g2sim
