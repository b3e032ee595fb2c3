#include "g2sim/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include <Eigen/Dense>

#include "g2sim/errors.hpp"

namespace g2sim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::Vector4d project(Eigen::Vector4d p, const FitConfig& cfg) {
  const Eigen::Vector4d lo = cfg.lower.vec();
  const Eigen::Vector4d hi = cfg.upper.vec();
  p = p.cwiseMax(lo).cwiseMin(hi);
  // gamma1 is the fast constant
  if (p(1) > p(0)) p(1) = p(0);
  return p;
}

struct Linearization {
  Eigen::VectorXd residual;  // (model - data) / sigma
  Eigen::MatrixXd jacobian;  // d residual / d params
  double chi2 = 0.0;
};

Linearization linearize(const FitData& d, const Eigen::Vector4d& p, bool with_jacobian) {
  const auto mp = ModelParams::from(p);
  const Eigen::Index n = static_cast<Eigen::Index>(d.tau.size());
  Linearization lin;
  lin.residual.resize(n);
  if (with_jacobian) lin.jacobian.resize(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double w = 1.0 / d.sigma[k];
    const double width = d.width.empty() ? 0.0 : d.width[k];
    lin.residual(i) = (model_value(mp, d.tau[k], width) - d.g2[k]) * w;
    if (with_jacobian) lin.jacobian.row(i) = model_gradient(mp, d.tau[k], width).transpose() * w;
  }
  lin.chi2 = lin.residual.squaredNorm();
  return lin;
}

// Components pinned at a bound with the gradient pushing outward do not count
// toward the stationarity test.
double projected_gradient_norm(const Eigen::Vector4d& g, const Eigen::Vector4d& p, const FitConfig& cfg) {
  const Eigen::Vector4d lo = cfg.lower.vec();
  const Eigen::Vector4d hi = cfg.upper.vec();
  double norm = 0.0;
  for (int i = 0; i < 4; ++i) {
    const bool at_lo = p(i) <= lo(i) && g(i) > 0.0;
    const bool at_hi = p(i) >= hi(i) && g(i) < 0.0;
    if (!at_lo && !at_hi) norm = std::max(norm, std::abs(g(i)));
  }
  return norm;
}

double relative_step(const Eigen::Vector4d& step, const Eigen::Vector4d& p) {
  double r = 0.0;
  for (int i = 0; i < 4; ++i) r = std::max(r, std::abs(step(i)) / (std::abs(p(i)) + 1e-12));
  return r;
}

struct ExpMoments {
  double e = 0.0;  // integral of exp(-g t)
  double t = 0.0;  // integral of t exp(-g t)
};

// Integrals over [a, a + len], a >= 0.
ExpMoments exp_moments(double g, double a, double len) {
  const double ea = std::exp(-g * a);
  const double x = g * len;
  double i0 = 0.0;
  double j = 0.0;  // integral of s exp(-g s) over [0, len]
  if (x < 0.5) {
    double term = 1.0;
    for (int n = 0; n < 20; ++n) {
      i0 += term / (n + 1);
      j += term / (n + 2);
      term *= -x / (n + 1);
    }
    i0 *= len;
    j *= len * len;
  } else {
    i0 = -std::expm1(-x) / g;
    j = (1.0 - std::exp(-x) * (1.0 + x)) / (g * g);
  }
  return {ea * i0, ea * (a * i0 + j)};
}

// Means of exp(-g|t|) and |t| exp(-g|t|) over [lo, hi].
ExpMoments mean_moments(double g, double lo, double hi) {
  ExpMoments m;
  if (lo >= 0.0) {
    m = exp_moments(g, lo, hi - lo);
  } else if (hi <= 0.0) {
    m = exp_moments(g, -hi, hi - lo);
  } else {
    const ExpMoments l = exp_moments(g, 0.0, -lo);
    const ExpMoments r = exp_moments(g, 0.0, hi);
    m = {l.e + r.e, l.t + r.t};
  }
  return {m.e / (hi - lo), m.t / (hi - lo)};
}

double lifetime(double k) { return k > 0.0 ? 1.0 / k : kInf; }

std::array<double, 4> photophysics_vector(const DerivedParams& dp, double k12, InversionModel model) {
  const RateSet r = invert(dp, k12, model);
  return {lifetime(r.k21), lifetime(r.k23), lifetime(r.k31), quantum_yield(r)};
}

}  // namespace

double model_value(const ModelParams& p, double tau) {
  const double t = std::abs(tau);
  return 1.0 - (p.beta * std::exp(-p.gamma1 * t) - (p.beta - 1.0) * std::exp(-p.gamma2 * t)) * p.c;
}

Eigen::Vector4d model_gradient(const ModelParams& p, double tau) {
  const double t = std::abs(tau);
  const double e1 = std::exp(-p.gamma1 * t);
  const double e2 = std::exp(-p.gamma2 * t);
  return {p.c * p.beta * t * e1, -p.c * (p.beta - 1.0) * t * e2, -p.c * (e1 - e2),
          -(p.beta * e1 - (p.beta - 1.0) * e2)};
}

double model_value(const ModelParams& p, double tau, double width) {
  if (!(width > 0.0)) return model_value(p, tau);
  const ExpMoments m1 = mean_moments(p.gamma1, tau - 0.5 * width, tau + 0.5 * width);
  const ExpMoments m2 = mean_moments(p.gamma2, tau - 0.5 * width, tau + 0.5 * width);
  return 1.0 - (m1.e + (p.beta - 1.0) * (m1.e - m2.e)) * p.c;
}

Eigen::Vector4d model_gradient(const ModelParams& p, double tau, double width) {
  if (!(width > 0.0)) return model_gradient(p, tau);
  const ExpMoments m1 = mean_moments(p.gamma1, tau - 0.5 * width, tau + 0.5 * width);
  const ExpMoments m2 = mean_moments(p.gamma2, tau - 0.5 * width, tau + 0.5 * width);
  return {p.c * p.beta * m1.t, -p.c * (p.beta - 1.0) * m2.t, -p.c * (m1.e - m2.e),
          -(p.beta * m1.e - (p.beta - 1.0) * m2.e)};
}

void FitConfig::validate() const {
  const Eigen::Vector4d lo = lower.vec();
  const Eigen::Vector4d hi = upper.vec();
  if ((lo.array() > hi.array()).any()) throw Error(ErrorKind::InvalidArgument, "fit bounds have lo > hi");
  if (initial) {
    const Eigen::Vector4d p = initial->vec();
    if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) {
      throw Error(ErrorKind::InvalidArgument, "initial fit parameters outside bounds");
    }
  }
  if (!(gradient_tolerance > 0.0) || !(step_tolerance > 0.0) || max_iterations < 1) {
    throw Error(ErrorKind::InvalidArgument, "fit tolerances and iteration limit must be positive");
  }
}

const char* to_string(FitStatus status) {
  switch (status) {
    case FitStatus::Converged: return "Converged";
    case FitStatus::NonConvergence: return "NonConvergence";
    case FitStatus::SingularJacobian: return "SingularJacobian";
  }
  return "Unknown";
}

double FitResult::sigma(int i) const { return std::sqrt(std::max(0.0, covariance(i, i))); }

FitData fit_data_from(const CorrelationHistogram& hist) {
  FitData d;
  for (std::size_t i = 0; i < hist.n_bins(); ++i) {
    if (hist.counts[i] == 0 || !(hist.sigma[i] > 0.0)) continue;
    const auto k = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(hist.n_bins() / 2);
    d.tau.push_back(hist.lag_ns(i));
    d.g2.push_back(hist.g2[i]);
    d.sigma.push_back(hist.sigma[i]);
    d.width.push_back(static_cast<double>(bin_span(k, hist.bin_width)) * 1e-3);
  }
  return d;
}

ModelParams initial_guess(const FitData& data) {
  // Fold both sides onto |tau| and average coincident lags.
  std::map<double, std::pair<double, int>> folded;
  for (std::size_t i = 0; i < data.tau.size(); ++i) {
    auto& slot = folded[std::abs(data.tau[i])];
    slot.first += data.g2[i];
    slot.second += 1;
  }
  double g_min = kInf;
  for (const auto& [t, s] : folded) g_min = std::min(g_min, s.first / s.second);

  ModelParams p;
  p.c = std::clamp(1.0 - g_min, 1e-3, 1.0);
  const double half_level = 1.0 - 0.5 * p.c;
  double tau_half = 0.0;
  for (const auto& [t, s] : folded) {
    if (t > 0.0 && s.first / s.second >= half_level) {
      tau_half = t;
      break;
    }
  }
  if (!(tau_half > 0.0)) tau_half = folded.empty() ? 1.0 : 0.1 * folded.rbegin()->first;
  p.gamma1 = std::log(2.0) / tau_half;
  p.gamma2 = p.gamma1 / 10.0;
  p.beta = 2.0;
  return p;
}

FitResult fit_g2(const FitData& data, const FitConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.tau.size();
  if (n < 8) throw Error(ErrorKind::InvalidArgument, "need at least 8 populated bins to fit");
  if (data.g2.size() != n || data.sigma.size() != n || (!data.width.empty() && data.width.size() != n)) {
    throw Error(ErrorKind::InvalidArgument, "fit data columns differ in length");
  }
  for (double s : data.sigma) {
    if (!(s > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive on fitted bins");
  }

  FitResult result;
  result.n_points = static_cast<int>(n);
  Eigen::Vector4d p = project(cfg.initial.value_or(initial_guess(data)).vec(), cfg);
  Linearization lin = linearize(data, p, true);
  double lambda = 1e-3;
  result.chi2_history.push_back(lin.chi2);

  bool done = false;
  int iter = 0;
  for (; iter < cfg.max_iterations && !done; ++iter) {
    const Eigen::Matrix4d a = lin.jacobian.transpose() * lin.jacobian;
    const Eigen::Vector4d g = lin.jacobian.transpose() * lin.residual;
    if (projected_gradient_norm(g, p, cfg) <= cfg.gradient_tolerance * std::max(1.0, lin.chi2)) {
      result.diagnostics.emplace_back("gradient tolerance reached");
      done = true;
      break;
    }
    const double diag_max = a.diagonal().maxCoeff();
    if (!(diag_max > 0.0)) {
      result.status = FitStatus::SingularJacobian;
      result.diagnostics.emplace_back("Jacobian vanishes at the current parameters");
      result.params = ModelParams::from(p);
      result.chi2 = lin.chi2;
      result.n_iterations = iter;
      return result;
    }
    const Eigen::Vector4d scale = a.diagonal().cwiseMax(1e-12 * diag_max);

    while (true) {
      Eigen::Matrix4d damped = a;
      damped.diagonal() += lambda * scale;
      const Eigen::Vector4d delta = damped.ldlt().solve(-g);
      const Eigen::Vector4d trial = project(p + delta, cfg);
      const Eigen::Vector4d step = trial - p;
      if (relative_step(step, p) < cfg.step_tolerance) {
        result.diagnostics.emplace_back("step tolerance reached");
        done = true;
        break;
      }
      Linearization next = linearize(data, trial, false);
      if (next.chi2 < lin.chi2) {
        p = trial;
        lin = linearize(data, p, true);
        result.chi2_history.push_back(lin.chi2);
        lambda = std::max(lambda / 10.0, 1e-15);
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e20) {
        result.diagnostics.emplace_back("no further decrease possible");
        done = true;
        break;
      }
    }
  }

  result.params = ModelParams::from(p);
  result.chi2 = lin.chi2;
  result.n_iterations = iter;
  result.chi2_reduced = n > 4 ? lin.chi2 / static_cast<double>(n - 4) : 0.0;
  result.converged = done;
  result.status = done ? FitStatus::Converged : FitStatus::NonConvergence;
  if (!done) result.diagnostics.emplace_back("iteration limit reached");

  // Covariance from the curvature at the optimum; pseudo-inverse when rank deficient.
  const Eigen::Matrix4d a = lin.jacobian.transpose() * lin.jacobian;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(a);
  const Eigen::Vector4d ev = eig.eigenvalues();
  const double ev_max = ev.maxCoeff();
  Eigen::Vector4d inv = Eigen::Vector4d::Zero();
  bool rank_deficient = !(ev_max > 0.0);
  for (int i = 0; i < 4; ++i) {
    if (ev(i) > 1e-13 * ev_max) {
      inv(i) = 1.0 / ev(i);
    } else {
      rank_deficient = true;
    }
  }
  result.covariance = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  if (rank_deficient) {
    result.non_identifiable = true;
    result.diagnostics.emplace_back("NonIdentifiable: curvature matrix is rank deficient");
  }
  if (!(result.params.c > 3.0 * result.sigma(3))) {
    result.non_identifiable = true;
    result.diagnostics.emplace_back("NonIdentifiable: dip amplitude c is not significant");
  }
  return result;
}

FitResult fit_g2(const CorrelationHistogram& hist, const FitConfig& cfg) { return fit_g2(fit_data_from(hist), cfg); }

double jacobian_check(const ModelParams& params, std::span<const double> tau_grid, double h,
                      std::span<const double> widths) {
  if (tau_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty tau grid");
  if (!widths.empty() && widths.size() != tau_grid.size()) {
    throw Error(ErrorKind::InvalidArgument, "widths and tau grid differ in length");
  }
  const Eigen::Vector4d p = params.vec();
  double worst = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double step = h * (p(j) != 0.0 ? std::abs(p(j)) : 1.0);
    Eigen::Vector4d up = p;
    Eigen::Vector4d down = p;
    up(j) += step;
    down(j) -= step;
    double col_max = 0.0;
    double col_dev = 0.0;
    for (std::size_t i = 0; i < tau_grid.size(); ++i) {
      const double t = tau_grid[i];
      const double w = widths.empty() ? 0.0 : widths[i];
      const double analytic = model_gradient(params, t, w)(j);
      const double numeric =
          (model_value(ModelParams::from(up), t, w) - model_value(ModelParams::from(down), t, w)) / (2.0 * step);
      col_max = std::max(col_max, std::abs(analytic));
      col_dev = std::max(col_dev, std::abs(analytic - numeric));
    }
    worst = std::max(worst, col_max > 0.0 ? col_dev / col_max : col_dev);
  }
  return worst;
}

const char* to_string(InversionModel model) {
  return model == InversionModel::Exact ? "exact" : "approximate";
}

InversionModel parse_inversion_model(const std::string& name) {
  if (name == "exact") return InversionModel::Exact;
  if (name == "approximate" || name == "approx") return InversionModel::Approximate;
  throw Error(ErrorKind::InvalidArgument, "unknown inversion model '" + name + "'");
}

RateSet invert(const DerivedParams& dp, double k12, InversionModel model) {
  return model == InversionModel::Exact ? invert_rates_exact(dp, k12) : invert_rates(dp, k12);
}

DerivedParams forward(const RateSet& rates, InversionModel model) {
  return model == InversionModel::Exact ? exact_params(rates) : derived_params(rates);
}

PhotophysicsReport report_photophysics(const FitResult& fit, double k12, int n_emitters, double rho,
                                       InversionModel model) {
  EnsembleConfig{n_emitters, rho}.validate();
  const DerivedParams dp = fit.params.shape();
  PhotophysicsReport rep;
  rep.model = model;
  rep.rates = invert(dp, k12, model);
  rep.no_shelving = rep.rates.k23 == 0.0;
  rep.tau12 = {1.0 / k12, 0.0};
  rep.emitters_estimate = fit.params.c > 0.0 ? rho * rho / fit.params.c : kInf;

  const auto centre = photophysics_vector(dp, k12, model);
  // Delta method over (gamma1, gamma2, beta); one-sided where a central
  // difference would leave the invertible region.
  Eigen::Matrix<double, 4, 3> jac = Eigen::Matrix<double, 4, 3>::Zero();
  const std::array<double, 3> base{dp.gamma1, dp.gamma2, dp.beta};
  for (int j = 0; j < 3; ++j) {
    const double step = 1e-6 * std::max(std::abs(base[static_cast<std::size_t>(j)]), 1e-9);
    auto shifted = [&](double s) {
      std::array<double, 3> v = base;
      v[static_cast<std::size_t>(j)] += s;
      return photophysics_vector({v[0], v[1], v[2]}, k12, model);
    };
    std::array<double, 4> hi{}, lo{};
    double span = 2.0 * step;
    try {
      hi = shifted(step);
    } catch (const Error&) {
      hi = centre;
      span = step;
    }
    try {
      lo = shifted(-step);
    } catch (const Error&) {
      lo = centre;
      span -= step;
    }
    for (int i = 0; i < 4; ++i) {
      const double d = hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
      jac(i, j) = span > 0.0 && std::isfinite(d) ? d / span : 0.0;
    }
  }
  const Eigen::Matrix3d cov = fit.covariance.topLeftCorner<3, 3>();
  const Eigen::Matrix4d out_cov = jac * cov * jac.transpose();
  auto q = [&](int i) {
    return Quantity{centre[static_cast<std::size_t>(i)], std::sqrt(std::max(0.0, out_cov(i, i)))};
  };
  rep.tau21 = q(0);
  rep.tau23 = rep.no_shelving ? Quantity{kInf, kInf} : q(1);
  rep.tau31 = q(2);
  rep.quantum_yield = q(3);
  return rep;
}

PhotophysicsReport mean_report(std::span<const PhotophysicsReport> reports) {
  if (reports.empty()) throw Error(ErrorKind::InvalidArgument, "no reports to average");
  const double n = static_cast<double>(reports.size());
  auto mean = [&](auto member) {
    Quantity out;
    double var = 0.0;
    for (const auto& r : reports) {
      out.value += (r.*member).value / n;
      var += (r.*member).sigma * (r.*member).sigma;
    }
    out.sigma = std::sqrt(var) / n;
    return out;
  };
  PhotophysicsReport m;
  m.model = reports.front().model;
  m.tau12 = mean(&PhotophysicsReport::tau12);
  m.tau21 = mean(&PhotophysicsReport::tau21);
  m.tau23 = mean(&PhotophysicsReport::tau23);
  m.tau31 = mean(&PhotophysicsReport::tau31);
  m.quantum_yield = mean(&PhotophysicsReport::quantum_yield);
  m.no_shelving = std::isinf(m.tau23.value);
  for (const auto& r : reports) m.emitters_estimate += r.emitters_estimate / n;
  m.rates = RateSet{1.0 / m.tau12.value, 1.0 / m.tau21.value, m.no_shelving ? 0.0 : 1.0 / m.tau23.value,
                    1.0 / m.tau31.value};
  return m;
}

DipWidthReport dip_width_compare(const PhotophysicsReport& glass, const PhotophysicsReport& silver,
                                 const FitResult& fit_glass, const FitResult& fit_silver) {
  DipWidthReport rep;
  rep.gamma1_glass = fit_glass.params.gamma1;
  rep.gamma1_silver = fit_silver.params.gamma1;
  rep.silver_narrower = rep.gamma1_silver > rep.gamma1_glass;
  rep.tau21_ratio = glass.tau21.value / silver.tau21.value;
  return rep;
}

std::string render_table(std::span<const std::pair<std::string, PhotophysicsReport>> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-24s %10s %10s %10s %10s %8s\n", "Configuration", "tau21(ns)", "tau12(ns)",
                "tau23(ns)", "tau31(ns)", "Q(%)");
  out += line;
  for (const auto& [label, r] : rows) {
    char tau23[32];
    if (r.no_shelving) {
      std::snprintf(tau23, sizeof tau23, "%s", "inf");
    } else {
      std::snprintf(tau23, sizeof tau23, "%.1f", r.tau23.value);
    }
    std::snprintf(line, sizeof line, "%-24s %10.1f %10.1f %10s %10.1f %8.0f\n", label.c_str(), r.tau21.value,
                  r.tau12.value, tau23, r.tau31.value, 100.0 * r.quantum_yield.value);
    out += line;
  }
  return out;
}

}  // namespace g2sim
