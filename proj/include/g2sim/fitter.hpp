#pragma once

// Least-squares fit of
//
//   g2(tau) = 1 - (beta e^{-gamma1 |tau|} - (beta - 1) e^{-gamma2 |tau|}) c,   c = rho^2 / N
//
// to a correlation histogram, and conversion of the fitted shape into
// lifetimes and quantum yield.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "g2sim/correlator.hpp"
#include "g2sim/kinetics.hpp"

namespace g2sim {

struct ModelParams {
  double gamma1 = 0.1;  // 1/ns
  double gamma2 = 0.01;
  double beta = 2.0;
  double c = 0.1;

  Eigen::Vector4d vec() const { return {gamma1, gamma2, beta, c}; }
  static ModelParams from(const Eigen::Vector4d& v) { return {v(0), v(1), v(2), v(3)}; }
  DerivedParams shape() const { return {gamma1, gamma2, beta}; }
};

double model_value(const ModelParams& p, double tau);

// Partial derivatives with respect to (gamma1, gamma2, beta, c).
Eigen::Vector4d model_gradient(const ModelParams& p, double tau);

// Mean of the model over [tau - width/2, tau + width/2]; width <= 0 is a point sample.
double model_value(const ModelParams& p, double tau, double width);
Eigen::Vector4d model_gradient(const ModelParams& p, double tau, double width);

struct FitConfig {
  std::optional<ModelParams> initial;  // heuristics when empty
  ModelParams lower{1e-6, 0.0, 1.0, 0.0};
  ModelParams upper{100.0, 100.0, 1e3, 1.0};
  int max_iterations = 500;
  double gradient_tolerance = 1e-12;
  double step_tolerance = 1e-12;

  void validate() const;
};

enum class FitStatus { Converged, NonConvergence, SingularJacobian };

const char* to_string(FitStatus status);

struct FitResult {
  ModelParams params;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();
  double chi2 = 0.0;
  double chi2_reduced = 0.0;
  int n_points = 0;
  int n_iterations = 0;
  bool converged = false;
  bool non_identifiable = false;
  FitStatus status = FitStatus::NonConvergence;
  std::vector<double> chi2_history;  // objective after each accepted step
  std::vector<std::string> diagnostics;

  double sigma(int i) const;
};

// Samples with lag in ns; sigma must be positive. With width (ns) set, each
// sample is compared with the model averaged over its bin.
struct FitData {
  std::vector<double> tau;
  std::vector<double> g2;
  std::vector<double> sigma;
  std::vector<double> width;  // empty: point samples
};

// Bins with counts > 0, lags as bin centres, widths as the bin extents.
FitData fit_data_from(const CorrelationHistogram& hist);

ModelParams initial_guess(const FitData& data);

FitResult fit_g2(const FitData& data, const FitConfig& cfg = {});
FitResult fit_g2(const CorrelationHistogram& hist, const FitConfig& cfg = {});

// Max column-normalized deviation between the analytic Jacobian and central
// finite differences with relative step h.
double jacobian_check(const ModelParams& params, std::span<const double> tau_grid, double h = 1e-6,
                      std::span<const double> widths = {});

enum class InversionModel { Approximate, Exact };

const char* to_string(InversionModel model);
InversionModel parse_inversion_model(const std::string& name);

RateSet invert(const DerivedParams& dp, double k12, InversionModel model);
DerivedParams forward(const RateSet& rates, InversionModel model);

struct Quantity {
  double value = 0.0;
  double sigma = 0.0;
};

struct PhotophysicsReport {
  Quantity tau12, tau21, tau23, tau31;  // ns
  Quantity quantum_yield;               // fraction
  RateSet rates;
  bool no_shelving = false;             // beta == 1: tau23 infinite
  double emitters_estimate = 0.0;       // rho^2 / c
  InversionModel model = InversionModel::Exact;
};

PhotophysicsReport report_photophysics(const FitResult& fit, double k12, int n_emitters, double rho,
                                       InversionModel model = InversionModel::Approximate);

// Mean of each quantity over several per-curve reports; sigma is the
// standard error of the mean of the propagated values.
PhotophysicsReport mean_report(std::span<const PhotophysicsReport> reports);

struct DipWidthReport {
  double gamma1_glass = 0.0;
  double gamma1_silver = 0.0;
  bool silver_narrower = false;
  double tau21_ratio = 0.0;  // tau21(glass) / tau21(silver)
};

DipWidthReport dip_width_compare(const PhotophysicsReport& glass, const PhotophysicsReport& silver,
                                 const FitResult& fit_glass, const FitResult& fit_silver);

// Plain-text table: Configuration, tau21, tau12, tau23, tau31 (ns), Q (%).
std::string render_table(std::span<const std::pair<std::string, PhotophysicsReport>> rows);

}  // namespace g2sim
