// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "g2sim/errors.hpp"
#include "g2sim/fitter.hpp"
#include "g2sim/io.hpp"
#include "g2sim/kinetics.hpp"
#include "g2sim/optics.hpp"
#include "g2sim/pipeline.hpp"
#include "g2sim/presets.hpp"
#include "g2sim/scenario.hpp"

using namespace g2sim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Log {
 public:
  void check(bool ok, const std::string& what) {
    pass_ = pass_ && ok;
    lines_.push_back((ok ? "ok   " : "FAIL ") + what);
  }
  Outcome outcome(std::string summary) const { return {pass_, std::move(summary)}; }
  const std::vector<std::string>& lines() const { return lines_; }
  bool pass() const { return pass_; }

 private:
  bool pass_ = true;
  std::vector<std::string> lines_;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario ideal_scenario(const std::string& preset, ScenarioKind kind, int n, double duration, std::uint64_t seed) {
  Scenario s = make_scenario(preset, kind, n, FiberConfig::AB, duration, seed);
  s.detection = DetectionMode::Ideal;
  s.budget = ideal_budget();
  return s;
}

double fitted_dip_minimum(const ModelParams& p, double window_ns) {
  double lo = model_value(p, 0.0);
  for (double t = 0.01; t <= window_ns; t += 0.01) lo = std::min(lo, model_value(p, t));
  return lo;
}

// 1. g2(0) = 1 - 1/N for ideal detection.
Outcome antibunching_law(Log& log) {
  std::string summary;
  for (int n : {1, 2, 5, 10}) {
    const auto t0 = std::chrono::steady_clock::now();
    const Scenario s = ideal_scenario("silver", ScenarioKind::SilverFiltered, n, 1e7, 100 + n);
    const PipelineResult r = run_pipeline(s);
    const double g0 = fitted_dip_minimum(r.fit.params, 150.0);
    const double secs = seconds_since(t0);
    const double target = 1.0 - 1.0 / n;
    log.check(std::abs(g0 - target) <= 0.03,
              fmt("N=%d: g2(0) = %.4f (target %.4f, tol 0.03), raw centre bin %.4f", n, g0, target,
                  r.histogram.g2[r.histogram.n_bins() / 2]));
    log.check(secs < 30.0, fmt("N=%d runtime %.1f s < 30 s", n, secs));
    summary += fmt("%sN=%d: %.3f", summary.empty() ? "" : ", ", n, g0);
  }
  return log.outcome(summary);
}

std::string lifetimes(const PhotophysicsReport& r) {
  return fmt("tau21=%.2f tau23=%.2f tau31=%.1f ns Q=%.1f%%", r.tau21.value, r.tau23.value, r.tau31.value,
             100.0 * r.quantum_yield.value);
}

// 2. Lifetime table round trip for both presets.
Outcome table_round_trip(Log& log) {
  std::string summary;
  struct Case {
    const LifetimePreset* preset;
    ScenarioKind kind;
    double duration;
  };
  for (const Case& c : {Case{&kSilverPreset, ScenarioKind::SilverFiltered, 2e8},
                        Case{&kGlassPreset, ScenarioKind::Glass, 3e9}}) {
    const auto t0 = std::chrono::steady_clock::now();
    Scenario s = ideal_scenario(std::string(c.preset->key), c.kind, 10, c.duration, 2024);
    s.k12_fit = 1.0 / c.preset->tau12;
    const PipelineResult r = run_pipeline(s);
    const double secs = seconds_since(t0);
    const std::string name(c.preset->key);
    if (!r.report) {
      log.check(false, name + ": no report: " + r.report_error);
      continue;
    }
    const PhotophysicsReport& rep = *r.report;
    auto within = [&](const char* what, double got, double want) {
      log.check(std::abs(got - want) <= 0.15 * want, fmt("%s %s = %.2f ns (table %.1f, tol 15%%)", name.c_str(), what,
                                                          got, want));
    };
    within("tau21", rep.tau21.value, c.preset->tau21);
    within("tau23", rep.tau23.value, c.preset->tau23);
    within("tau31", rep.tau31.value, c.preset->tau31);
    const double q = 100.0 * rep.quantum_yield.value;
    log.check(std::abs(q - c.preset->quantum_yield_percent) <= 5.0,
              fmt("%s Q = %.1f%% (table %.0f, tol 5 points)", name.c_str(), q, c.preset->quantum_yield_percent));
    log.check(secs < 60.0, fmt("%s runtime %.1f s < 60 s", name.c_str(), secs));
    try {
      const PhotophysicsReport approx =
          report_photophysics(r.fit, s.k12_fit, 10, 1.0, InversionModel::Approximate);
      log.check(true, name + " (info) approximate-map inversion of the same fit: " + lifetimes(approx));
    } catch (const Error& e) {
      log.check(true, name + " (info) approximate-map inversion failed: " + e.what());
    }
    summary += (summary.empty() ? "" : "; ") + name + ": " + lifetimes(rep);
  }
  return log.outcome(summary);
}

// 3. tau21(glass) / tau21(silver) = 6.2 +- 1.0 for every seed.
Outcome dip_narrowing(Log& log) {
  std::vector<double> ratios;
  for (int seed = 1; seed <= 10; ++seed) {
    const PipelineResult silver = run_pipeline(ideal_scenario("silver", ScenarioKind::SilverFiltered, 10, 3e7, 300 + seed));
    const PipelineResult glass = run_pipeline(ideal_scenario("glass", ScenarioKind::Glass, 10, 1.5e9, 400 + seed));
    if (!silver.report || !glass.report) {
      log.check(false, fmt("seed %d: inversion failed (%s%s)", seed, silver.report_error.c_str(),
                           glass.report_error.c_str()));
      continue;
    }
    const DipWidthReport d = dip_width_compare(*glass.report, *silver.report, glass.fit, silver.fit);
    ratios.push_back(d.tau21_ratio);
    log.check(d.silver_narrower && std::abs(d.tau21_ratio - 6.2) <= 1.0,
              fmt("seed %d: gamma1 glass %.4f < silver %.4f /ns; tau21 %.2f / %.2f ns = %.2f", seed, d.gamma1_glass,
                  d.gamma1_silver, glass.report->tau21.value, silver.report->tau21.value, d.tau21_ratio));
  }
  if (ratios.empty()) return log.outcome("no ratios");
  const double m = testing::mean(ratios);
  const double sd = ratios.size() > 1 ? testing::stddev(ratios) : 0.0;
  log.check(std::abs(m - 6.2) <= 1.0, fmt("mean ratio %.2f (sd %.2f over %zu seeds)", m, sd, ratios.size()));
  return log.outcome(fmt("ratio %.2f +- %.2f (sd), range [%.2f, %.2f]", m, sd,
                         *std::min_element(ratios.begin(), ratios.end()),
                         *std::max_element(ratios.begin(), ratios.end())));
}

// 4. Single-emitter histogram vs the ODE oracle, and the two-level closed form.
Outcome oracle_equivalence(Log& log) {
  const RateSet rates = kSilverPreset.rates();
  const Scenario s = ideal_scenario("silver", ScenarioKind::SilverFiltered, 1, 1e8, 44);
  const DetectionRecord rec = simulate_detection(s);
  const CorrelationHistogram h = correlate_channels(rec.tags, s.window_ps, s.bin_width_ps);
  std::vector<double> centres, widths;
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    const std::int64_t k = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(h.n_bins() / 2);
    centres.push_back(h.lag_ns(i));
    widths.push_back(static_cast<double>(bin_span(k, h.bin_width)) * 1e-3);
  }
  const auto oracle = testing::bin_averaged_oracle(rates, centres, widths);
  std::size_t within = 0;
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    if (std::abs(h.g2[i] - oracle[i]) <= 3.0 * h.sigma[i]) ++within;
  }
  const double frac = static_cast<double>(within) / static_cast<double>(h.n_bins());
  log.check(frac >= 0.95, fmt("N=1 silver, 1e8 ns: %zu/%zu bins within 3 sigma of the ODE oracle (%.1f%%)", within,
                              h.n_bins(), 100.0 * frac));

  const RateSet two_level{0.08, 0.12, 0.0, 0.01};
  const DerivedParams dp = derived_params(two_level);
  std::vector<double> grid;
  for (double t = 0.0; t <= 10.0 / dp.gamma1; t += 0.05) grid.push_back(t);
  const auto ode = conditional_intensity(two_level, grid);
  double worst = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) worst = std::max(worst, std::abs(ode[i] - g2_model(grid[i], dp, {1, 1.0})));
  log.check(worst < 1e-6, fmt("k23 = 0: closed form vs ODE max deviation %.2e on [0, 10/gamma1]", worst));
  return log.outcome(fmt("%.1f%% of bins within 3 sigma; two-level deviation %.1e", 100.0 * frac, worst));
}

// 5. Exact identities.
Outcome exact_properties(Log& log) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> logu(std::log(1e-3), 0.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const RateSet r{std::exp(logu(gen)), std::exp(logu(gen)), std::exp(logu(gen)), std::exp(logu(gen))};
    const RateSet b = invert_rates(derived_params(r), r.k12);
    worst = std::max({worst, std::abs(b.k21 - r.k21) / r.k21, std::abs(b.k23 - r.k23) / r.k23,
                      std::abs(b.k31 - r.k31) / r.k31});
  }
  for (const auto& p : {kSilverPreset, kGlassPreset}) {
    const RateSet r = p.rates();
    const RateSet b = invert_rates(derived_params(r), r.k12);
    worst = std::max({worst, std::abs(b.k21 - r.k21) / r.k21, std::abs(b.k23 - r.k23) / r.k23,
                      std::abs(b.k31 - r.k31) / r.k31});
  }
  log.check(worst <= 1e-12, fmt("invert_rates(derived_params(r)) max relative error %.2e over 10002 rate sets", worst));

  // Brute-force pair counting on simulated streams of 1e3 tags.
  const Scenario s = ideal_scenario("silver", ScenarioKind::SilverFiltered, 10, 2e5, 55);
  const DetectionRecord rec = simulate_detection(s);
  bool brute_ok = true;
  for (std::size_t offset : {std::size_t{0}, std::size_t{5000}}) {
    TimeTagStream a = rec.tags.a, b = rec.tags.b;
    if (a.tags.size() < offset + 1000 || b.tags.size() < offset + 1000) {
      brute_ok = false;
      continue;
    }
    a.tags.assign(rec.tags.a.tags.begin() + static_cast<std::ptrdiff_t>(offset),
                  rec.tags.a.tags.begin() + static_cast<std::ptrdiff_t>(offset + 1000));
    b.tags.assign(rec.tags.b.tags.begin() + static_cast<std::ptrdiff_t>(offset),
                  rec.tags.b.tags.begin() + static_cast<std::ptrdiff_t>(offset + 1000));
    for (std::int64_t bw : {1000, 250, 3}) {
      const std::int64_t lag_max = bw * 150;
      brute_ok = brute_ok && cross_correlate(a, b, lag_max, bw).counts ==
                                 testing::brute_force_pairs(a.tags, b.tags, lag_max, bw);
    }
  }
  log.check(brute_ok, "correlator equals brute-force pair counting on 1e3-tag streams (3 bin widths, 2 windows)");

  // Mirror identity on a full run.
  const Scenario big = ideal_scenario("silver", ScenarioKind::SilverFiltered, 10, 2e7, 56);
  const DetectionRecord full = simulate_detection(big);
  const auto ab = cross_correlate(full.tags.a, full.tags.b, big.window_ps, big.bin_width_ps);
  const auto ba = cross_correlate(full.tags.b, full.tags.a, big.window_ps, big.bin_width_ps);
  bool mirror_ok = true;
  std::string mirror_msg;
  try {
    const SymmetryReport rep = swap_symmetry_check(ab, ba);
    mirror_msg = fmt("mirror identity h_ab(tau) = h_ba(-tau): %zu bins, %llu coincidences", rep.bins_checked,
                     static_cast<unsigned long long>(rep.total_counts));
  } catch (const Error& e) {
    mirror_ok = false;
    mirror_msg = std::string("mirror identity violated: ") + e.what();
  }
  log.check(mirror_ok, mirror_msg);

  // Byte-identical reruns.
  const fs::path root = fs::temp_directory_path() / "g2sim_acceptance_rerun";
  fs::remove_all(root);
  Scenario rs = ideal_scenario("silver", ScenarioKind::SilverFiltered, 10, 1e7, 57);
  rs.name = "rerun";
  run_pipeline(rs, root / "a");
  run_pipeline(rs, root / "b");
  std::size_t files = 0;
  bool same = true;
  for (const auto& entry : fs::directory_iterator(root / "a")) {
    ++files;
    same = same && read_text(entry.path()) == read_text(root / "b" / entry.path().filename());
  }
  log.check(same && files >= 7, fmt("byte-identical reruns: %zu artifacts compared", files));
  fs::remove_all(root);
  return log.outcome(fmt("inversion %.1e; brute force, mirror, reruns %s", worst,
                         brute_ok && mirror_ok && same ? "exact" : "MISMATCH"));
}

// 6. Background dilution to rho = 0.8 with one emitter.
Outcome background_law(Log& log) {
  Scenario s = ideal_scenario("silver", ScenarioKind::SilverUnfiltered, 1, 1e8, 66);
  s.rho = 0.8;
  s.background_rate.reset();
  const PipelineResult r = run_pipeline(s);
  const double g0 = fitted_dip_minimum(r.fit.params, 150.0);
  const double measured_rho =
      expected_signal_rate(s) / (static_cast<double>(r.detection.tags.a.tags.size()) / s.duration_ns);
  log.check(std::abs(g0 - 0.36) <= 0.03, fmt("g2(0) = %.4f (target 0.36, tol 0.03)", g0));
  log.check(true, fmt("(info) detector-level signal fraction from counts %.4f, fitted c = %.4f", measured_rho,
                      r.fit.params.c));
  return log.outcome(fmt("g2(0) = %.3f", g0));
}

// 7. Geometry constants and the calibrated count rate.
Outcome geometry_values(Log& log) {
  const double eta = coupling_ratio(1.04);
  // |k/k_z|^2 at n = 1.04 is 1.0816 / 0.0816 = 676/51 exactly.
  log.check(std::abs(eta - 676.0 / 51.0) <= 1e-10,
            fmt("coupling_ratio(1.04) = %.12f, formula value 676/51 to 1e-10", eta));
  log.check(std::abs(eta - 13.25) < 0.005, fmt("coupling_ratio(1.04) = %.2f at the quoted precision", eta));
  const DetectionGeometry g;
  const double f = collection_fraction(g.fiber_effective_diameter, g.ring_radius_bfp);
  log.check(std::abs(f - 0.07) < 1e-12,
            fmt("collection_fraction(d/R = %.4f) = %.6f", g.fiber_effective_diameter / g.ring_radius_bfp, f));

  Scenario s = make_scenario("silver", ScenarioKind::SilverFiltered, 10, FiberConfig::AB, 2e8, 77);
  const DetectionRecord rec = simulate_detection(s);
  const double secs = s.duration_ns * 1e-9;
  const double ra = static_cast<double>(rec.tags.a.tags.size()) / secs;
  const double rb = static_cast<double>(rec.tags.b.tags.size()) / secs;
  log.check(ra >= 5e3 && ra <= 1e4 && rb >= 5e3 && rb <= 1e4,
            fmt("silver N=10 calibrated budget: A %.0f Hz, B %.0f Hz (band 5-10 kHz)", ra, rb));
  return log.outcome(fmt("eta = %.4f, collection %.3f, rates %.0f / %.0f Hz", eta, f, ra, rb));
}

// 8. A-A, B-B and A-B fits agree within 2 sigma.
Outcome isotropy(Log& log) {
  struct Run {
    std::string name;
    FitResult fit;
  };
  std::vector<Run> runs;
  std::uint64_t seed = 801;
  for (FiberConfig fc : {FiberConfig::AA, FiberConfig::BB, FiberConfig::AB}) {
    Scenario s = make_scenario("silver", ScenarioKind::SilverFiltered, 10, fc, 3e8, seed++);
    // Fourier-plane fibers at 7% collection, other stages lossless.
    EfficiencyBudget b;
    b.via_spp = false;
    b.p_collect = s.budget.p_collect;
    b.p_bs = 1.0;
    s.budget = b;
    runs.push_back({to_string(fc), run_pipeline(s).fit});
  }
  const char* names[4] = {"gamma1", "gamma2", "beta", "c"};
  int worst_pull_idx = 0;
  double worst_pull = 0.0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      std::string line = runs[i].name + " vs " + runs[j].name + ":";
      bool ok = true;
      for (int k = 0; k < 4; ++k) {
        const double d = runs[i].fit.params.vec()(k) - runs[j].fit.params.vec()(k);
        const double s = std::hypot(runs[i].fit.sigma(k), runs[j].fit.sigma(k));
        const double pull = std::abs(d) / s;
        ok = ok && pull <= 2.0;
        if (pull > worst_pull) {
          worst_pull = pull;
          worst_pull_idx = k;
        }
        line += fmt(" %s %.2f sigma", names[k], pull);
      }
      log.check(ok, line);
    }
  }
  for (const auto& r : runs) {
    log.check(true, fmt("(info) %s: gamma1 %.4f+-%.4f gamma2 %.5f+-%.5f beta %.3f+-%.3f c %.4f+-%.4f", r.name.c_str(),
                        r.fit.params.gamma1, r.fit.sigma(0), r.fit.params.gamma2, r.fit.sigma(1), r.fit.params.beta,
                        r.fit.sigma(2), r.fit.params.c, r.fit.sigma(3)));
  }
  return log.outcome(fmt("largest pairwise pull %.2f sigma (%s)", worst_pull, names[worst_pull_idx]));
}

// 9. Fitter numerics.
Outcome fitter_numerics(Log& log) {
  std::vector<double> grid;
  for (int i = -150; i <= 150; ++i) grid.push_back(i);
  double worst_jac = 0.0, worst_fit = 0.0;
  for (const auto& p : {kSilverPreset, kGlassPreset}) {
    for (InversionModel m : {InversionModel::Approximate, InversionModel::Exact}) {
      const DerivedParams dp = forward(p.rates(), m);
      const ModelParams truth{dp.gamma1, dp.gamma2, dp.beta, 0.1};
      worst_jac = std::max(worst_jac, jacobian_check(truth, grid));
      FitData data;
      for (double t : grid) {
        data.tau.push_back(t);
        data.g2.push_back(model_value(truth, t));
        data.sigma.push_back(0.01);
      }
      const FitResult f = fit_g2(data);
      for (int k = 0; k < 4; ++k) {
        worst_fit = std::max(worst_fit, std::abs(f.params.vec()(k) - truth.vec()(k)) / std::abs(truth.vec()(k)));
      }
    }
  }
  worst_jac = std::max(worst_jac, jacobian_check({0.14, 0.0195, 1.0, 0.1}, grid));
  const std::vector<double> widths(grid.size(), 0.999);
  worst_jac = std::max(worst_jac, jacobian_check({0.168, 0.0183, 2.3, 0.1}, grid, 1e-6, widths));
  log.check(worst_jac < 1e-5, fmt("analytic vs finite-difference Jacobian: max deviation %.2e", worst_jac));
  log.check(worst_fit < 1e-6, fmt("noiseless refit: max relative parameter error %.2e", worst_fit));
  return log.outcome(fmt("Jacobian %.1e, refit %.1e", worst_jac, worst_fit));
}

}  // namespace

// Optional arguments select criteria by number.
int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Log&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "antibunching law g2(0) = 1 - 1/N", antibunching_law},
      {2, "lifetime table round trip", table_round_trip},
      {3, "dip narrowing tau21 ratio", dip_narrowing},
      {4, "oracle equivalence", oracle_equivalence},
      {5, "exact properties", exact_properties},
      {6, "background / rho law", background_law},
      {7, "geometry values and count rate", geometry_values},
      {8, "isotropy A-A / B-B / A-B", isotropy},
      {9, "fitter numerics", fitter_numerics},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) continue;
    ++ran;
    Log log;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(log);
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const bool pass = out.pass && log.pass();
    for (const auto& l : log.lines()) std::printf("    %s\n", l.c_str());
    std::printf("%s criterion %d (%s): %s [%.1f s]\n", pass ? "PASS" : "FAIL", c.id, c.name, out.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    if (!pass) ++failed;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
