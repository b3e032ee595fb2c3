#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "g2sim/errors.hpp"
#include "g2sim/io.hpp"
#include "g2sim/pipeline.hpp"
#include "g2sim/scenario.hpp"

namespace fs = std::filesystem;
using namespace g2sim;

namespace {

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("G2SIM_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return fs::current_path();
}

Scenario scenario_from(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> duration) {
  Scenario s = load_scenario(path);
  if (seed) s.seed = *seed;
  if (duration) s.duration_ns = *duration;
  s.validate();
  return s;
}

void print_rates(const Scenario& s) {
  std::printf("scenario %s: N=%d, tau21=%.4g ns, tau12=%.4g ns, tau23=%.4g ns, tau31=%.4g ns, Q=%.1f%%\n",
              s.name.c_str(), s.n_emitters, 1.0 / s.rates.k21, 1.0 / s.rates.k12,
              s.rates.k23 > 0.0 ? 1.0 / s.rates.k23 : INFINITY, 1.0 / s.rates.k31, 100.0 * quantum_yield(s.rates));
}

int cmd_validate(const std::string& path) {
  const ConfigReport r = validate_config(path);
  if (!r.ok()) {
    for (const auto& d : r.diagnostics) std::cerr << d.format(path) << "\n";
    return 1;
  }
  const Scenario& s = *r.scenario;
  std::cout << "ok\n";
  print_rates(s);
  std::printf("expected signal %.1f Hz per APD, background %.1f Hz per APD\n", expected_signal_rate(s) * 1e9,
              resolved_background_rate(s) * 1e9);
  return 0;
}

int cmd_simulate(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> duration,
                 const fs::path& out) {
  const Scenario s = scenario_from(path, seed, duration);
  const DetectionRecord rec = simulate_detection(s);
  fs::create_directories(out);
  write_time_tags(out / "tags.ttag", rec.tags.a, rec.tags.b);
  write_text(out / "scenario.json", s.to_json().dump(2) + "\n");
  const std::string tags = read_text(out / "tags.ttag");
  const nlohmann::json manifest{{"tool", "g2sim"},
                                {"version", kToolVersion},
                                {"scenario", s.name},
                                {"config_hash", config_hash(s)},
                                {"seed", s.seed},
                                {"counts", {{"A", rec.tags.a.tags.size()}, {"B", rec.tags.b.tags.size()}}},
                                {"emitted", rec.n_emitted},
                                {"artifacts", {{"tags.ttag", {{"bytes", tags.size()}, {"fnv1a", fnv1a_hex(tags)}}}}}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  const double secs = s.duration_ns * 1e-9;
  std::printf("%s: A %zu tags (%.1f Hz), B %zu tags (%.1f Hz) -> %s\n", s.name.c_str(), rec.tags.a.tags.size(),
              rec.tags.a.tags.size() / secs, rec.tags.b.tags.size(), rec.tags.b.tags.size() / secs,
              (out / "tags.ttag").c_str());
  return 0;
}

int cmd_correlate(const std::string& tags_path, std::int64_t bins, std::int64_t window, const std::string& estimator,
                  const fs::path& out) {
  const ChannelPair tags = read_time_tags(tags_path);
  const Estimator est = estimator == "start_stop" ? Estimator::StartStop : Estimator::AllPairs;
  const CorrelationHistogram h = correlate_channels(tags, window, bins, est);
  fs::create_directories(out);
  write_histogram(out / "histogram.csv", h);
  const std::size_t c = h.n_bins() / 2;
  std::printf("%zu bins of %lld ps; g2(0) = %.4f +- %.4f -> %s\n", h.n_bins(), static_cast<long long>(bins),
              h.g2[c], h.sigma[c], (out / "histogram.csv").c_str());
  return 0;
}

int cmd_fit(const std::string& hist_path, double k12, int n_emitters, double rho, const std::string& inversion,
            const std::string& label, const fs::path& out) {
  const CorrelationHistogram h = read_histogram(hist_path);
  const FitResult fit = fit_g2(h);
  const InversionModel model = parse_inversion_model(inversion);
  nlohmann::json doc{{"fit", to_json(fit)}, {"k12_per_ns", k12}, {"n_emitters", n_emitters}, {"rho", rho},
                     {"scenario", label}};
  fs::create_directories(out);
  std::string table;
  int rc = 0;
  try {
    const PhotophysicsReport rep = report_photophysics(fit, k12, n_emitters, rho, model);
    doc["report"] = to_json(rep);
    const std::pair<std::string, PhotophysicsReport> row{label, rep};
    table = render_table(std::span(&row, 1));
  } catch (const Error& e) {
    doc["report_error"] = e.what();
    table = std::string("no report: ") + e.what() + "\n";
    rc = 2;
  }
  write_text(out / "fit.json", doc.dump(2) + "\n");
  write_text(out / "report.txt", table);
  std::printf("gamma1=%.5g gamma2=%.5g beta=%.5g c=%.5g chi2_red=%.3f status=%s%s\n", fit.params.gamma1,
              fit.params.gamma2, fit.params.beta, fit.params.c, fit.chi2_reduced, to_string(fit.status),
              fit.non_identifiable ? " (non-identifiable)" : "");
  std::cout << table;
  return rc;
}

int cmd_report(const std::vector<std::string>& fit_paths, bool mean) {
  std::vector<std::pair<std::string, PhotophysicsReport>> rows;
  for (const auto& p : fit_paths) {
    const auto j = nlohmann::json::parse(read_text(p));
    if (!j.contains("report")) {
      std::cerr << p << ": no report (" << j.value("report_error", std::string("unknown")) << ")\n";
      return 2;
    }
    rows.emplace_back(j.value("scenario", fs::path(p).parent_path().filename().string()),
                      report_from_json(j.at("report")));
  }
  if (mean && rows.size() > 1) {
    std::vector<PhotophysicsReport> reps;
    for (const auto& r : rows) reps.push_back(r.second);
    rows.emplace_back("mean of " + std::to_string(reps.size()), mean_report(reps));
  }
  std::cout << render_table(rows);
  return 0;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, std::optional<double> duration,
            const fs::path& out) {
  const Scenario s = scenario_from(path, seed, duration);
  const PipelineResult r = run_pipeline(s, out);
  std::cout << read_text(out / "report.txt");
  std::printf("config %s, artifacts in %s\n", r.manifest.at("config_hash").get<std::string>().c_str(), out.c_str());
  return r.report ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"g2sim: antibunching simulation, correlation and fitting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string scenario, out, tags, hist, estimator = "all_pairs", inversion = "exact", label = "measurement";
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::int64_t bins = 1000, window = 150000;
  double k12 = 1.0 / 27.0, rho = 1.0;
  int n_emitters = 10;
  std::vector<std::string> fits;
  bool mean = false;

  auto* validate = app.add_subcommand("validate", "check a scenario file and echo the resolved rates");
  validate->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "simulate detector time tags");
  simulate->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "override the scenario seed");
  simulate->add_option("--duration", duration, "override the acquisition time (ns)");
  simulate->add_option("--out", out, "output directory (default $G2SIM_OUT_DIR or .)");

  auto* correlate = app.add_subcommand("correlate", "histogram A-B coincidences from a time-tag file");
  correlate->add_option("--tags", tags, "time-tag file")->required()->check(CLI::ExistingFile);
  correlate->add_option("--bins", bins, "bin width in ps")->check(CLI::PositiveNumber);
  correlate->add_option("--window", window, "half window in ps")->check(CLI::PositiveNumber);
  correlate->add_option("--estimator", estimator, "all_pairs or start_stop")
      ->check(CLI::IsMember({"all_pairs", "start_stop"}));
  correlate->add_option("--out", out, "output directory");

  auto* fit = app.add_subcommand("fit", "fit a histogram and invert to lifetimes");
  fit->add_option("--hist", hist, "histogram CSV (sidecar JSON alongside)")->required()->check(CLI::ExistingFile);
  fit->add_option("--k12", k12, "pump rate k12 in 1/ns")->check(CLI::PositiveNumber);
  fit->add_option("--n-emitters", n_emitters, "number of emitters")->check(CLI::PositiveNumber);
  fit->add_option("--rho", rho, "signal fraction")->check(CLI::Range(0.0, 1.0));
  fit->add_option("--inversion", inversion, "exact or approximate")->check(CLI::IsMember({"exact", "approximate"}));
  fit->add_option("--label", label, "row label for the report table");
  fit->add_option("--out", out, "output directory");

  auto* report = app.add_subcommand("report", "render fit.json files as a lifetime table");
  report->add_option("--fit", fits, "fit.json files")->required()->check(CLI::ExistingFile);
  report->add_flag("--mean", mean, "append the mean over all rows");

  auto* run = app.add_subcommand("run", "simulate, correlate, fit and report in one go");
  run->add_option("--scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--duration", duration, "override the acquisition time (ns)");
  run->add_option("--out", out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(scenario);
    if (*simulate) return cmd_simulate(scenario, seed, duration, output_dir(out));
    if (*correlate) return cmd_correlate(tags, bins, window, estimator, output_dir(out));
    if (*fit) return cmd_fit(hist, k12, n_emitters, rho, inversion, label, output_dir(out));
    if (*report) return cmd_report(fits, mean);
    if (*run) return cmd_run(scenario, seed, duration, output_dir(out));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
