#pragma once

// Scenario files: key = value lines grouped in [sections], '#' or ';'
// comments. Root keys describe the emitters and the run; [rates],
// [geometry], [budget], [correlator] and [fit] override preset values.
//
//   name = silver_AB
//   preset = silver            # lifetime preset: glass | silver
//   n_emitters = 10
//   duration_ns = 1e8
//   seed = 7
//   fiber_config = AB          # AA | BB | AB | DirectPlane
//   detection = budget         # budget | ideal
//   budget_preset = silver_filtered
//   rho = 1.0                  # or background_rate_per_ns
//
//   [correlator]
//   bin_width_ps = 1000
//   window_ps = 150000

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "g2sim/correlator.hpp"
#include "g2sim/fitter.hpp"
#include "g2sim/kinetics.hpp"
#include "g2sim/optics.hpp"

namespace g2sim {

struct IniValue {
  std::string text;
  int line = 0;
};

struct IniDocument {
  // section ("" for root) -> key -> value
  std::map<std::string, std::map<std::string, IniValue>> sections;
};

struct ConfigDiagnostic {
  int line = 0;       // 0 when not tied to a line
  std::string field;  // section.key
  std::string message;

  std::string format(const std::string& source) const;
};

// Syntax errors are appended to diagnostics; parsing continues past them.
IniDocument parse_ini(const std::string& text, std::vector<ConfigDiagnostic>& diagnostics);

enum class FiberConfig { AA, BB, AB, DirectPlane };
enum class DetectionMode { Budget, Ideal };

const char* to_string(FiberConfig config);
FiberConfig parse_fiber_config(const std::string& name);

struct Scenario {
  std::string name = "scenario";
  std::string rates_source = "silver";  // preset key or "explicit"
  RateSet rates;
  int n_emitters = 10;
  std::optional<double> rho;              // detector-level signal fraction
  std::optional<double> background_rate;  // per detector, 1/ns
  ScenarioKind budget_preset = ScenarioKind::SilverFiltered;
  DetectionMode detection = DetectionMode::Budget;
  FiberConfig fiber_config = FiberConfig::AB;
  double point_a_angle = 0.0;  // azimuth of Fourier-plane point A (rad)
  double point_b_angle = 0.5 * 3.14159265358979323846;
  DetectionGeometry geometry;
  EfficiencyBudget budget;
  DipoleMix mix;
  double duration_ns = 1e8;
  std::uint64_t seed = 1;
  std::int64_t bin_width_ps = 1000;
  std::int64_t window_ps = 150000;
  Estimator estimator = Estimator::AllPairs;
  double jitter_ps = 0.0;
  double k12_fit = 0.0;  // 1/ns; defaults to rates.k12
  InversionModel inversion = InversionModel::Exact;
  FitConfig fit;

  // Geometry with fiber positions and imaging plane set by fiber_config.
  DetectionGeometry effective_geometry() const;

  // Throws ConfigError listing every violated invariant.
  void validate() const;
  std::vector<ConfigDiagnostic> check() const;

  // Canonical, fully resolved form; its hash identifies a run.
  nlohmann::json to_json() const;
};

// Preset-based scenario without a file.
Scenario make_scenario(const std::string& rates_preset, ScenarioKind budget, int n_emitters, FiberConfig fibers,
                       double duration_ns, std::uint64_t seed);

struct ConfigReport {
  std::vector<ConfigDiagnostic> diagnostics;
  std::optional<Scenario> scenario;

  bool ok() const { return diagnostics.empty() && scenario.has_value(); }
};

ConfigReport parse_scenario(const std::string& text);
ConfigReport validate_config(const std::filesystem::path& path);

// Throws ConfigError with all diagnostics.
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace g2sim
