#include "g2sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "g2sim/errors.hpp"
#include "g2sim/io.hpp"
#include "g2sim/presets.hpp"

namespace g2sim {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& s) {
  const auto pos = s.find_first_of("#;");
  return pos == std::string::npos ? s : s.substr(0, pos);
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  return a < 0.0 ? a + two_pi : a;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"",
       {"name", "preset", "n_emitters", "duration_ns", "seed", "fiber_config", "detection", "budget_preset", "rho",
        "background_rate_per_ns"}},
      {"rates", {"k12", "k21", "k23", "k31", "tau12_ns", "tau21_ns", "tau23_ns", "tau31_ns"}},
      {"geometry",
       {"n_spp", "n_glass", "point_a_angle", "point_b_angle", "fiber_effective_diameter", "ring_radius_bfp",
        "fourier_filter"}},
      {"budget",
       {"p_couple_vertical", "p_couple_horizontal", "p_survive", "p_leak", "p_collect", "p_bs", "p_qe",
        "fraction_vertical"}},
      {"correlator", {"bin_width_ps", "window_ps", "estimator", "jitter_ps"}},
      {"fit", {"k12_per_ns", "inversion", "max_iterations", "gradient_tolerance", "step_tolerance"}},
  };
  return keys;
}

// Typed accessors that record diagnostics instead of throwing.
class Reader {
 public:
  Reader(const IniDocument& doc, std::vector<ConfigDiagnostic>& diags) : doc_(doc), diags_(diags) {}

  const IniValue* find(const std::string& section, const std::string& key) const {
    const auto s = doc_.sections.find(section);
    if (s == doc_.sections.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  bool has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

  template <typename T, typename Parse>
  void read(const std::string& section, const std::string& key, T& out, Parse parse) {
    const IniValue* v = find(section, key);
    if (v == nullptr) return;
    try {
      out = parse(v->text);
    } catch (const std::exception& e) {
      diags_.push_back({v->line, field(section, key), e.what()});
    }
  }

  void number(const std::string& section, const std::string& key, double& out) {
    read(section, key, out, [](const std::string& t) {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument("expected a number, got '" + t + "'");
      return v;
    });
  }

  void number(const std::string& section, const std::string& key, std::optional<double>& out) {
    if (!has(section, key)) return;
    double v = 0.0;
    number(section, key, v);
    out = v;
  }

  void integer(const std::string& section, const std::string& key, std::int64_t& out) {
    read(section, key, out, [](const std::string& t) {
      std::size_t used = 0;
      const long long v = std::stoll(t, &used);
      if (used != t.size()) throw std::invalid_argument("expected an integer, got '" + t + "'");
      return static_cast<std::int64_t>(v);
    });
  }

  void boolean(const std::string& section, const std::string& key, bool& out) {
    read(section, key, out, [](const std::string& t) {
      if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
      if (t == "false" || t == "0" || t == "off" || t == "no") return false;
      throw std::invalid_argument("expected true/false, got '" + t + "'");
    });
  }

  int line_of(const std::string& field_name) const {
    const auto dot = field_name.find('.');
    const std::string section = dot == std::string::npos ? "" : field_name.substr(0, dot);
    const std::string key = dot == std::string::npos ? field_name : field_name.substr(dot + 1);
    if (const IniValue* v = find(section, key)) return v->line;
    // A bare section name maps to its first key.
    const auto s = doc_.sections.find(field_name);
    if (dot != std::string::npos || s == doc_.sections.end() || s->second.empty()) return 0;
    int first = s->second.begin()->second.line;
    for (const auto& [k, v] : s->second) first = std::min(first, v.line);
    return first;
  }

  static std::string field(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

 private:
  const IniDocument& doc_;
  std::vector<ConfigDiagnostic>& diags_;
};

void apply_budget_preset(Scenario& s) {
  const ScenarioBudget sb = scenario_budget(s.budget_preset);
  s.geometry = sb.geometry;
  s.budget = sb.budget;
  s.mix = sb.mix;
  if (!s.rho && !s.background_rate) s.rho = sb.rho;
  if (s.detection == DetectionMode::Ideal) s.budget = ideal_budget();
}

}  // namespace

std::string ConfigDiagnostic::format(const std::string& source) const {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  out += ": ";
  if (!field.empty()) out += field + ": ";
  return out + message;
}

IniDocument parse_ini(const std::string& text, std::vector<ConfigDiagnostic>& diagnostics) {
  IniDocument doc;
  doc.sections[""];
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        diagnostics.push_back({line_no, "", "malformed section header '" + line + "'"});
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      doc.sections[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      diagnostics.push_back({line_no, "", "expected 'key = value', got '" + line + "'"});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      diagnostics.push_back({line_no, "", "missing key before '='"});
      continue;
    }
    auto [it, inserted] = doc.sections[section].emplace(key, IniValue{value, line_no});
    if (!inserted) {
      diagnostics.push_back({line_no, Reader::field(section, key),
                             "duplicate key (first set on line " + std::to_string(it->second.line) + ")"});
    }
  }
  return doc;
}

const char* to_string(FiberConfig config) {
  switch (config) {
    case FiberConfig::AA: return "AA";
    case FiberConfig::BB: return "BB";
    case FiberConfig::AB: return "AB";
    case FiberConfig::DirectPlane: return "DirectPlane";
  }
  return "?";
}

FiberConfig parse_fiber_config(const std::string& name) {
  if (name == "AA") return FiberConfig::AA;
  if (name == "BB") return FiberConfig::BB;
  if (name == "AB") return FiberConfig::AB;
  if (name == "DirectPlane" || name == "direct") return FiberConfig::DirectPlane;
  throw Error(ErrorKind::ConfigError, "unknown fiber_config '" + name + "' (AA, BB, AB, DirectPlane)");
}

DetectionGeometry Scenario::effective_geometry() const {
  DetectionGeometry g = geometry;
  switch (fiber_config) {
    case FiberConfig::AA: g.fiber_a_angle = g.fiber_b_angle = wrap_angle(point_a_angle); break;
    case FiberConfig::BB: g.fiber_a_angle = g.fiber_b_angle = wrap_angle(point_b_angle); break;
    case FiberConfig::AB:
      g.fiber_a_angle = wrap_angle(point_a_angle);
      g.fiber_b_angle = wrap_angle(point_b_angle);
      break;
    case FiberConfig::DirectPlane: g.plane = ImagingPlane::Direct; break;
  }
  return g;
}

std::vector<ConfigDiagnostic> Scenario::check() const {
  std::vector<ConfigDiagnostic> diags;
  auto guard = [&diags](const std::string& field, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      diags.push_back({0, field, e.what()});
    }
  };
  guard("rates", [&] { rates.validate(); });
  if (n_emitters < 1) diags.push_back({0, "n_emitters", "n_emitters must be >= 1"});
  if (rho && !(*rho >= 0.0 && *rho <= 1.0)) diags.push_back({0, "rho", "rho out of [0,1]"});
  if (rho && *rho == 0.0) diags.push_back({0, "rho", "rho = 0 leaves no signal to simulate"});
  if (background_rate && !(*background_rate >= 0.0)) {
    diags.push_back({0, "background_rate_per_ns", "background rate must be >= 0"});
  }
  if (rho && background_rate) {
    diags.push_back({0, "rho", "set either rho or background_rate_per_ns, not both"});
  }
  guard("geometry", [&] { effective_geometry().validate(); });
  guard("budget", [&] {
    budget.validate();
    mix.validate();
  });
  if (!(duration_ns > 0.0) || !std::isfinite(duration_ns)) {
    diags.push_back({0, "duration_ns", "duration must be positive"});
  }
  if (!(bin_width_ps > 0) || window_ps < bin_width_ps || window_ps % std::max<std::int64_t>(bin_width_ps, 1) != 0) {
    diags.push_back({0, "correlator.window_ps", "window must be a positive multiple of bin_width_ps"});
  }
  if (!(jitter_ps >= 0.0)) diags.push_back({0, "correlator.jitter_ps", "jitter must be >= 0"});
  if (!(k12_fit > 0.0)) diags.push_back({0, "fit.k12_per_ns", "k12 for rate inversion must be positive"});
  guard("fit", [&] { fit.validate(); });
  return diags;
}

void Scenario::validate() const {
  const auto diags = check();
  if (diags.empty()) return;
  std::string msg;
  for (const auto& d : diags) msg += "\n  " + d.format(name);
  throw Error(ErrorKind::ConfigError, "invalid scenario:" + msg);
}

nlohmann::json Scenario::to_json() const {
  const DetectionGeometry g = effective_geometry();
  nlohmann::json j{
      {"name", name},
      {"rates_source", rates_source},
      {"rates_per_ns", {{"k12", rates.k12}, {"k21", rates.k21}, {"k23", rates.k23}, {"k31", rates.k31}}},
      {"n_emitters", n_emitters},
      {"budget_preset", std::string(to_string(budget_preset))},
      {"detection", detection == DetectionMode::Ideal ? "ideal" : "budget"},
      {"fiber_config", to_string(fiber_config)},
      {"geometry",
       {{"n_spp", g.n_spp},
        {"n_glass", g.n_glass},
        {"fiber_a_angle", g.fiber_a_angle},
        {"fiber_b_angle", g.fiber_b_angle},
        {"fiber_effective_diameter", g.fiber_effective_diameter},
        {"ring_radius_bfp", g.ring_radius_bfp},
        {"fourier_filter", g.fourier_filter_on},
        {"plane", g.plane == ImagingPlane::Fourier ? "fourier" : "direct"}}},
      {"budget",
       {{"p_couple_vertical", budget.p_couple_vertical},
        {"p_couple_horizontal", budget.p_couple_horizontal},
        {"p_survive", budget.p_survive},
        {"p_leak", budget.p_leak},
        {"p_collect", budget.p_collect},
        {"p_bs", budget.p_bs},
        {"p_qe", budget.p_qe},
        {"via_spp", budget.via_spp},
        {"fraction_vertical", mix.fraction_vertical}}},
      {"duration_ns", duration_ns},
      {"seed", seed},
      {"correlator",
       {{"bin_width_ps", bin_width_ps},
        {"window_ps", window_ps},
        {"estimator", estimator == Estimator::AllPairs ? "all_pairs" : "start_stop"},
        {"jitter_ps", jitter_ps}}},
      {"fit",
       {{"k12_per_ns", k12_fit},
        {"inversion", to_string(inversion)},
        {"max_iterations", fit.max_iterations},
        {"gradient_tolerance", fit.gradient_tolerance},
        {"step_tolerance", fit.step_tolerance}}},
  };
  j["rho"] = rho ? nlohmann::json(*rho) : nlohmann::json(nullptr);
  j["background_rate_per_ns"] = background_rate ? nlohmann::json(*background_rate) : nlohmann::json(nullptr);
  return j;
}

Scenario make_scenario(const std::string& rates_preset, ScenarioKind budget, int n_emitters, FiberConfig fibers,
                       double duration_ns, std::uint64_t seed) {
  const auto preset = find_preset(rates_preset);
  if (!preset) throw Error(ErrorKind::UnknownScenario, "no lifetime preset '" + rates_preset + "'");
  Scenario s;
  s.name = rates_preset + "_" + to_string(fibers);
  s.rates_source = rates_preset;
  s.rates = preset->rates();
  s.n_emitters = n_emitters;
  s.budget_preset = budget;
  s.fiber_config = fibers;
  s.duration_ns = duration_ns;
  s.seed = seed;
  s.k12_fit = s.rates.k12;
  apply_budget_preset(s);
  return s;
}

ConfigReport parse_scenario(const std::string& text) {
  ConfigReport report;
  auto& diags = report.diagnostics;
  const IniDocument doc = parse_ini(text, diags);

  for (const auto& [section, entries] : doc.sections) {
    const auto known = known_keys().find(section);
    for (const auto& [key, value] : entries) {
      if (known == known_keys().end()) {
        diags.push_back({value.line, Reader::field(section, key), "unknown section [" + section + "]"});
      } else if (!known->second.count(key)) {
        diags.push_back({value.line, Reader::field(section, key), "unknown key"});
      }
    }
  }

  Reader rd(doc, diags);
  Scenario s;
  rd.read("", "name", s.name, [](const std::string& t) { return t; });
  rd.read("", "preset", s.rates_source, [](const std::string& t) {
    if (!find_preset(t)) throw std::invalid_argument("unknown lifetime preset '" + t + "' (glass, silver)");
    return t;
  });
  std::int64_t n = s.n_emitters;
  rd.integer("", "n_emitters", n);
  s.n_emitters = static_cast<int>(std::clamp<std::int64_t>(n, -1, 1'000'000));
  rd.number("", "duration_ns", s.duration_ns);
  rd.read("", "seed", s.seed, [](const std::string& t) {
    std::size_t used = 0;
    const auto v = std::stoull(t, &used);
    if (used != t.size()) throw std::invalid_argument("expected an unsigned integer");
    return static_cast<std::uint64_t>(v);
  });
  rd.read("", "fiber_config", s.fiber_config, [](const std::string& t) { return parse_fiber_config(t); });
  rd.read("", "detection", s.detection, [](const std::string& t) {
    if (t == "budget") return DetectionMode::Budget;
    if (t == "ideal") return DetectionMode::Ideal;
    throw std::invalid_argument("detection must be 'budget' or 'ideal'");
  });
  rd.read("", "budget_preset", s.budget_preset, [](const std::string& t) { return parse_scenario_kind(t); });
  rd.number("", "rho", s.rho);
  rd.number("", "background_rate_per_ns", s.background_rate);

  apply_budget_preset(s);

  const auto preset = find_preset(s.rates_source);
  s.rates = preset ? preset->rates() : kSilverPreset.rates();
  for (const auto& [key, member] : {std::pair{"k12", &RateSet::k12}, std::pair{"k21", &RateSet::k21},
                                    std::pair{"k23", &RateSet::k23}, std::pair{"k31", &RateSet::k31}}) {
    if (rd.has("rates", key)) {
      rd.number("rates", key, s.rates.*member);
      s.rates_source = "explicit";
    }
  }
  for (const auto& [key, member] : {std::pair{"tau12_ns", &RateSet::k12}, std::pair{"tau21_ns", &RateSet::k21},
                                    std::pair{"tau23_ns", &RateSet::k23}, std::pair{"tau31_ns", &RateSet::k31}}) {
    if (rd.has("rates", key)) {
      double tau = 0.0;
      rd.number("rates", key, tau);
      s.rates.*member = std::isinf(tau) ? 0.0 : 1.0 / tau;
      s.rates_source = "explicit";
    }
  }

  rd.number("geometry", "n_spp", s.geometry.n_spp);
  rd.number("geometry", "n_glass", s.geometry.n_glass);
  rd.number("geometry", "point_a_angle", s.point_a_angle);
  rd.number("geometry", "point_b_angle", s.point_b_angle);
  rd.number("geometry", "fiber_effective_diameter", s.geometry.fiber_effective_diameter);
  rd.number("geometry", "ring_radius_bfp", s.geometry.ring_radius_bfp);
  rd.boolean("geometry", "fourier_filter", s.geometry.fourier_filter_on);
  const bool geometry_resized = rd.has("geometry", "fiber_effective_diameter") || rd.has("geometry", "ring_radius_bfp");
  if (geometry_resized && s.detection == DetectionMode::Budget && s.budget.via_spp && !rd.has("budget", "p_collect")) {
    try {
      s.budget.p_collect = collection_fraction(s.geometry.fiber_effective_diameter, s.geometry.ring_radius_bfp);
    } catch (const Error& e) {
      diags.push_back({rd.line_of("geometry.fiber_effective_diameter"), "geometry", e.what()});
    }
  }

  rd.number("budget", "p_couple_vertical", s.budget.p_couple_vertical);
  rd.number("budget", "p_couple_horizontal", s.budget.p_couple_horizontal);
  rd.number("budget", "p_survive", s.budget.p_survive);
  rd.number("budget", "p_leak", s.budget.p_leak);
  rd.number("budget", "p_collect", s.budget.p_collect);
  rd.number("budget", "p_bs", s.budget.p_bs);
  rd.number("budget", "p_qe", s.budget.p_qe);
  rd.number("budget", "fraction_vertical", s.mix.fraction_vertical);

  rd.integer("correlator", "bin_width_ps", s.bin_width_ps);
  rd.integer("correlator", "window_ps", s.window_ps);
  rd.read("correlator", "estimator", s.estimator, [](const std::string& t) {
    if (t == "all_pairs") return Estimator::AllPairs;
    if (t == "start_stop") return Estimator::StartStop;
    throw std::invalid_argument("estimator must be 'all_pairs' or 'start_stop'");
  });
  rd.number("correlator", "jitter_ps", s.jitter_ps);

  s.k12_fit = s.rates.k12;
  rd.number("fit", "k12_per_ns", s.k12_fit);
  rd.read("fit", "inversion", s.inversion, [](const std::string& t) { return parse_inversion_model(t); });
  std::int64_t max_iter = s.fit.max_iterations;
  rd.integer("fit", "max_iterations", max_iter);
  s.fit.max_iterations = static_cast<int>(std::clamp<std::int64_t>(max_iter, 0, 1'000'000));
  rd.number("fit", "gradient_tolerance", s.fit.gradient_tolerance);
  rd.number("fit", "step_tolerance", s.fit.step_tolerance);

  for (auto d : s.check()) {
    d.line = rd.line_of(d.field);
    if (d.line == 0 && d.field == "rates") d.line = rd.line_of("preset");
    diags.push_back(d);
  }
  std::stable_sort(diags.begin(), diags.end(),
                   [](const ConfigDiagnostic& a, const ConfigDiagnostic& b) { return a.line < b.line; });
  if (diags.empty()) report.scenario = std::move(s);
  return report;
}

ConfigReport validate_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    ConfigReport r;
    r.diagnostics.push_back({0, "", "file not found: " + path.string()});
    return r;
  }
  return parse_scenario(read_text(path));
}

Scenario load_scenario(const std::filesystem::path& path) {
  ConfigReport report = validate_config(path);
  if (!report.ok()) {
    std::string msg;
    for (const auto& d : report.diagnostics) msg += "\n  " + d.format(path.string());
    throw Error(ErrorKind::ConfigError, "invalid scenario file:" + msg);
  }
  return *report.scenario;
}

}  // namespace g2sim
