#include "g2sim/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "g2sim/errors.hpp"
#include "g2sim/montecarlo.hpp"

namespace g2sim {
namespace {

double detector_rho(const Scenario& s) {
  if (s.rho) return *s.rho;
  const double signal = expected_signal_rate(s);
  const double bg = resolved_background_rate(s);
  return signal + bg > 0.0 ? signal / (signal + bg) : 0.0;
}

}  // namespace

double expected_signal_rate(const Scenario& s) {
  return s.n_emitters * photon_rate(s.rates) * detection_probability(Channel::A, s.effective_geometry(), s.budget, s.mix);
}

double resolved_background_rate(const Scenario& s) {
  if (s.background_rate) return *s.background_rate;
  if (!s.rho || *s.rho >= 1.0) return 0.0;
  return background_rate_for_rho(expected_signal_rate(s), *s.rho);
}

DetectionRecord simulate_detection(const Scenario& s) {
  s.validate();
  DetectionRecord rec;
  rec.background_rate = resolved_background_rate(s);

  SimConfig sim{s.duration_ns, s.seed, s.n_emitters, s.rates, rec.background_rate};
  EnsembleStream events(sim);
  Router router(s.effective_geometry(), s.budget, s.mix, s.seed, s.jitter_ps);

  const auto duration_ps = static_cast<std::int64_t>(std::llround(s.duration_ns * 1e3));
  auto& a = rec.tags.a;
  auto& b = rec.tags.b;
  a.channel = Channel::A;
  b.channel = Channel::B;
  a.duration_ps = b.duration_ps = duration_ps;

  while (auto ev = events.next()) {
    if (ev->kind == EventKind::Radiative) ++rec.n_emitted;
    const auto hit = router.route(*ev);
    if (!hit) continue;
    const std::int64_t t = std::min(hit->time_ps, duration_ps);
    (hit->channel == Channel::A ? a.tags : b.tags).push_back(t);
  }
  if (s.jitter_ps > 0.0) {
    std::sort(a.tags.begin(), a.tags.end());
    std::sort(b.tags.begin(), b.tags.end());
  }
  return rec;
}

CorrelationHistogram correlate_channels(const ChannelPair& tags, std::int64_t window_ps, std::int64_t bin_width_ps,
                                        Estimator estimator) {
  return cross_correlate(tags.a, tags.b, window_ps, bin_width_ps, estimator);
}

std::string config_hash(const Scenario& s) { return fnv1a_hex(s.to_json().dump()); }

PipelineResult run_pipeline(const Scenario& s, const std::optional<std::filesystem::path>& out_dir) {
  PipelineResult res;
  res.detection = simulate_detection(s);
  res.histogram = correlate_channels(res.detection.tags, s.window_ps, s.bin_width_ps, s.estimator);
  res.fit = fit_g2(res.histogram, s.fit);

  const double rho = detector_rho(s);
  nlohmann::json fit_doc{{"fit", to_json(res.fit)},
                         {"k12_per_ns", s.k12_fit},
                         {"n_emitters", s.n_emitters},
                         {"rho", rho},
                         {"scenario", s.name}};
  try {
    res.report = report_photophysics(res.fit, s.k12_fit, s.n_emitters, std::max(rho, 1e-12), s.inversion);
    fit_doc["report"] = to_json(*res.report);
    const InversionModel other =
        s.inversion == InversionModel::Exact ? InversionModel::Approximate : InversionModel::Exact;
    try {
      fit_doc[std::string("report_") + to_string(other)] =
          to_json(report_photophysics(res.fit, s.k12_fit, s.n_emitters, std::max(rho, 1e-12), other));
    } catch (const Error& e) {
      fit_doc[std::string("report_") + to_string(other)] = e.what();
    }
  } catch (const Error& e) {
    res.report_error = e.what();
    fit_doc["report_error"] = res.report_error;
  }

  const auto& tags = res.detection.tags;
  auto first_tag = [&] {
    std::int64_t t = tags.a.duration_ps;
    if (!tags.a.tags.empty()) t = std::min(t, tags.a.tags.front());
    if (!tags.b.tags.empty()) t = std::min(t, tags.b.tags.front());
    return t;
  };
  auto last_tag = [&] {
    std::int64_t t = 0;
    if (!tags.a.tags.empty()) t = std::max(t, tags.a.tags.back());
    if (!tags.b.tags.empty()) t = std::max(t, tags.b.tags.back());
    return t;
  };
  res.manifest = nlohmann::json{{"tool", "g2sim"},
                                {"version", kToolVersion},
                                {"scenario", s.name},
                                {"config_hash", config_hash(s)},
                                {"seed", s.seed},
                                {"counts", {{"A", tags.a.tags.size()}, {"B", tags.b.tags.size()}}},
                                {"emitted", res.detection.n_emitted},
                                {"background_rate_per_ns", res.detection.background_rate},
                                {"tag_span_ps", {{"first", first_tag()}, {"last", last_tag()}}}};

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    const auto tags_path = *out_dir / "tags.ttag";
    const auto hist_path = *out_dir / "histogram.csv";
    const auto fit_path = *out_dir / "fit.json";
    const auto report_path = *out_dir / "report.txt";
    write_time_tags(tags_path, tags.a, tags.b);
    write_histogram(hist_path, res.histogram);
    write_text(fit_path, fit_doc.dump(2) + "\n");
    std::string table;
    if (res.report) {
      const std::pair<std::string, PhotophysicsReport> row{s.name, *res.report};
      table = render_table(std::span(&row, 1));
    } else {
      table = "no report: " + res.report_error + "\n";
    }
    write_text(report_path, table);
    write_text(*out_dir / "scenario.json", s.to_json().dump(2) + "\n");

    nlohmann::json artifacts = nlohmann::json::object();
    for (const auto& p : {tags_path, hist_path, sidecar_path(hist_path), fit_path, report_path,
                          *out_dir / "scenario.json"}) {
      const std::string bytes = read_text(p);
      artifacts[p.filename().string()] = {{"bytes", bytes.size()}, {"fnv1a", fnv1a_hex(bytes)}};
    }
    res.manifest["artifacts"] = artifacts;
    write_text(*out_dir / "manifest.json", res.manifest.dump(2) + "\n");
  }
  return res;
}

}  // namespace g2sim
