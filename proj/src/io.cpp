#include "g2sim/io.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "g2sim/errors.hpp"

namespace g2sim {
namespace {

using nlohmann::json;

constexpr std::array<char, 4> kMagic{'T', 'T', 'A', 'G'};
constexpr std::size_t kRecordSize = 16;

void put_u64(unsigned char* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<unsigned char>(v >> (8 * i));
}

void put_u16(unsigned char* out, std::uint16_t v) {
  out[0] = static_cast<unsigned char>(v);
  out[1] = static_cast<unsigned char>(v >> 8);
}

std::uint64_t get_u64(const unsigned char* in) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | in[i];
  return v;
}

std::uint16_t get_u16(const unsigned char* in) {
  return static_cast<std::uint16_t>(in[0] | (in[1] << 8));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json quantity_json(const Quantity& q) {
  if (!std::isfinite(q.value)) return json{{"value", nullptr}, {"sigma", nullptr}};
  return json{{"value", q.value}, {"sigma", q.sigma}};
}

Quantity quantity_from(const json& j) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Quantity q;
  q.value = j.at("value").is_null() ? inf : j.at("value").get<double>();
  q.sigma = j.at("sigma").is_null() ? inf : j.at("sigma").get<double>();
  return q;
}

}  // namespace

void write_time_tags(const std::filesystem::path& path, const TimeTagStream& a, const TimeTagStream& b) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  const std::int64_t duration = std::max(a.duration_ps, b.duration_ps);
  std::array<unsigned char, 16> header{};
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  put_u16(header.data() + 4, kTimeTagVersion);
  put_u64(header.data() + 8, static_cast<std::uint64_t>(duration));
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::array<unsigned char, kRecordSize> rec{};
  auto emit = [&](std::int64_t t, Channel ch) {
    rec.fill(0);
    put_u64(rec.data(), static_cast<std::uint64_t>(t));
    rec[8] = static_cast<unsigned char>(ch);
    out.write(reinterpret_cast<const char*>(rec.data()), rec.size());
  };
  std::size_t i = 0, j = 0;
  while (i < a.tags.size() || j < b.tags.size()) {
    if (j == b.tags.size() || (i < a.tags.size() && a.tags[i] <= b.tags[j])) {
      emit(a.tags[i++], Channel::A);
    } else {
      emit(b.tags[j++], Channel::B);
    }
  }
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

ChannelPair read_time_tags(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::array<unsigned char, 16> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size()) ||
      std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(ErrorKind::IoError, path.string() + ": not a time-tag file");
  }
  if (get_u16(header.data() + 4) != kTimeTagVersion) {
    throw Error(ErrorKind::IoError, path.string() + ": unsupported time-tag version");
  }
  ChannelPair pair;
  pair.a.channel = Channel::A;
  pair.b.channel = Channel::B;
  pair.a.duration_ps = pair.b.duration_ps = static_cast<std::int64_t>(get_u64(header.data() + 8));

  std::array<unsigned char, kRecordSize> rec{};
  std::int64_t last = 0;
  while (in.read(reinterpret_cast<char*>(rec.data()), rec.size())) {
    const auto t = static_cast<std::int64_t>(get_u64(rec.data()));
    if (t < last) throw Error(ErrorKind::UnsortedInput, path.string() + ": records out of order");
    last = t;
    switch (rec[8]) {
      case 0: pair.a.tags.push_back(t); break;
      case 1: pair.b.tags.push_back(t); break;
      default: throw Error(ErrorKind::IoError, path.string() + ": bad channel byte");
    }
  }
  if (in.gcount() != 0) throw Error(ErrorKind::IoError, path.string() + ": truncated record");
  return pair;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

json histogram_metadata(const CorrelationHistogram& h) {
  return json{{"bin_width_ps", h.bin_width},
              {"lag_min_ps", h.lag_min},
              {"lag_max_ps", h.lag_max},
              {"duration_ps", h.duration},
              {"n_a", h.n_a},
              {"n_b", h.n_b},
              {"rate_a_hz", h.rate_a},
              {"rate_b_hz", h.rate_b},
              {"estimator", h.estimator == Estimator::AllPairs ? "all_pairs" : "start_stop"},
              {"binning", "centred"}};
}

void write_histogram(const std::filesystem::path& csv_path, const CorrelationHistogram& h) {
  std::string csv = "lag_ps,counts,g2,sigma\n";
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    csv += std::to_string(h.lag(i)) + ',' + std::to_string(h.counts[i]) + ',' + format_double(h.g2[i]) + ',' +
           format_double(h.sigma[i]) + '\n';
  }
  write_text(csv_path, csv);
  write_text(sidecar_path(csv_path), histogram_metadata(h).dump(2) + "\n");
}

CorrelationHistogram read_histogram(const std::filesystem::path& csv_path) {
  const json meta = json::parse(read_text(sidecar_path(csv_path)));
  CorrelationHistogram h;
  h.bin_width = meta.at("bin_width_ps").get<std::int64_t>();
  h.lag_min = meta.at("lag_min_ps").get<std::int64_t>();
  h.lag_max = meta.at("lag_max_ps").get<std::int64_t>();
  h.duration = meta.at("duration_ps").get<std::int64_t>();
  h.n_a = meta.at("n_a").get<std::uint64_t>();
  h.n_b = meta.at("n_b").get<std::uint64_t>();
  h.rate_a = meta.at("rate_a_hz").get<double>();
  h.rate_b = meta.at("rate_b_hz").get<double>();
  h.estimator = meta.at("estimator").get<std::string>() == "start_stop" ? Estimator::StartStop : Estimator::AllPairs;

  std::istringstream in(read_text(csv_path));
  std::string line;
  std::getline(in, line);
  if (line.rfind("lag_ps,counts,g2,sigma", 0) != 0) {
    throw Error(ErrorKind::IoError, csv_path.string() + ": unexpected CSV header");
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    long long lag = 0;
    unsigned long long counts = 0;
    double g2 = 0.0, sigma = 0.0;
    if (std::sscanf(line.c_str(), "%lld,%llu,%lf,%lf", &lag, &counts, &g2, &sigma) != 4) {
      throw Error(ErrorKind::IoError, csv_path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    if (lag != h.lag(h.counts.size())) {
      throw Error(ErrorKind::IoError, csv_path.string() + ":" + std::to_string(line_no) + ": lag out of sequence");
    }
    h.counts.push_back(counts);
    h.g2.push_back(g2);
    h.sigma.push_back(sigma);
  }
  if (h.counts.empty() || h.lag(h.counts.size() - 1) != h.lag_max) {
    throw Error(ErrorKind::IoError, csv_path.string() + ": histogram does not span the declared window");
  }
  return h;
}

json to_json(const FitResult& fit) {
  json cov = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(fit.covariance(i, j));
    cov.push_back(row);
  }
  const auto& p = fit.params;
  return json{{"params", {{"gamma1", p.gamma1}, {"gamma2", p.gamma2}, {"beta", p.beta}, {"c", p.c}}},
              {"sigma", {{"gamma1", fit.sigma(0)}, {"gamma2", fit.sigma(1)}, {"beta", fit.sigma(2)}, {"c", fit.sigma(3)}}},
              {"covariance", cov},
              {"chi2", fit.chi2},
              {"chi2_reduced", fit.chi2_reduced},
              {"n_points", fit.n_points},
              {"n_iterations", fit.n_iterations},
              {"converged", fit.converged},
              {"non_identifiable", fit.non_identifiable},
              {"status", to_string(fit.status)},
              {"diagnostics", fit.diagnostics}};
}

FitResult fit_from_json(const json& j) {
  FitResult fit;
  const auto& p = j.at("params");
  fit.params = {p.at("gamma1").get<double>(), p.at("gamma2").get<double>(), p.at("beta").get<double>(),
                p.at("c").get<double>()};
  const auto& cov = j.at("covariance");
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) fit.covariance(r, c) = cov.at(r).at(c).get<double>();
  }
  fit.chi2 = j.at("chi2").get<double>();
  fit.chi2_reduced = j.at("chi2_reduced").get<double>();
  fit.n_points = j.at("n_points").get<int>();
  fit.n_iterations = j.at("n_iterations").get<int>();
  fit.converged = j.at("converged").get<bool>();
  fit.non_identifiable = j.at("non_identifiable").get<bool>();
  const auto status = j.at("status").get<std::string>();
  fit.status = status == "Converged"          ? FitStatus::Converged
               : status == "SingularJacobian" ? FitStatus::SingularJacobian
                                              : FitStatus::NonConvergence;
  fit.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
  return fit;
}

json to_json(const PhotophysicsReport& r) {
  return json{{"tau12_ns", quantity_json(r.tau12)},
              {"tau21_ns", quantity_json(r.tau21)},
              {"tau23_ns", quantity_json(r.tau23)},
              {"tau31_ns", quantity_json(r.tau31)},
              {"quantum_yield", quantity_json(r.quantum_yield)},
              {"rates_per_ns", {{"k12", r.rates.k12}, {"k21", r.rates.k21}, {"k23", r.rates.k23}, {"k31", r.rates.k31}}},
              {"no_shelving", r.no_shelving},
              {"emitters_estimate", r.emitters_estimate},
              {"inversion", to_string(r.model)}};
}

PhotophysicsReport report_from_json(const json& j) {
  PhotophysicsReport r;
  r.tau12 = quantity_from(j.at("tau12_ns"));
  r.tau21 = quantity_from(j.at("tau21_ns"));
  r.tau23 = quantity_from(j.at("tau23_ns"));
  r.tau31 = quantity_from(j.at("tau31_ns"));
  r.quantum_yield = quantity_from(j.at("quantum_yield"));
  const auto& k = j.at("rates_per_ns");
  r.rates = {k.at("k12").get<double>(), k.at("k21").get<double>(), k.at("k23").get<double>(),
             k.at("k31").get<double>()};
  r.no_shelving = j.at("no_shelving").get<bool>();
  r.emitters_estimate = j.at("emitters_estimate").get<double>();
  r.model = parse_inversion_model(j.at("inversion").get<std::string>());
  return r;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace g2sim
