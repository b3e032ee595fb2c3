#pragma once

// On-disk formats.
//
// Time tags (little-endian):
//   header, 16 bytes: "TTAG" | u16 version (1) | u16 reserved (0) | u64 duration_ps
//   record, 16 bytes: u64 timestamp_ps | u8 channel (0 = A, 1 = B) | 7 zero bytes
// Records are sorted by timestamp; on ties channel A comes first.
//
// Histograms: CSV with columns lag_ps,counts,g2,sigma (lag = bin centre) and
// a JSON sidecar with the normalization metadata next to it (same stem, .json).

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "json.hpp"

#include "g2sim/correlator.hpp"
#include "g2sim/fitter.hpp"

namespace g2sim {

inline constexpr std::uint16_t kTimeTagVersion = 1;

struct ChannelPair {
  TimeTagStream a;
  TimeTagStream b;
};

void write_time_tags(const std::filesystem::path& path, const TimeTagStream& a, const TimeTagStream& b);
ChannelPair read_time_tags(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

void write_histogram(const std::filesystem::path& csv_path, const CorrelationHistogram& h);
CorrelationHistogram read_histogram(const std::filesystem::path& csv_path);

nlohmann::json histogram_metadata(const CorrelationHistogram& h);
nlohmann::json to_json(const FitResult& fit);
nlohmann::json to_json(const PhotophysicsReport& report);
FitResult fit_from_json(const nlohmann::json& j);
PhotophysicsReport report_from_json(const nlohmann::json& j);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace g2sim
