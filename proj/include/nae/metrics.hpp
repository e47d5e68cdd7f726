#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nae/audio.hpp"

namespace nae {

inline constexpr double kSisdrCapDb = 100.0;

// Scale-invariant SDR in dB. Both signals are mean-centered first. Returns
// kSisdrCapDb when the residual is negligible (< 1e-20 of the target energy).
double sisdr(std::span<const double> estimate, std::span<const double> reference);
double sisdr(const Waveform& estimate, const Waveform& reference);

// |<x,y>|^2 / <x,x>, the raw simplified SDR ratio. Zero for a silent x.
double sdr_ratio(std::span<const double> x, std::span<const double> y);

struct BoxplotStats {
  double median = 0, q25 = 0, q75 = 0, min = 0, max = 0;
  std::size_t count = 0;
};

// Quantiles by linear interpolation between order statistics (type 7).
double quantile(std::vector<double> values, double p);
BoxplotStats boxplot_stats(std::span<const double> values);

struct ReportRow {
  std::string condition;
  std::string example_id;
  std::string source;
  double sisdr_db = 0;
};

struct SeparationReport {
  std::vector<ReportRow> rows;

  void add(std::string condition, std::string example_id, std::string source, double sisdr_db);
  std::vector<std::string> conditions() const;
  BoxplotStats summary(const std::string& condition) const;

  std::string to_json() const;
  // condition,example_id,source,sisdr_db
  std::string rows_csv() const;
  // condition,count,median,q25,q75,min,max
  std::string summary_csv() const;
};

}  // namespace nae
