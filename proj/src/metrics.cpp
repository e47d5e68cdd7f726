#include "nae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

#include "nae/errors.hpp"

namespace nae {

double sisdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size()) {
    throw DimensionError("sisdr: estimate has " + std::to_string(estimate.size()) +
                        " samples, reference " + std::to_string(reference.size()));
  }
  const std::size_t n = reference.size();
  if (n == 0) throw ContractError("sisdr: empty signals");
  double mean_est = 0.0, mean_ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_est += estimate[i];
    mean_ref += reference[i];
  }
  mean_est /= static_cast<double>(n);
  mean_ref /= static_cast<double>(n);

  double cross = 0.0, ref_energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = reference[i] - mean_ref;
    cross += (estimate[i] - mean_est) * r;
    ref_energy += r * r;
  }
  if (!(ref_energy > 0)) throw ContractError("sisdr: reference is silent");
  const double alpha = cross / ref_energy;

  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = alpha * (reference[i] - mean_ref);
    const double e = (estimate[i] - mean_est) - t;
    target += t * t;
    residual += e * e;
  }
  if (residual < 1e-20 * target) return kSisdrCapDb;
  if (!(target > 0)) return -kSisdrCapDb;
  return std::min(kSisdrCapDb, 10.0 * std::log10(target / residual));
}

double sisdr(const Waveform& estimate, const Waveform& reference) {
  return sisdr(std::span<const double>(estimate.samples),
               std::span<const double>(reference.samples));
}

double sdr_ratio(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionError("sdr_ratio: length mismatch");
  double cross = 0.0, energy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    cross += x[i] * y[i];
    energy += x[i] * x[i];
  }
  return energy > 0 ? cross * cross / energy : 0.0;
}

double quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ContractError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BoxplotStats boxplot_stats(std::span<const double> values) {
  if (values.empty()) throw ContractError("boxplot_stats of empty sample");
  std::vector<double> v(values.begin(), values.end());
  BoxplotStats s;
  s.count = v.size();
  s.median = quantile(v, 0.5);
  s.q25 = quantile(v, 0.25);
  s.q75 = quantile(v, 0.75);
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  return s;
}

void SeparationReport::add(std::string condition, std::string example_id, std::string source,
                           double sisdr_db) {
  rows.push_back({std::move(condition), std::move(example_id), std::move(source), sisdr_db});
}

std::vector<std::string> SeparationReport::conditions() const {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    if (std::find(out.begin(), out.end(), r.condition) == out.end()) out.push_back(r.condition);
  }
  return out;
}

BoxplotStats SeparationReport::summary(const std::string& condition) const {
  std::vector<double> v;
  for (const auto& r : rows) {
    if (r.condition == condition) v.push_back(r.sisdr_db);
  }
  return boxplot_stats(v);
}

std::string SeparationReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    j["rows"].push_back({{"condition", r.condition},
                         {"example_id", r.example_id},
                         {"source", r.source},
                         {"sisdr_db", r.sisdr_db}});
  }
  j["summary"] = nlohmann::json::object();
  for (const auto& c : conditions()) {
    const auto s = summary(c);
    j["summary"][c] = {{"count", s.count}, {"median", s.median}, {"q25", s.q25},
                       {"q75", s.q75},     {"min", s.min},       {"max", s.max}};
  }
  return j.dump(2);
}

std::string SeparationReport::rows_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "condition,example_id,source,sisdr_db\n";
  for (const auto& r : rows) {
    os << r.condition << ',' << r.example_id << ',' << r.source << ',' << r.sisdr_db << '\n';
  }
  return os.str();
}

std::string SeparationReport::summary_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "condition,count,median,q25,q75,min,max\n";
  for (const auto& c : conditions()) {
    const auto s = summary(c);
    os << c << ',' << s.count << ',' << s.median << ',' << s.q25 << ',' << s.q75 << ',' << s.min
       << ',' << s.max << '\n';
  }
  return os.str();
}

}  // namespace nae
