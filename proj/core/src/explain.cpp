// Copyright 2026 The psd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "psd/explain.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "psd/csv.hpp"
#include "psd/error.hpp"
#include "psd/format.hpp"

namespace psd {
namespace {

std::vector<Eigen::Index> components_by_weight(const GmmModel& model) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(model.components()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return model.weights[a] > model.weights[b]; });
  return order;
}

std::string_view half_name(LtasHalf half) { return half == LtasHalf::mean ? "mean" : "std"; }

}  // namespace

std::vector<std::string> PhoneDifferenceReport::included_phones() const {
  std::vector<std::string> out;
  for (const auto& p : phones)
    if (p.included) out.push_back(p.phone);
  return out;
}

PhoneDifferenceReport gmm_phone_difference(const GmmModel& pathological, const GmmModel& healthy, double cutoff,
                                           std::span<const std::string> phone_labels) {
  if (pathological.feature_kind != FeatureKind::ppg || healthy.feature_kind != FeatureKind::ppg)
    throw DataError("phone difference: both models must be trained on ppg features");
  if (pathological.components() != healthy.components())
    throw DataError("phone difference: component counts differ (" + std::to_string(pathological.components()) +
                    " vs " + std::to_string(healthy.components()) + ")");
  if (pathological.dims() != healthy.dims()) throw DataError("phone difference: dimensions differ");
  if (cutoff < 0.0) throw UsageError("phone difference: cutoff must be non-negative");

  const auto m = pathological.components();
  const auto phones = pathological.dims();
  std::vector<std::string> labels(phone_labels.begin(), phone_labels.end());
  if (labels.empty()) labels = pathological.column_labels;
  if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != phones)
    throw DataError("phone difference: label count differs from model dimension");

  const auto order_p = components_by_weight(pathological);
  const auto order_h = components_by_weight(healthy);

  PhoneDifferenceReport report;
  report.cutoff = cutoff;
  report.components = static_cast<int>(m);
  for (Eigen::Index k = 0; k < phones; ++k) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j)
      sum += pathological.means(order_p[static_cast<std::size_t>(j)], k) - healthy.means(order_h[static_cast<std::size_t>(j)], k);
    PhoneDifference entry;
    entry.phone_index = static_cast<std::size_t>(k);
    entry.phone = labels.empty() ? fmt::format("phone_{}", k) : labels[static_cast<std::size_t>(k)];
    entry.p = sum / static_cast<double>(m);
    entry.included = std::abs(entry.p) > cutoff;
    report.phones.push_back(std::move(entry));
  }
  std::stable_sort(report.phones.begin(), report.phones.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.p) > std::abs(b.p); });
  return report;
}

std::vector<CoefficientCluster> find_clusters(std::span<const double> weights, std::size_t half_size,
                                              const SpectroMeta& meta) {
  std::vector<CoefficientCluster> clusters;
  auto sign_of = [](double w) { return w > 0.0 ? 1 : (w < 0.0 ? -1 : 0); };
  std::size_t i = 0;
  while (i < weights.size()) {
    const int s = sign_of(weights[i]);
    if (s == 0) {
      ++i;
      continue;
    }
    const std::size_t half_end = (i / half_size + 1) * half_size;
    std::size_t j = i + 1;
    while (j < weights.size() && j < half_end && sign_of(weights[j]) == s) ++j;
    if (j - i >= kMinClusterLength) {
      CoefficientCluster c;
      c.sign = s;
      c.half = i < half_size ? LtasHalf::mean : LtasHalf::std;
      c.first_index = i;
      c.last_index = j - 1;
      c.low_hz = meta.bin_hz(static_cast<int>(i % half_size));
      c.high_hz = meta.bin_hz(static_cast<int>((j - 1) % half_size));
      clusters.push_back(c);
    }
    i = j;
  }
  return clusters;
}

CoefficientReport lasso_coefficients(const LassoModel& model, const SpectroMeta& meta) {
  if (model.feature_kind != FeatureKind::ltas)
    throw DataError("coefficient report: model was trained on " + std::string(to_string(model.feature_kind)) +
                    ", not ltas");
  const auto bins = static_cast<std::size_t>(meta.bins());
  if (static_cast<std::size_t>(model.dims()) != 2 * bins)
    throw DataError("coefficient report: model has " + std::to_string(model.dims()) + " weights, expected " +
                    std::to_string(2 * bins) + " for nfft " + std::to_string(meta.nfft));

  CoefficientReport report;
  report.meta = meta;
  report.alpha = model.alpha;
  const Vector raw = model.raw_weights();
  for (std::size_t i = 0; i < 2 * bins; ++i) {
    CoefficientEntry e;
    e.index = i;
    e.half = i < bins ? LtasHalf::mean : LtasHalf::std;
    e.bin = static_cast<int>(i % bins);
    e.frequency_hz = meta.bin_hz(e.bin);
    e.weight = raw[static_cast<Eigen::Index>(i)];
    report.nonzero += e.weight != 0.0 ? 1 : 0;
    report.coefficients.push_back(e);
  }
  report.clusters = find_clusters(std::span<const double>(raw.data(), static_cast<std::size_t>(raw.size())), bins, meta);
  return report;
}

std::string report_text(const PhoneDifferenceReport& report) {
  std::string out = fmt::format("difference model over {} aligned components, cutoff |p| > {}\n", report.components,
                                report.cutoff);
  out += "p < 0: less likely in pathological speech; p > 0: more likely\n\n";
  out += fmt::format("{:<10} {:>12}  {}\n", "phone", "p", "included");
  for (const auto& p : report.phones)
    out += fmt::format("{:<10} {:>12.6f}  {}\n", p.phone, p.p, p.included ? "yes" : "no");
  return out;
}

std::string report_json(const PhoneDifferenceReport& report) {
  nlohmann::ordered_json j;
  j["cutoff"] = report.cutoff;
  j["components"] = report.components;
  j["alignment"] = "components sorted by descending weight";
  auto& phones = j["phones"] = nlohmann::ordered_json::array();
  for (const auto& p : report.phones)
    phones.push_back({{"index", p.phone_index}, {"phone", p.phone}, {"p", p.p}, {"included", p.included}});
  j["included"] = report.included_phones();
  return j.dump(2);
}

std::string report_csv(const PhoneDifferenceReport& report) {
  std::string out = "phone_index,phone,p,included\n";
  for (const auto& p : report.phones)
    out += fmt::format("{},{},{},{}\n", p.phone_index, csv::escape(p.phone), format_double(p.p), p.included ? 1 : 0);
  return out;
}

std::string report_text(const CoefficientReport& report) {
  std::string out = fmt::format("LTAS LASSO coefficients (alpha {}), {} of {} nonzero\n", report.alpha,
                                report.nonzero, report.coefficients.size());
  out += "positive weights push toward the pathological class\n\n";
  out += fmt::format("{:<6} {:<5} {:>10} {:>14}\n", "index", "half", "freq_hz", "weight");
  for (const auto& c : report.coefficients)
    if (c.weight != 0.0)
      out += fmt::format("{:<6} {:<5} {:>10.1f} {:>14.6g}\n", c.index, half_name(c.half), c.frequency_hz, c.weight);
  out += fmt::format("\nclusters (>= {} adjacent same-sign coefficients): {}\n", kMinClusterLength,
                     report.clusters.size());
  for (const auto& c : report.clusters)
    out += fmt::format("  {} {:<4} bins {}-{}  {:.1f}-{:.1f} Hz ({} coefficients)\n", c.sign > 0 ? "+" : "-",
                       half_name(c.half), c.first_index, c.last_index, c.low_hz, c.high_hz, c.length());
  return out;
}

std::string report_json(const CoefficientReport& report) {
  nlohmann::ordered_json j;
  j["alpha"] = report.alpha;
  j["nfft"] = report.meta.nfft;
  j["sample_rate"] = report.meta.sample_rate;
  j["nonzero"] = report.nonzero;
  auto& coefficients = j["coefficients"] = nlohmann::ordered_json::array();
  for (const auto& c : report.coefficients)
    if (c.weight != 0.0)
      coefficients.push_back({{"index", c.index},
                              {"half", half_name(c.half)},
                              {"bin", c.bin},
                              {"frequency_hz", c.frequency_hz},
                              {"weight", c.weight}});
  auto& clusters = j["clusters"] = nlohmann::ordered_json::array();
  for (const auto& c : report.clusters)
    clusters.push_back({{"sign", c.sign},
                        {"half", half_name(c.half)},
                        {"first_index", c.first_index},
                        {"last_index", c.last_index},
                        {"low_hz", c.low_hz},
                        {"high_hz", c.high_hz}});
  return j.dump(2);
}

std::string report_csv(const CoefficientReport& report) {
  std::string out = "index,half,bin,frequency_hz,weight\n";
  for (const auto& c : report.coefficients)
    out += fmt::format("{},{},{},{},{}\n", c.index, half_name(c.half), c.bin, format_double(c.frequency_hz),
                       format_double(c.weight));
  return out;
}

}  // namespace psd
