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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "psd/gmm.hpp"
#include "psd/lasso.hpp"

namespace psd {

inline constexpr double kDefaultPhoneCutoff = 0.005;

struct PhoneDifference {
  std::size_t phone_index = 0;
  std::string phone;
  // Mean over aligned components of pathological minus healthy posterior mean.
  // Negative: phone less likely in pathological speech.
  double p = 0.0;
  bool included = false;  // |p| > cutoff
};

struct PhoneDifferenceReport {
  double cutoff = kDefaultPhoneCutoff;
  int components = 0;
  std::vector<PhoneDifference> phones;  // sorted by |p| descending, ties by index

  std::vector<std::string> included_phones() const;
};

/// Difference model over a pair of PPG-trained GMMs.
///
/// Components of each model are aligned by sorting on descending weight
/// (stable on index), then differenced pairwise per phone dimension.
PhoneDifferenceReport gmm_phone_difference(const GmmModel& pathological, const GmmModel& healthy,
                                           double cutoff = kDefaultPhoneCutoff,
                                           std::span<const std::string> phone_labels = {});

/// Sample rate and FFT size behind an LTAS feature vector.
struct SpectroMeta {
  int nfft = 512;
  int sample_rate = 16000;

  int bins() const { return nfft / 2 + 1; }
  double bin_hz(int bin) const { return static_cast<double>(bin) * sample_rate / nfft; }
};

enum class LtasHalf { mean, std };

struct CoefficientEntry {
  std::size_t index = 0;
  LtasHalf half = LtasHalf::mean;
  int bin = 0;
  double frequency_hz = 0.0;
  double weight = 0.0;  // unstandardized; positive pushes toward pathological
};

/// Maximal run of at least two adjacent nonzero coefficients of one sign,
/// never crossing the mean/std boundary.
struct CoefficientCluster {
  int sign = 0;
  LtasHalf half = LtasHalf::mean;
  std::size_t first_index = 0;
  std::size_t last_index = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;

  std::size_t length() const { return last_index - first_index + 1; }
};

struct CoefficientReport {
  SpectroMeta meta;
  double alpha = 0.0;
  std::vector<CoefficientEntry> coefficients;
  std::vector<CoefficientCluster> clusters;
  std::size_t nonzero = 0;
};

inline constexpr std::size_t kMinClusterLength = 2;

CoefficientReport lasso_coefficients(const LassoModel& model, const SpectroMeta& meta);

// Clusters over an arbitrary coefficient vector split into halves of `half_size`.
std::vector<CoefficientCluster> find_clusters(std::span<const double> weights, std::size_t half_size,
                                              const SpectroMeta& meta);

std::string report_text(const PhoneDifferenceReport& report);
std::string report_json(const PhoneDifferenceReport& report);
std::string report_csv(const PhoneDifferenceReport& report);
std::string report_text(const CoefficientReport& report);
std::string report_json(const CoefficientReport& report);
std::string report_csv(const CoefficientReport& report);

}  // namespace psd
