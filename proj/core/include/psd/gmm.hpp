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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psd/evaluation.hpp"
#include "psd/feature_matrix.hpp"
#include "psd/types.hpp"

namespace psd {

inline constexpr double kDefaultVarianceFloor = 1e-4;

/// Diagonal-covariance Gaussian mixture.
struct GmmModel {
  Vector weights;       // m, positive, sums to 1
  RowMatrix means;      // m x d
  RowMatrix variances;  // m x d, >= variance floor
  FeatureKind feature_kind = FeatureKind::mfcc;
  std::vector<std::string> column_labels;

  struct Training {
    std::uint64_t seed = 0;
    int iterations = 0;
    double final_loglik = 0.0;
    int reinitializations = 0;
    bool converged = false;
  } training;

  Eigen::Index components() const { return means.rows(); }
  Eigen::Index dims() const { return means.cols(); }

  // Throws DataError when shapes or the weight/variance invariants are violated.
  void validate(double variance_floor = kDefaultVarianceFloor) const;
};

struct GmmFitOptions {
  int components = 4;
  std::uint64_t seed = 42;
  int max_iters = 100;
  // Stop once the mean log-likelihood gain drops below tol * |previous|.
  double tol = 1e-5;
  double variance_floor = kDefaultVarianceFloor;
};

struct GmmFitReport {
  // Mean per-frame log-likelihood of the initial model, then after each M-step.
  std::vector<double> loglik_history;
  // Indices into loglik_history whose preceding M-step reseeded a component.
  std::vector<std::size_t> reinit_steps;
  int iterations = 0;
  bool converged = false;
};

struct GmmFit {
  GmmModel model;
  GmmFitReport report;
};

/// EM with k-means++ seeding. Throws DataError when frames < 10 * components.
GmmFit fit_gmm(const RowMatrix& frames, FeatureKind kind, const GmmFitOptions& options);

// log sum_j w_j N(x | mu_j, diag var_j) per frame.
Vector loglik(const GmmModel& model, const RowMatrix& frames);

RowMatrix stack_frames(std::span<const FeatureMatrix* const> parts);

/// Class-conditional pair scored by frame-averaged log-likelihood difference.
struct GmmDetector {
  GmmModel pathological;
  GmmModel healthy;

  Eigen::Index components() const { return pathological.components(); }
  void validate() const;
};

// score = mean loglik(pathological) - mean loglik(healthy); pathological iff
// score > 0. Per-frame terms are summed in sorted order so frame order does
// not matter. Throws EmptyUtteranceError on zero frames.
DetectionScore score_utterance(const GmmDetector& detector, const FeatureMatrix& frames);

struct TrainingData {
  RowMatrix pathological;
  RowMatrix healthy;
  FeatureKind kind = FeatureKind::mfcc;
  std::vector<std::string> column_labels;
};

TrainingData gather_training_frames(std::span<const LabeledUtterance> train);

GmmDetector train_gmm_detector(const TrainingData& data, const GmmFitOptions& options);

ScoreSet score_set(const GmmDetector& detector, std::span<const LabeledUtterance> utterances);

/// One candidate of a hyperparameter sweep.
struct SweepRow {
  double value = 0.0;  // m or alpha
  bool trained = false;
  std::string status;  // "ok" or why the candidate was skipped
  double accuracy = 0.0;
  std::optional<double> eer;
  std::size_t nonzero_weights = 0;  // LASSO only
};

struct GmmSweepResult {
  GmmDetector detector;
  std::vector<SweepRow> rows;
  int selected_components = 0;
};

inline const std::vector<int> kDefaultComponentGrid{4, 8, 10, 12, 16};

// Trains one detector per grid value and keeps the most accurate on `eval`;
// ties go to the smaller m. Grid values with too few training frames are
// skipped and reported.
GmmSweepResult sweep_components(const TrainingData& data, std::span<const LabeledUtterance> eval,
                                std::span<const int> grid, const GmmFitOptions& base, int jobs = 1);

std::string serialize(const GmmModel& model);
std::string serialize(const GmmDetector& detector);
GmmModel parse_gmm_model(std::string_view json);
GmmDetector parse_gmm_detector(std::string_view json);
void save_detector(const std::filesystem::path& path, const GmmDetector& detector);
GmmDetector load_detector(const std::filesystem::path& path);

}  // namespace psd
