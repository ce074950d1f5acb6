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

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "psd/evaluation.hpp"
#include "psd/feature_matrix.hpp"
#include "psd/gmm.hpp"
#include "psd/types.hpp"

namespace psd {

/// L1-regularized linear regression on standardized features.
///
/// `weights` live in the standardized space; raw_weights() maps them back to
/// the original feature units. Columns that were constant during training
/// carry scale 1 and a weight pinned at zero.
struct LassoModel {
  Vector weights;
  double intercept = 0.0;
  double alpha = 0.1;
  Vector feature_mean;
  Vector feature_scale;
  FeatureKind feature_kind = FeatureKind::ltas;

  struct Training {
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
  } training;

  Eigen::Index dims() const { return weights.size(); }
  std::size_t nonzero() const;
  Vector raw_weights() const;
  double raw_intercept() const;
  // w . ((x - mean) / scale) + intercept for one feature row.
  double predict_row(const double* x) const;
  void validate() const;
};

double soft_threshold(double x, double lambda);

struct LassoFitOptions {
  double alpha = 0.1;
  int max_iters = 1000;
  // Stop once no coordinate moves by more than tol in a full cycle.
  double tol = 1e-7;
};

struct LassoFitReport {
  // Objective after each full coordinate cycle (index 0 = all-zero start).
  std::vector<double> objective_history;
  int iterations = 0;
  bool converged = false;
};

struct LassoFit {
  LassoModel model;
  LassoFitReport report;
};

// Minimizes (1/2n) ||y - Zw - b||^2 + alpha ||w||_1 by cyclic coordinate
// descent, Z the train-standardized design. y uses 0 = healthy, 1 = pathological.
LassoFit fit_lasso(const RowMatrix& x, const Vector& y, FeatureKind kind, const LassoFitOptions& options);

// Single-row input: the row prediction. Frame-level input: mean of per-frame
// predictions. Pathological iff score >= 0.5.
DetectionScore predict_utterance(const LassoModel& model, const FeatureMatrix& features);

struct RegressionData {
  RowMatrix x;  // one row per frame of every training utterance
  Vector y;
  FeatureKind kind = FeatureKind::ltas;
};

RegressionData gather_regression_rows(std::span<const LabeledUtterance> train);

ScoreSet score_set(const LassoModel& model, std::span<const LabeledUtterance> utterances);

struct LassoSweepResult {
  LassoModel model;
  std::vector<SweepRow> rows;
  double selected_alpha = 0.0;
};

inline const std::vector<double> kDefaultAlphaGrid{0.1, 0.01, 0.001, 0.0001};

// Ties on evaluation accuracy go to the larger alpha (sparser model).
LassoSweepResult sweep_alpha(const RegressionData& data, std::span<const LabeledUtterance> eval,
                             std::span<const double> grid, const LassoFitOptions& base, int jobs = 1);

std::string serialize(const LassoModel& model);
LassoModel parse_lasso_model(std::string_view json);
void save_lasso(const std::filesystem::path& path, const LassoModel& model);
LassoModel load_lasso(const std::filesystem::path& path);

}  // namespace psd
