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

#include "psd/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>

#include "psd/error.hpp"
#include "psd/parallel.hpp"

namespace psd {
namespace {

constexpr double kConstantColumnScale = 1e-12;

}  // namespace

std::size_t LassoModel::nonzero() const {
  return static_cast<std::size_t>((weights.array() != 0.0).count());
}

Vector LassoModel::raw_weights() const { return weights.cwiseQuotient(feature_scale); }

double LassoModel::raw_intercept() const { return intercept - raw_weights().dot(feature_mean); }

double LassoModel::predict_row(const double* x) const {
  double s = intercept;
  for (Eigen::Index j = 0; j < weights.size(); ++j)
    if (weights[j] != 0.0) s += weights[j] * (x[j] - feature_mean[j]) / feature_scale[j];
  return s;
}

void LassoModel::validate() const {
  if (feature_mean.size() != weights.size() || feature_scale.size() != weights.size())
    throw DataError("lasso: inconsistent parameter shapes");
  if (!weights.allFinite() || !std::isfinite(intercept)) throw DataError("lasso: non-finite parameters");
  if ((feature_scale.array() <= 0.0).any()) throw DataError("lasso: non-positive feature scale");
  if (!(alpha > 0.0)) throw DataError("lasso: alpha must be positive");
}

double soft_threshold(double x, double lambda) {
  if (x > lambda) return x - lambda;
  if (x < -lambda) return x + lambda;
  return 0.0;
}

LassoFit fit_lasso(const RowMatrix& x, const Vector& y, FeatureKind kind, const LassoFitOptions& options) {
  const Eigen::Index n = x.rows(), d = x.cols();
  if (!(options.alpha > 0.0)) throw UsageError("lasso: alpha must be positive");
  if (y.size() != n) throw DataError("lasso: label count differs from row count");
  if (n < 2) throw DataError("lasso: need at least 2 training rows");
  if (d < 1) throw DataError("lasso: zero-dimensional features");
  if (!x.allFinite()) throw DataError("lasso: non-finite feature value");
  if ((y.array() != 0.0).all() || (y.array() != 1.0).all())
    throw DataError("lasso: both classes must be present in the training labels");

  const double inv_n = 1.0 / static_cast<double>(n);
  LassoFit fit;
  LassoModel& model = fit.model;
  model.alpha = options.alpha;
  model.feature_kind = kind;
  model.feature_mean = (x.colwise().sum() * inv_n).transpose();
  model.feature_scale = Vector::Ones(d);
  std::vector<bool> pinned(static_cast<std::size_t>(d), false);

  Eigen::MatrixXd z(n, d);  // column-major for coordinate sweeps
  for (Eigen::Index j = 0; j < d; ++j) {
    z.col(j) = x.col(j).array() - model.feature_mean[j];
    const double scale = std::sqrt(z.col(j).squaredNorm() * inv_n);
    if (scale > kConstantColumnScale * std::max(1.0, std::abs(model.feature_mean[j]))) {
      model.feature_scale[j] = scale;
      z.col(j) /= scale;
    } else {
      pinned[static_cast<std::size_t>(j)] = true;
    }
  }
  Vector col_norm(d);
  for (Eigen::Index j = 0; j < d; ++j) col_norm[j] = z.col(j).squaredNorm() * inv_n;

  model.intercept = y.sum() * inv_n;
  model.weights = Vector::Zero(d);
  Vector residual = y.array() - model.intercept;

  auto objective = [&] { return 0.5 * inv_n * residual.squaredNorm() + options.alpha * model.weights.lpNorm<1>(); };
  auto& history = fit.report.objective_history;
  history.push_back(objective());

  for (int it = 1; it <= options.max_iters; ++it) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (pinned[static_cast<std::size_t>(j)]) continue;
      const double old = model.weights[j];
      const double rho = z.col(j).dot(residual) * inv_n + col_norm[j] * old;
      const double updated = soft_threshold(rho, options.alpha) / col_norm[j];
      if (updated != old) {
        residual -= (updated - old) * z.col(j);
        model.weights[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    history.push_back(objective());
    fit.report.iterations = it;
    if (max_change < options.tol) {
      fit.report.converged = true;
      break;
    }
  }
  if (!model.weights.allFinite()) throw NumericError("lasso: coordinate descent diverged");

  model.training.iterations = fit.report.iterations;
  model.training.converged = fit.report.converged;
  model.training.objective = history.back();
  return fit;
}

DetectionScore predict_utterance(const LassoModel& model, const FeatureMatrix& features) {
  if (features.rows() == 0)
    throw EmptyUtteranceError("lasso: utterance has no frames (fully removed by VAD?); exclude it from scoring");
  if (features.cols() != model.dims())
    throw DataError("lasso: feature dimension " + std::to_string(features.cols()) + " does not match model dimension " +
                    std::to_string(model.dims()));
  std::vector<double> per_frame(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    per_frame[static_cast<std::size_t>(i)] = model.predict_row(features.data.row(i).data());
  std::sort(per_frame.begin(), per_frame.end());
  double sum = 0.0;
  for (double v : per_frame) sum += v;
  DetectionScore out;
  out.score = sum / static_cast<double>(per_frame.size());
  out.predicted = out.score >= 0.5 ? Label::pathological : Label::healthy;
  return out;
}

RegressionData gather_regression_rows(std::span<const LabeledUtterance> train) {
  RegressionData data;
  Eigen::Index rows = 0, cols = -1;
  for (const auto& u : train) {
    if (cols >= 0 && u.features.cols() != cols && u.features.rows() > 0)
      throw DataError("training set mixes feature dimensions");
    if (u.features.rows() > 0) cols = u.features.cols();
    rows += u.features.rows();
  }
  if (!train.empty()) data.kind = train.front().features.kind;
  data.x.resize(rows, std::max<Eigen::Index>(cols, 0));
  data.y.resize(rows);
  Eigen::Index at = 0;
  for (const auto& u : train) {
    if (u.features.kind != data.kind) throw DataError("training set mixes feature kinds");
    if (u.features.rows() == 0) continue;
    data.x.middleRows(at, u.features.rows()) = u.features.data;
    data.y.segment(at, u.features.rows()).setConstant(label_value(u.label));
    at += u.features.rows();
  }
  return data;
}

ScoreSet score_set(const LassoModel& model, std::span<const LabeledUtterance> utterances) {
  ScoreSet out;
  for (const auto& u : utterances) {
    const auto s = predict_utterance(model, u.features);
    out.add({u.utt_id, u.speaker_id, u.label, s.score, s.predicted});
  }
  return out;
}

LassoSweepResult sweep_alpha(const RegressionData& data, std::span<const LabeledUtterance> eval,
                             std::span<const double> grid, const LassoFitOptions& base, int jobs) {
  if (grid.empty()) throw UsageError("sweep: empty alpha grid");
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::optional<LassoModel>> models(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    LassoFitOptions options = base;
    options.alpha = grid[i];
    models[i] = fit_lasso(data.x, data.y, data.kind, options).model;
    const auto scores = score_set(*models[i], eval);
    auto& row = rows[i];
    row.value = grid[i];
    row.trained = true;
    row.status = "ok";
    row.accuracy = accuracy(scores);
    row.nonzero_weights = models[i]->nonzero();
    if (scores.count(Label::healthy) > 0 && scores.count(Label::pathological) > 0) row.eer = eer(scores);
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].accuracy > rows[best].accuracy ||
        (rows[i].accuracy == rows[best].accuracy && rows[i].value > rows[best].value))
      best = i;
  return {std::move(*models[best]), std::move(rows), grid[best]};
}

std::string serialize(const LassoModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "psd.lasso";
  j["version"] = 1;
  j["feature_kind"] = to_string(model.feature_kind);
  j["alpha"] = model.alpha;
  j["d"] = model.dims();
  j["intercept"] = model.intercept;
  auto weights = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < model.weights.size(); ++i)
    if (model.weights[i] != 0.0) weights.push_back({i, model.weights[i]});
  j["weights"] = std::move(weights);
  j["feature_mean"] = std::vector<double>(model.feature_mean.data(), model.feature_mean.data() + model.feature_mean.size());
  j["feature_scale"] =
      std::vector<double>(model.feature_scale.data(), model.feature_scale.data() + model.feature_scale.size());
  j["training"] = {{"iterations", model.training.iterations},
                   {"converged", model.training.converged},
                   {"objective", model.training.objective}};
  return j.dump(2);
}

LassoModel parse_lasso_model(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "psd.lasso") throw DataError("lasso: not a psd.lasso document");
    if (j.value("version", 0) != 1) throw DataError("lasso: unsupported version");
    LassoModel model;
    model.feature_kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
    model.alpha = j.at("alpha").get<double>();
    model.intercept = j.at("intercept").get<double>();
    const auto d = j.at("d").get<Eigen::Index>();
    const auto mean = j.at("feature_mean").get<std::vector<double>>();
    const auto scale = j.at("feature_scale").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(mean.size()) != d || static_cast<Eigen::Index>(scale.size()) != d)
      throw DataError("lasso: standardization vectors differ from d");
    model.feature_mean = Eigen::Map<const Vector>(mean.data(), d);
    model.feature_scale = Eigen::Map<const Vector>(scale.data(), d);
    model.weights = Vector::Zero(d);
    for (const auto& pair : j.at("weights")) {
      const auto index = pair.at(0).get<Eigen::Index>();
      if (index < 0 || index >= d) throw DataError("lasso: weight index out of range");
      model.weights[index] = pair.at(1).get<double>();
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      model.training.iterations = t.value("iterations", 0);
      model.training.converged = t.value("converged", false);
      model.training.objective = t.value("objective", 0.0);
    }
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("lasso: malformed model JSON: ") + e.what());
  }
}

void save_lasso(const std::filesystem::path& path, const LassoModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize(model) << '\n';
}

LassoModel load_lasso(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return parse_lasso_model(s.str());
}

}  // namespace psd
