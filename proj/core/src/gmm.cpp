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

#include "psd/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "psd/error.hpp"
#include "psd/parallel.hpp"

namespace psd {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kMinComponentMass = 1e-8;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Per-component constants for fast log-density evaluation.
struct Precomputed {
  RowMatrix inv_var;
  Vector log_norm;  // log w_j - 0.5 * sum_k log(2 pi var_jk)

  explicit Precomputed(const GmmModel& model)
      : inv_var(model.variances.cwiseInverse()), log_norm(model.components()) {
    for (Eigen::Index j = 0; j < model.components(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < model.dims(); ++k) s += kLog2Pi + std::log(model.variances(j, k));
      log_norm[j] = std::log(model.weights[j]) - 0.5 * s;
    }
  }

  // Fills log_joint[j] = log w_j N(x | j) and returns the log-sum-exp.
  double frame(const GmmModel& model, const double* x, std::vector<double>& log_joint) const {
    const Eigen::Index m = model.components(), d = model.dims();
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      const double* mu = model.means.row(j).data();
      const double* iv = inv_var.row(j).data();
      double q = 0.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = x[k] - mu[k];
        q += diff * diff * iv[k];
      }
      log_joint[static_cast<std::size_t>(j)] = log_norm[j] - 0.5 * q;
      best = std::max(best, log_joint[static_cast<std::size_t>(j)]);
    }
    double sum = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) sum += std::exp(log_joint[static_cast<std::size_t>(j)] - best);
    return best + std::log(sum);
  }
};

RowMatrix kmeans_pp_means(const RowMatrix& x, Eigen::Index m, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  RowMatrix centers(m, x.cols());
  std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Eigen::Index pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
  for (Eigen::Index c = 0; c < m; ++c) {
    centers.row(c) = x.row(pick);
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      dist[static_cast<std::size_t>(i)] = std::min(dist[static_cast<std::size_t>(i)], (x.row(i) - centers.row(c)).squaredNorm());
      total += dist[static_cast<std::size_t>(i)];
    }
    if (c + 1 == m) break;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n));
      continue;
    }
    const double target = uniform01(rng) * total;
    double acc = 0.0;
    pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += dist[static_cast<std::size_t>(i)];
      if (acc > target && dist[static_cast<std::size_t>(i)] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return centers;
}

Eigen::RowVectorXd floored_variance(const RowMatrix& x, double floor) {
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd mean = x.colwise().sum() / n;
  Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().sum() / n;
  return var.cwiseMax(floor);
}

nlohmann::ordered_json model_json(const GmmModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "psd.gmm";
  j["version"] = 1;
  j["feature_kind"] = to_string(model.feature_kind);
  j["m"] = model.components();
  j["d"] = model.dims();
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + model.weights.size());
  auto rows = [](const RowMatrix& a) {
    auto out = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      out.push_back(std::vector<double>(a.row(r).data(), a.row(r).data() + a.cols()));
    return out;
  };
  j["means"] = rows(model.means);
  j["variances"] = rows(model.variances);
  if (!model.column_labels.empty()) j["column_labels"] = model.column_labels;
  j["training"] = {{"seed", model.training.seed},
                   {"iterations", model.training.iterations},
                   {"final_loglik", model.training.final_loglik},
                   {"reinitializations", model.training.reinitializations},
                   {"converged", model.training.converged}};
  return j;
}

GmmModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "psd.gmm") throw DataError("gmm: not a psd.gmm document");
  if (j.value("version", 0) != 1) throw DataError("gmm: unsupported version");
  GmmModel model;
  model.feature_kind = parse_feature_kind(j.at("feature_kind").get<std::string>());
  const auto m = j.at("m").get<Eigen::Index>();
  const auto d = j.at("d").get<Eigen::Index>();
  const auto weights = j.at("weights").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(weights.size()) != m) throw DataError("gmm: weights length differs from m");
  model.weights = Eigen::Map<const Vector>(weights.data(), m);
  auto rows = [&](const nlohmann::json& a, const char* name) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != m) throw DataError(std::string("gmm: bad ") + name);
    RowMatrix out(m, d);
    for (Eigen::Index r = 0; r < m; ++r) {
      const auto row = a[static_cast<std::size_t>(r)].get<std::vector<double>>();
      if (static_cast<Eigen::Index>(row.size()) != d) throw DataError(std::string("gmm: bad row in ") + name);
      for (Eigen::Index c = 0; c < d; ++c) out(r, c) = row[static_cast<std::size_t>(c)];
    }
    return out;
  };
  model.means = rows(j.at("means"), "means");
  model.variances = rows(j.at("variances"), "variances");
  if (j.contains("column_labels")) model.column_labels = j["column_labels"].get<std::vector<std::string>>();
  if (j.contains("training")) {
    const auto& t = j["training"];
    model.training.seed = t.value("seed", std::uint64_t{0});
    model.training.iterations = t.value("iterations", 0);
    model.training.final_loglik = t.value("final_loglik", 0.0);
    model.training.reinitializations = t.value("reinitializations", 0);
    model.training.converged = t.value("converged", false);
  }
  // Serialized models may come from runs with a lower floor; only positivity is required here.
  model.validate(0.0);
  return model;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

void GmmModel::validate(double variance_floor) const {
  const Eigen::Index m = components();
  if (m < 1 || dims() < 1) throw DataError("gmm: empty model");
  if (weights.size() != m || variances.rows() != m || variances.cols() != dims())
    throw DataError("gmm: inconsistent parameter shapes");
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw DataError("gmm: weights do not sum to 1");
  if ((weights.array() <= 0.0).any()) throw DataError("gmm: non-positive mixture weight");
  if (!means.allFinite() || !variances.allFinite()) throw DataError("gmm: non-finite parameters");
  if ((variances.array() <= 0.0).any() || (variances.array() < variance_floor).any())
    throw DataError("gmm: variance below floor");
}

GmmFit fit_gmm(const RowMatrix& x, FeatureKind kind, const GmmFitOptions& options) {
  const Eigen::Index n = x.rows(), d = x.cols(), m = options.components;
  if (m < 1) throw UsageError("gmm: need at least one component");
  if (d < 1) throw DataError("gmm: zero-dimensional features");
  if (n < 10 * m)
    throw DataError("gmm: " + std::to_string(n) + " frames is too few for " + std::to_string(m) +
                    " components (need >= " + std::to_string(10 * m) + ")");
  if (!x.allFinite()) throw DataError("gmm: non-finite training frame");

  std::mt19937_64 rng(options.seed);
  const Eigen::RowVectorXd global_var = floored_variance(x, options.variance_floor);

  GmmFit fit;
  GmmModel& model = fit.model;
  model.feature_kind = kind;
  model.means = kmeans_pp_means(x, m, rng);
  model.variances = global_var.replicate(m, 1);
  model.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));

  RowMatrix resp(n, m);
  std::vector<double> log_joint(static_cast<std::size_t>(m));
  Eigen::Index worst_frame = 0;

  auto e_step = [&] {
    const Precomputed pre(model);
    double total = 0.0, worst = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = pre.frame(model, x.row(i).data(), log_joint);
      for (Eigen::Index j = 0; j < m; ++j) resp(i, j) = std::exp(log_joint[static_cast<std::size_t>(j)] - lse);
      total += lse;
      if (lse < worst) {
        worst = lse;
        worst_frame = i;
      }
    }
    return total / static_cast<double>(n);
  };

  // Returns true when a component had to be reseeded.
  auto m_step = [&] {
    bool reseeded = false;
    Vector mass = resp.colwise().sum().transpose();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mass[j] < kMinComponentMass) {
        model.means.row(j) = x.row(worst_frame);
        model.variances.row(j) = global_var;
        mass[j] = 1.0;
        reseeded = true;
        continue;
      }
      Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) mu += resp(i, j) * x.row(i);
      mu /= mass[j];
      Eigen::RowVectorXd var = Eigen::RowVectorXd::Zero(d);
      for (Eigen::Index i = 0; i < n; ++i) var += resp(i, j) * (x.row(i) - mu).array().square().matrix();
      var /= mass[j];
      model.means.row(j) = mu;
      model.variances.row(j) = var.cwiseMax(options.variance_floor);
    }
    model.weights = mass / mass.sum();
    return reseeded;
  };

  auto& history = fit.report.loglik_history;
  history.push_back(e_step());
  for (int it = 1; it <= options.max_iters; ++it) {
    const bool reseeded = m_step();
    if (reseeded) {
      fit.report.reinit_steps.push_back(history.size());
      ++model.training.reinitializations;
    }
    const double current = e_step();
    const double previous = history.back();
    history.push_back(current);
    fit.report.iterations = it;
    if (!std::isfinite(current)) throw NumericError("gmm: log-likelihood became non-finite");
    if (!reseeded && current - previous <= options.tol * std::abs(previous)) {
      fit.report.converged = true;
      break;
    }
  }

  model.training.seed = options.seed;
  model.training.iterations = fit.report.iterations;
  model.training.final_loglik = history.back();
  model.training.converged = fit.report.converged;
  model.validate(options.variance_floor);
  return fit;
}

Vector loglik(const GmmModel& model, const RowMatrix& frames) {
  if (frames.cols() != model.dims())
    throw DataError("gmm: feature dimension " + std::to_string(frames.cols()) + " does not match model dimension " +
                    std::to_string(model.dims()));
  const Precomputed pre(model);
  std::vector<double> log_joint(static_cast<std::size_t>(model.components()));
  Vector out(frames.rows());
  for (Eigen::Index i = 0; i < frames.rows(); ++i) out[i] = pre.frame(model, frames.row(i).data(), log_joint);
  return out;
}

RowMatrix stack_frames(std::span<const FeatureMatrix* const> parts) {
  Eigen::Index rows = 0, cols = -1;
  for (const auto* p : parts) {
    if (p->rows() == 0) continue;
    if (cols >= 0 && p->cols() != cols) throw DataError("stack_frames: dimension mismatch");
    cols = p->cols();
    rows += p->rows();
  }
  RowMatrix out(rows, std::max<Eigen::Index>(cols, 0));
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    if (p->rows() == 0) continue;
    out.middleRows(at, p->rows()) = p->data;
    at += p->rows();
  }
  return out;
}

void GmmDetector::validate() const {
  if (pathological.feature_kind != healthy.feature_kind) throw DataError("gmm detector: feature kinds differ");
  if (pathological.dims() != healthy.dims()) throw DataError("gmm detector: dimensions differ");
}

DetectionScore score_utterance(const GmmDetector& detector, const FeatureMatrix& frames) {
  if (frames.rows() == 0)
    throw EmptyUtteranceError("gmm: utterance has no frames (fully removed by VAD?); exclude it from scoring");
  if (frames.kind != detector.pathological.feature_kind)
    throw DataError("gmm: features are " + std::string(to_string(frames.kind)) + ", model expects " +
                    std::string(to_string(detector.pathological.feature_kind)));
  auto sorted_mean = [](Vector v) {
    std::sort(v.data(), v.data() + v.size());
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
    return s / static_cast<double>(v.size());
  };
  DetectionScore out;
  out.score = sorted_mean(loglik(detector.pathological, frames.data)) - sorted_mean(loglik(detector.healthy, frames.data));
  out.predicted = out.score > 0.0 ? Label::pathological : Label::healthy;
  return out;
}

TrainingData gather_training_frames(std::span<const LabeledUtterance> train) {
  std::vector<const FeatureMatrix*> path, healthy;
  TrainingData data;
  bool first = true;
  for (const auto& u : train) {
    if (first) {
      data.kind = u.features.kind;
      data.column_labels = u.features.column_labels;
      first = false;
    } else if (u.features.kind != data.kind) {
      throw DataError("training set mixes feature kinds");
    }
    (u.label == Label::pathological ? path : healthy).push_back(&u.features);
  }
  if (path.empty() || healthy.empty()) throw DataError("training set must contain both classes");
  data.pathological = stack_frames(path);
  data.healthy = stack_frames(healthy);
  return data;
}

GmmDetector train_gmm_detector(const TrainingData& data, const GmmFitOptions& options) {
  GmmDetector detector;
  detector.pathological = fit_gmm(data.pathological, data.kind, options).model;
  detector.healthy = fit_gmm(data.healthy, data.kind, options).model;
  detector.pathological.column_labels = data.column_labels;
  detector.healthy.column_labels = data.column_labels;
  return detector;
}

ScoreSet score_set(const GmmDetector& detector, std::span<const LabeledUtterance> utterances) {
  ScoreSet out;
  for (const auto& u : utterances) {
    const auto s = score_utterance(detector, u.features);
    out.add({u.utt_id, u.speaker_id, u.label, s.score, s.predicted});
  }
  return out;
}

GmmSweepResult sweep_components(const TrainingData& data, std::span<const LabeledUtterance> eval,
                                std::span<const int> grid, const GmmFitOptions& base, int jobs) {
  if (grid.empty()) throw UsageError("sweep: empty component grid");
  std::vector<SweepRow> rows(grid.size());
  std::vector<std::optional<GmmDetector>> detectors(grid.size());
  parallel_for(grid.size(), jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.value = grid[i];
    GmmFitOptions options = base;
    options.components = grid[i];
    try {
      detectors[i] = train_gmm_detector(data, options);
    } catch (const DataError& e) {
      row.status = std::string("skipped: ") + e.what();
      return;
    }
    const auto scores = score_set(*detectors[i], eval);
    row.trained = true;
    row.status = "ok";
    row.accuracy = accuracy(scores);
    if (scores.count(Label::healthy) > 0 && scores.count(Label::pathological) > 0) row.eer = eer(scores);
  });

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].trained) continue;
    if (!best || rows[i].accuracy > rows[*best].accuracy ||
        (rows[i].accuracy == rows[*best].accuracy && rows[i].value < rows[*best].value))
      best = i;
  }
  if (!best) throw DataError("sweep: no grid value could be trained (" + rows.front().status + ")");
  return {std::move(*detectors[*best]), std::move(rows), grid[*best]};
}

std::string serialize(const GmmModel& model) { return model_json(model).dump(2); }

std::string serialize(const GmmDetector& detector) {
  nlohmann::ordered_json j;
  j["format"] = "psd.gmm_detector";
  j["version"] = 1;
  j["m"] = detector.components();
  j["pathological"] = model_json(detector.pathological);
  j["healthy"] = model_json(detector.healthy);
  return j.dump(2);
}

GmmModel parse_gmm_model(std::string_view text) {
  try {
    return model_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("gmm: malformed model JSON: ") + e.what());
  }
}

GmmDetector parse_gmm_detector(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "psd.gmm_detector") throw DataError("gmm: not a psd.gmm_detector document");
    GmmDetector detector{model_from_json(j.at("pathological")), model_from_json(j.at("healthy"))};
    detector.validate();
    return detector;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("gmm: malformed detector JSON: ") + e.what());
  }
}

void save_detector(const std::filesystem::path& path, const GmmDetector& detector) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << serialize(detector) << '\n';
}

GmmDetector load_detector(const std::filesystem::path& path) { return parse_gmm_detector(read_text(path)); }

}  // namespace psd
