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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "psd/error.hpp"
#include "psd/explain.hpp"
#include "support/generators.hpp"

using namespace psd;

namespace {

GmmModel ppg_model(testing::Gen& g, int m) {
  GmmModel model;
  model.feature_kind = FeatureKind::ppg;
  model.weights = Vector(m);
  for (int j = 0; j < m; ++j) model.weights(j) = g.uniform(0.1, 1.0);
  model.weights /= model.weights.sum();
  model.means = g.matrix(m, 39, 0.0, 0.1);
  model.variances = RowMatrix::Constant(m, 39, 0.01);
  return model;
}

// Direct loop: sort components by weight descending, difference, average.
std::vector<double> phone_difference_oracle(const GmmModel& a, const GmmModel& b) {
  auto order = [](const GmmModel& m) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(m.components()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return m.weights(x) > m.weights(y); });
    return idx;
  };
  const auto oa = order(a), ob = order(b);
  std::vector<double> p(39, 0.0);
  for (int k = 0; k < 39; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < oa.size(); ++j) sum += a.means(oa[j], k) - b.means(ob[j], k);
    p[static_cast<std::size_t>(k)] = sum / static_cast<double>(oa.size());
  }
  return p;
}

std::vector<double> by_index(const PhoneDifferenceReport& r) {
  std::vector<double> p(r.phones.size());
  for (const auto& ph : r.phones) p[ph.phone_index] = ph.p;
  return p;
}

LassoModel ltas_model(std::vector<double> weights, std::vector<double> scale = {}) {
  LassoModel m;
  m.feature_kind = FeatureKind::ltas;
  m.weights = Eigen::Map<Vector>(weights.data(), static_cast<Eigen::Index>(weights.size()));
  m.feature_mean = Vector::Zero(m.weights.size());
  m.feature_scale = scale.empty() ? Vector::Ones(m.weights.size())
                                  : Vector(Eigen::Map<Vector>(scale.data(), static_cast<Eigen::Index>(scale.size())));
  return m;
}

}  // namespace

TEST_CASE("identical models give zero differences and no inclusions") {
  testing::Gen g(1);
  const auto m = ppg_model(g, 4);
  const auto r = gmm_phone_difference(m, m);
  REQUIRE(r.phones.size() == 39);
  for (const auto& ph : r.phones) CHECK(ph.p == 0.0);
  CHECK(r.included_phones().empty());
}

TEST_CASE("raising one healthy phone mean gives a negative included difference") {
  testing::Gen g(2);
  const auto path = ppg_model(g, 4);
  auto healthy = path;
  healthy.means.col(5).array() += 0.02;
  std::vector<std::string> labels;
  for (int k = 0; k < 39; ++k) labels.push_back(k == 5 ? "t" : "ph" + std::to_string(k));
  const auto r = gmm_phone_difference(path, healthy, kDefaultPhoneCutoff, labels);
  REQUIRE(r.phones.front().phone == "t");
  CHECK(r.phones.front().p == doctest::Approx(-0.02).epsilon(1e-12));
  CHECK(r.phones.front().included);
  CHECK(r.included_phones() == std::vector<std::string>{"t"});
}

TEST_CASE("phone differences match the direct loop oracle within 1e-12") {
  testing::for_all(30, 307, [](testing::Gen& g, std::uint64_t) {
    const int m = g.integer(1, 8);
    const auto a = ppg_model(g, m), b = ppg_model(g, m);
    const auto got = by_index(gmm_phone_difference(a, b));
    const auto want = phone_difference_oracle(a, b);
    for (std::size_t k = 0; k < 39; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);
  });
}

TEST_CASE("swapping the models negates every difference exactly") {
  testing::for_all(20, 311, [](testing::Gen& g, std::uint64_t) {
    const int m = g.integer(1, 8);
    const auto a = ppg_model(g, m), b = ppg_model(g, m);
    const auto ab = by_index(gmm_phone_difference(a, b));
    const auto ba = by_index(gmm_phone_difference(b, a));
    for (std::size_t k = 0; k < 39; ++k) CHECK(ab[k] == -ba[k]);
  });
}

TEST_CASE("report is sorted by magnitude and raising the cutoff never adds phones") {
  testing::for_all(20, 313, [](testing::Gen& g, std::uint64_t) {
    const auto a = ppg_model(g, 4), b = ppg_model(g, 4);
    std::vector<std::string> previous;
    bool first = true;
    for (double cutoff : {0.001, 0.005, 0.01}) {
      const auto r = gmm_phone_difference(a, b, cutoff);
      for (std::size_t i = 1; i < r.phones.size(); ++i) CHECK(std::abs(r.phones[i - 1].p) >= std::abs(r.phones[i].p));
      for (const auto& ph : r.phones) CHECK(ph.included == (std::abs(ph.p) > cutoff));
      const auto inc = r.included_phones();
      if (!first)
        for (const auto& name : inc) CHECK(std::find(previous.begin(), previous.end(), name) != previous.end());
      previous = inc;
      first = false;
    }
  });
}

TEST_CASE("phone difference input errors") {
  testing::Gen g(3);
  const auto a = ppg_model(g, 4);
  CHECK_THROWS_AS(gmm_phone_difference(a, ppg_model(g, 3)), DataError);
  auto mfcc = a;
  mfcc.feature_kind = FeatureKind::mfcc;
  CHECK_THROWS_AS(gmm_phone_difference(a, mfcc), DataError);
  const std::vector<std::string> short_labels{"a"};
  CHECK_THROWS_AS(gmm_phone_difference(a, a, 0.005, short_labels), DataError);
  CHECK_THROWS_AS(gmm_phone_difference(a, a, -1.0), UsageError);
}

TEST_CASE("phone difference reports render in three formats") {
  testing::Gen g(4);
  const auto r = gmm_phone_difference(ppg_model(g, 2), ppg_model(g, 2));
  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["phones"].size() == 39);
  const auto csv = report_csv(r);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 40);
  CHECK_FALSE(report_text(r).empty());
}

TEST_CASE("all-zero LASSO model has no clusters") {
  const auto r = lasso_coefficients(ltas_model(std::vector<double>(10, 0.0)), SpectroMeta{8, 16000});
  CHECK(r.clusters.empty());
  CHECK(r.nonzero == 0);
}

TEST_CASE("cluster rule excludes singletons") {
  const std::vector<double> w{0, 1, 2, 0, -1};
  const auto c = find_clusters(w, 5, SpectroMeta{8, 16000});
  REQUIRE(c.size() == 1);
  CHECK(c[0].sign == 1);
  CHECK(c[0].first_index == 1);
  CHECK(c[0].last_index == 2);
  CHECK(c[0].low_hz == 2000.0);
  CHECK(c[0].high_hz == 4000.0);
}

TEST_CASE("clusters never cross the mean/std boundary or a sign change") {
  const std::vector<double> w{0, 0, 0, 1, 1, 1, 1, -1, -1, 0};
  const auto c = find_clusters(w, 5, SpectroMeta{8, 16000});
  REQUIRE(c.size() == 3);
  CHECK(c[0].half == LtasHalf::mean);
  CHECK(c[0].first_index == 3);
  CHECK(c[0].last_index == 4);
  CHECK(c[1].half == LtasHalf::std);
  CHECK(c[1].first_index == 5);
  CHECK(c[1].last_index == 6);
  CHECK(c[2].sign == -1);
}

TEST_CASE("random weight vectors give disjoint clusters over nonzero runs") {
  testing::for_all(50, 317, [](testing::Gen& g, std::uint64_t) {
    std::vector<double> w(2 * 17);
    for (auto& v : w) v = g.coin(0.4) ? 0.0 : (g.coin() ? 1.0 : -1.0) * g.uniform(0.1, 1.0);
    const auto c = find_clusters(w, 17, SpectroMeta{32, 16000});
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(c[i].length() >= kMinClusterLength);
      for (std::size_t k = c[i].first_index; k <= c[i].last_index; ++k) CHECK(w[k] * c[i].sign > 0.0);
      if (i > 0) CHECK(c[i].first_index > c[i - 1].last_index);
    }
  });
}

TEST_CASE("coefficients are annotated with bin frequencies and unstandardized") {
  const int bins = 257;
  std::vector<double> w(2 * bins, 0.0), scale(2 * bins, 1.0);
  w[96] = 2.0;
  scale[96] = 4.0;
  w[bins + 96] = -1.0;
  const auto r = lasso_coefficients(ltas_model(w, scale), SpectroMeta{512, 16000});
  REQUIRE(r.coefficients.size() == 2 * bins);
  CHECK(r.coefficients[96].frequency_hz == 3000.0);
  CHECK(r.coefficients[96].weight == 0.5);
  CHECK(r.coefficients[96].half == LtasHalf::mean);
  CHECK(r.coefficients[bins + 96].bin == 96);
  CHECK(r.coefficients[bins + 96].half == LtasHalf::std);
  CHECK(r.coefficients[bins + 96].frequency_hz == 3000.0);
  CHECK(r.nonzero == 2);
  CHECK(nlohmann::json::parse(report_json(r)).is_object());
  CHECK_FALSE(report_csv(r).empty());
  CHECK_FALSE(report_text(r).empty());
}

TEST_CASE("coefficient report input errors") {
  auto m = ltas_model(std::vector<double>(10, 0.0));
  CHECK_THROWS_AS(lasso_coefficients(m, SpectroMeta{512, 16000}), DataError);
  m.feature_kind = FeatureKind::mfcc;
  CHECK_THROWS_AS(lasso_coefficients(m, SpectroMeta{8, 16000}), DataError);
}
