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

#include <benchmark/benchmark.h>

#include <random>

#include "psd/gmm.hpp"
#include "psd/lasso.hpp"

namespace {

psd::RowMatrix random_rows(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  psd::RowMatrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
  return x;
}

void BM_GmmFit(benchmark::State& state) {
  const auto x = random_rows(5000, 13, 1);
  psd::GmmFitOptions opts;
  opts.components = static_cast<int>(state.range(0));
  opts.max_iters = 20;
  opts.tol = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(psd::fit_gmm(x, psd::FeatureKind::mfcc, opts));
}

void BM_GmmLoglik(benchmark::State& state) {
  const auto x = random_rows(5000, 13, 2);
  psd::GmmFitOptions opts;
  opts.components = 16;
  opts.max_iters = 5;
  const auto model = psd::fit_gmm(x, psd::FeatureKind::mfcc, opts).model;
  for (auto _ : state) benchmark::DoNotOptimize(psd::loglik(model, x));
  state.SetItemsProcessed(state.iterations() * x.rows());
}

void BM_LassoFitLtas(benchmark::State& state) {
  const auto x = random_rows(300, 514, 3);
  Eigen::VectorXd y(300);
  for (Eigen::Index i = 0; i < 300; ++i) y(i) = x(i, 0) + 0.5 * x(i, 7) > 0 ? 1.0 : 0.0;
  psd::LassoFitOptions opts;
  opts.alpha = 1.0 / static_cast<double>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(psd::fit_lasso(x, y, psd::FeatureKind::ltas, opts));
}

}  // namespace

BENCHMARK(BM_GmmFit)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GmmLoglik)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LassoFitLtas)->Arg(10)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
