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

#include <cmath>
#include <random>

#include "psd/audio.hpp"
#include "psd/features.hpp"

namespace {

psd::AudioBuffer noise_seconds(double seconds) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 0.1);
  psd::AudioBuffer b;
  b.samples.resize(static_cast<std::size_t>(seconds * 16000));
  for (auto& s : b.samples) s = n(rng);
  return b;
}

void run_kind(benchmark::State& state, psd::FeatureKind kind) {
  const auto b = noise_seconds(5.0);
  for (auto _ : state) benchmark::DoNotOptimize(psd::extract_features(kind, b, {}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(b.samples.size()));
}

void BM_Spectrogram(benchmark::State& s) { run_kind(s, psd::FeatureKind::spectrogram); }
void BM_Mfcc(benchmark::State& s) { run_kind(s, psd::FeatureKind::mfcc); }
void BM_Plp(benchmark::State& s) { run_kind(s, psd::FeatureKind::plp); }
void BM_Ltas(benchmark::State& s) { run_kind(s, psd::FeatureKind::ltas); }
void BM_Pitch(benchmark::State& s) { run_kind(s, psd::FeatureKind::pitch); }

void BM_Resample48To16(benchmark::State& state) {
  auto b = noise_seconds(5.0);
  b.sample_rate = 48000;
  for (auto _ : state) benchmark::DoNotOptimize(psd::resample(b, 16000));
}

void BM_Vad(benchmark::State& state) {
  const auto b = noise_seconds(5.0);
  for (auto _ : state) benchmark::DoNotOptimize(psd::vad(b, psd::VadOptions{}));
}

}  // namespace

BENCHMARK(BM_Spectrogram)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Mfcc)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Plp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ltas)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Pitch)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Resample48To16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Vad)->Unit(benchmark::kMillisecond);
