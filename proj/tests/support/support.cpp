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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <unistd.h>

#include "support/generators.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace psd::testing {
namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  path_ = fs::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(stamp));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

RowMatrix Gen::matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(lo, hi);
  return m;
}

RowMatrix Gen::normal_matrix(Eigen::Index rows, Eigen::Index cols, double sd) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(0.0, sd);
  return m;
}

std::vector<double> Gen::samples(std::size_t n, double amplitude) {
  std::vector<double> out(n);
  for (auto& v : out) v = uniform(-amplitude, amplitude);
  return out;
}

void for_all(int cases, std::uint64_t seed, const std::function<void(Gen&, std::uint64_t)>& property) {
  std::mt19937_64 seeds(seed);
  for (int c = 0; c < cases; ++c) {
    const auto case_seed = seeds();
    Gen gen(case_seed);
    try {
      property(gen, case_seed);
    } catch (const std::exception& e) {
      throw std::runtime_error("property failed for case seed " + std::to_string(case_seed) + ": " + e.what());
    }
  }
}

AudioBuffer tilt_noise(std::mt19937_64& rng, double coefficient, double seconds, int sample_rate, double gain) {
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::lround(seconds * sample_rate));
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(n);
  const std::size_t burst = static_cast<std::size_t>(0.4 * sample_rate);
  const std::size_t gap = static_cast<std::size_t>(0.1 * sample_rate);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = noise(rng);
    const bool active = (i % (burst + gap)) < burst;
    out.samples[i] = gain * (active ? 1.0 : 0.01) * (x + coefficient * prev) / 4.0;
    prev = x;
  }
  for (double& v : out.samples) v = std::clamp(v, -1.0, 1.0);
  return out;
}

void write_wav_file(const fs::path& path, const AudioBuffer& buffer) {
  fs::create_directories(path.parent_path());
  write_wav(path, buffer, WavEncoding::pcm16);
}

fs::path write_synthetic_corpus(const fs::path& dir, const SyntheticCorpusOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<UtteranceRecord> records;
  std::vector<Label> shuffled;
  for (std::size_t s = 0; s < 2 * options.speakers_per_class; ++s)
    shuffled.push_back(s % 2 == 0 ? Label::healthy : Label::pathological);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  for (std::size_t s = 0; s < 2 * options.speakers_per_class; ++s) {
    const bool upward = s % 2 == 1;
    const Label label = options.shuffle_labels ? shuffled[s] : (upward ? Label::pathological : Label::healthy);
    const double magnitude = 0.8 + 0.15 * unit(rng);
    const double coefficient = upward ? -magnitude : magnitude;
    const double gain = 0.5 + 0.5 * unit(rng);
    const bool test = s / 2 < options.test_speakers_per_class;
    const std::string speaker = "spk" + std::to_string(100 + s);
    for (std::size_t u = 0; u < options.utterances_per_speaker; ++u) {
      const std::string id = speaker + "_u" + std::to_string(u);
      const double seconds = options.seconds * (0.9 + 0.2 * unit(rng));
      const auto audio = tilt_noise(rng, coefficient, seconds, options.sample_rate, gain);
      const fs::path rel = fs::path("wav") / (id + ".wav");
      write_wav_file(dir / rel, audio);
      records.push_back({id, speaker, label, test ? Split::test : Split::train, rel, audio.duration_s()});
    }
  }
  const auto manifest = dir / "manifest.csv";
  write_manifest(manifest, records);
  return manifest;
}

AudioBuffer sine(double hz, double seconds, int sample_rate, double amplitude) {
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.resize(static_cast<std::size_t>(std::lround(seconds * sample_rate)));
  for (std::size_t i = 0; i < out.samples.size(); ++i)
    out.samples[i] = amplitude * std::sin(2.0 * M_PI * hz * static_cast<double>(i) / sample_rate);
  return out;
}

}  // namespace psd::testing
