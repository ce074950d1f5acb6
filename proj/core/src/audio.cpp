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

#include "psd/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "psd/error.hpp"

namespace psd {
namespace {

constexpr double kLogEnergyFloor = 1e-10;
constexpr double kPcm16Scale = 32768.0;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

double kaiser(double r, double beta) {
  const double arg = std::max(0.0, 1.0 - r * r);
  return std::cyl_bessel_i(0.0, beta * std::sqrt(arg)) / std::cyl_bessel_i(0.0, beta);
}

}  // namespace

AudioBuffer downmix(const MultiChannelAudio& audio) {
  if (audio.channels.empty() || audio.frames() == 0) throw DataError("downmix: empty buffer");
  const std::size_t n = audio.frames();
  for (const auto& ch : audio.channels)
    if (ch.size() != n) throw DataError("downmix: channels differ in length");

  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  if (audio.channels.size() == 1) {
    out.samples = audio.channels.front();
    return out;
  }
  const double count = static_cast<double>(audio.channels.size());
  out.samples.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& ch : audio.channels) sum += ch[i];
    out.samples[i] = sum / count;
  }
  return out;
}

AudioBuffer resample(const AudioBuffer& buffer, int target_rate, const ResamplerOptions& options) {
  if (target_rate <= 0) throw UsageError("resample: target rate must be positive");
  if (buffer.sample_rate <= 0) throw DataError("resample: source rate must be positive");
  if (options.taps_per_phase < 2 || options.taps_per_phase % 2 != 0)
    throw UsageError("resample: taps_per_phase must be even and >= 2");
  if (target_rate == buffer.sample_rate) return buffer;

  const auto g = std::gcd(target_rate, buffer.sample_rate);
  const std::uint64_t up = static_cast<std::uint64_t>(target_rate / g);
  const std::uint64_t down = static_cast<std::uint64_t>(buffer.sample_rate / g);
  const std::uint64_t n_in = buffer.samples.size();
  const std::uint64_t n_out = (n_in * up + down / 2) / down;

  const int taps = options.taps_per_phase;
  const int half = taps / 2;
  // Cutoff in cycles per input sample.
  const double cutoff =
      0.5 * std::min(1.0, static_cast<double>(up) / static_cast<double>(down)) * options.rolloff;

  // Phase p covers fractional position p/up between input samples; tap i
  // multiplies input sample base + (i - half + 1).
  std::vector<double> table(static_cast<std::size_t>(up) * taps);
  for (std::uint64_t p = 0; p < up; ++p) {
    double* row = &table[p * taps];
    const double frac = static_cast<double>(p) / static_cast<double>(up);
    double sum = 0.0;
    for (int i = 0; i < taps; ++i) {
      const double tau = frac - static_cast<double>(i - half + 1);
      row[i] = 2.0 * cutoff * sinc(2.0 * cutoff * tau) *
               kaiser(tau / static_cast<double>(half), options.kaiser_beta);
      sum += row[i];
    }
    for (int i = 0; i < taps; ++i) row[i] /= sum;
  }

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  const auto n_in_signed = static_cast<std::int64_t>(n_in);
  for (std::uint64_t n = 0; n < n_out; ++n) {
    const std::uint64_t pos = n * down;
    const auto base = static_cast<std::int64_t>(pos / up);
    const double* row = &table[(pos % up) * taps];
    double acc = 0.0;
    for (int i = 0; i < taps; ++i) {
      const std::int64_t idx = base + i - half + 1;
      if (idx >= 0 && idx < n_in_signed) acc += row[i] * buffer.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[n] = acc;
  }
  return out;
}

AudioBuffer normalize_peak(const AudioBuffer& buffer, double target_dbfs) {
  double peak = 0.0;
  for (double s : buffer.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0) throw SilentBufferError("normalize_peak: cannot normalize a silent buffer");
  const double gain = std::pow(10.0, target_dbfs / 20.0) / peak;
  AudioBuffer out = buffer;
  for (double& s : out.samples) s *= gain;
  return out;
}

std::vector<AudioBuffer> chunk(const AudioBuffer& buffer, double chunk_s, double min_tail_s) {
  if (!(chunk_s > 0.0)) throw UsageError("chunk: chunk length must be positive");
  if (min_tail_s < 0.0) throw UsageError("chunk: min tail must be non-negative");
  const double rate = static_cast<double>(buffer.sample_rate);
  const auto chunk_len = static_cast<std::size_t>(std::llround(chunk_s * rate));
  if (chunk_len == 0) throw UsageError("chunk: chunk shorter than one sample");
  const auto min_tail_len = static_cast<std::size_t>(std::ceil(min_tail_s * rate - 1e-9));

  std::vector<AudioBuffer> out;
  const std::size_t n = buffer.samples.size();
  std::size_t start = 0;
  for (; start + chunk_len <= n; start += chunk_len) {
    AudioBuffer c;
    c.sample_rate = buffer.sample_rate;
    c.samples.assign(buffer.samples.begin() + start, buffer.samples.begin() + start + chunk_len);
    out.push_back(std::move(c));
  }
  const std::size_t tail = n - start;
  if (tail > 0 && tail >= min_tail_len) {
    AudioBuffer c;
    c.sample_rate = buffer.sample_rate;
    c.samples.assign(buffer.samples.begin() + start, buffer.samples.end());
    out.push_back(std::move(c));
  }
  return out;
}

FrameSpec FrameSpec::from_ms(int sample_rate, double frame_ms, double hop_ms) {
  if (!(hop_ms > 0.0) || frame_ms < hop_ms)
    throw UsageError("framing: need frame_ms >= hop_ms > 0");
  FrameSpec spec;
  spec.length = static_cast<std::size_t>(std::llround(frame_ms * sample_rate / 1000.0));
  spec.hop = static_cast<std::size_t>(std::llround(hop_ms * sample_rate / 1000.0));
  if (spec.hop == 0) throw UsageError("framing: hop shorter than one sample");
  return spec;
}

std::size_t FrameSpec::count(std::size_t num_samples) const {
  if (num_samples < length) return 0;
  return 1 + (num_samples - length) / hop;
}

std::size_t VadDecision::speech_frames() const {
  return static_cast<std::size_t>(std::count(frame_flags.begin(), frame_flags.end(), true));
}

std::vector<double> frame_log_energy(const AudioBuffer& buffer, const FrameSpec& frames) {
  const std::size_t count = frames.count(buffer.samples.size());
  std::vector<double> energy(count);
  for (std::size_t f = 0; f < count; ++f) {
    const double* x = buffer.samples.data() + f * frames.hop;
    double sum = 0.0;
    for (std::size_t i = 0; i < frames.length; ++i) {
      const double v = x[i] * kPcm16Scale;
      sum += v * v;
    }
    energy[f] = std::log(std::max(sum, kLogEnergyFloor));
  }
  return energy;
}

VadDecision vad(const AudioBuffer& buffer, const VadOptions& options) {
  const auto frames = FrameSpec::from_ms(buffer.sample_rate, options.frame_ms, options.hop_ms);
  if (frames.count(buffer.samples.size()) == 0) throw DataError("vad: buffer shorter than one frame");
  const auto energy = frame_log_energy(buffer, frames);
  double mean = 0.0;
  for (double e : energy) mean += e;
  mean /= static_cast<double>(energy.size());

  VadDecision decision;
  decision.frame_hop_ms = options.hop_ms;
  decision.energy_threshold = options.energy_offset + options.mean_scale * mean;
  decision.frame_flags.reserve(energy.size());
  for (double e : energy) decision.frame_flags.push_back(e > decision.energy_threshold);
  return decision;
}

FeatureMatrix apply_vad(const FeatureMatrix& features, const VadDecision& decision) {
  if (static_cast<std::size_t>(features.rows()) != decision.frame_flags.size())
    throw DataError("apply_vad: " + std::to_string(features.rows()) + " feature frames vs " +
                    std::to_string(decision.frame_flags.size()) + " VAD flags");
  FeatureMatrix out = features;
  out.data.resize(static_cast<Eigen::Index>(decision.speech_frames()), features.cols());
  Eigen::Index row = 0;
  for (Eigen::Index f = 0; f < features.rows(); ++f)
    if (decision.frame_flags[static_cast<std::size_t>(f)]) out.data.row(row++) = features.data.row(f);
  return out;
}

}  // namespace psd
