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

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace psd {

/// Mono PCM samples in [-1, 1] plus sample rate.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

/// Decoded audio before downmixing; one vector per channel, equal lengths.
struct MultiChannelAudio {
  std::vector<std::vector<double>> channels;
  int sample_rate = 16000;

  std::size_t frames() const { return channels.empty() ? 0 : channels.front().size(); }
};

// WAV decoding supports PCM16 and IEEE float32 (plain or WAVE_FORMAT_EXTENSIBLE).
MultiChannelAudio read_wav(const std::filesystem::path& path);
MultiChannelAudio decode_wav(std::span<const unsigned char> bytes);

enum class WavEncoding { pcm16, float32 };
void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
               WavEncoding encoding = WavEncoding::float32);
std::vector<unsigned char> encode_wav(const AudioBuffer& buffer, WavEncoding encoding);

// Arithmetic mean across channels.
AudioBuffer downmix(const MultiChannelAudio& audio);

struct ResamplerOptions {
  int taps_per_phase = 64;
  double kaiser_beta = 8.6;
  // Passband edge as a fraction of the lower Nyquist frequency.
  double rolloff = 0.95;
};

// Polyphase windowed-sinc resampler. Output length is round(n * target / source).
// Equal rates return the input unchanged.
AudioBuffer resample(const AudioBuffer& buffer, int target_rate, const ResamplerOptions& options = {});

// Scales so that max |sample| == 10^(target_dbfs / 20).
AudioBuffer normalize_peak(const AudioBuffer& buffer, double target_dbfs);

// Consecutive chunks of chunk_s seconds; a shorter tail is kept iff it lasts
// at least min_tail_s seconds.
std::vector<AudioBuffer> chunk(const AudioBuffer& buffer, double chunk_s, double min_tail_s);

/// Framing shared by VAD and every frame-level frontend.
struct FrameSpec {
  std::size_t length = 0;
  std::size_t hop = 0;

  static FrameSpec from_ms(int sample_rate, double frame_ms, double hop_ms);
  // 1 + floor((n - length) / hop); zero when n < length.
  std::size_t count(std::size_t num_samples) const;
};

struct VadOptions {
  double frame_ms = 25.0;
  double hop_ms = 10.0;
  double energy_offset = 5.0;
  double mean_scale = 0.5;
};

struct VadDecision {
  std::vector<bool> frame_flags;
  double frame_hop_ms = 10.0;
  double energy_threshold = 0.0;

  std::size_t speech_frames() const;
};

// Frame log-energy: log(max(sum of squares on the 16-bit PCM scale, 1e-10)).
std::vector<double> frame_log_energy(const AudioBuffer& buffer, const FrameSpec& frames);

VadDecision vad(const AudioBuffer& buffer, const VadOptions& options = {});

}  // namespace psd

#include "psd/feature_matrix.hpp"

namespace psd {

// Keeps the rows flagged as speech, in order.
FeatureMatrix apply_vad(const FeatureMatrix& features, const VadDecision& decision);

}  // namespace psd
