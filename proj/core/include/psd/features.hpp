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
#include <span>
#include <string>
#include <vector>

#include "psd/audio.hpp"
#include "psd/feature_matrix.hpp"

namespace psd {

inline constexpr double kLogFloor = 1e-10;

/// Framing shared by every frame-level frontend.
struct FrameOptions {
  int nfft = 512;
  double frame_ms = 25.0;
  double hop_ms = 10.0;
};

struct MfccOptions {
  FrameOptions framing;
  double preemphasis = 0.97;
  int n_mels = 23;
  int n_coeffs = 13;
  double low_hz = 20.0;
  double high_hz = 0.0;  // <= 0 means Nyquist
};

struct PlpOptions {
  FrameOptions framing;
  double preemphasis = 0.97;
  int model_order = 12;
};

struct PitchOptions {
  FrameOptions framing;
  double min_hz = 60.0;
  double max_hz = 400.0;
  // Frames whose voicing probability reaches this are treated as voiced.
  double voiced_threshold = 0.5;
};

/// Parameters for every frontend; the extraction cache keys on these.
struct FrontendOptions {
  FrameOptions framing;
  MfccOptions mfcc;
  PlpOptions plp;
  PitchOptions pitch;

  // Copies `framing` into the per-frontend option blocks.
  void sync_framing();
  // Canonical text form used for cache keys and run records.
  std::string canonical() const;
};

std::vector<double> hamming_window(std::size_t length);

/// Triangular filters equally spaced on the mel scale (1127 ln(1 + f/700)),
/// applied to a one-sided power spectrum of nfft/2+1 bins.
class MelFilterbank {
 public:
  MelFilterbank(int n_mels, int nfft, int sample_rate, double low_hz, double high_hz);

  int size() const { return n_mels_; }
  std::vector<double> apply(std::span<const double> power) const;
  // Row-major n_mels x (nfft/2+1).
  const std::vector<double>& weights() const { return weights_; }

 private:
  int n_mels_;
  std::size_t bins_;
  std::vector<double> weights_;
};

// Orthonormal DCT-II, first n_out coefficients.
std::vector<double> dct2_orthonormal(std::span<const double> input, int n_out);

// log mel energies -> DCT; exposed for reference-frame tests.
std::vector<double> mfcc_from_power(std::span<const double> power, const MelFilterbank& bank, int n_coeffs);

struct LevinsonResult {
  std::vector<double> lpc;         // a_1..a_p with A(z) = 1 + sum a_k z^-k
  std::vector<double> reflection;  // k_1..k_p
  double error = 0.0;              // final prediction error power
};

// Throws NumericError unless r[0] > 0 and every |k_i| < 1.
LevinsonResult levinson_durbin(std::span<const double> autocorr, int order);

// Cepstrum of gain^2 / |A|^2: c_0 = ln(error), then the standard recursion.
std::vector<double> lpc_to_cepstrum(std::span<const double> lpc, double error, int n_coeffs);

/// Bark-band analysis stage of PLP for a fixed nfft and sample rate.
class PlpAnalyzer {
 public:
  PlpAnalyzer(int nfft, int sample_rate, int model_order);

  int bands() const { return static_cast<int>(centers_bark_.size()); }
  const std::vector<double>& centers_bark() const { return centers_bark_; }

  // Critical-band integration, equal loudness and cube-root compression.
  std::vector<double> auditory_spectrum(std::span<const double> power) const;
  std::vector<double> autocorrelation(std::span<const double> auditory) const;
  // Full per-frame chain; model_order + 1 cepstra. Reflection coefficients are
  // returned through `reflection` when non-null.
  std::vector<double> cepstra(std::span<const double> power, std::vector<double>* reflection = nullptr) const;

 private:
  int model_order_;
  std::vector<double> centers_bark_;
  std::vector<double> loudness_;
  std::vector<double> masking_;  // bands x bins, row-major
  std::size_t bins_;
};

// Masking curve of the critical-band filter at a Bark offset from its center.
double critical_band_mask(double bark_offset);
double hz_to_bark(double hz);
double bark_to_hz(double bark);
double equal_loudness(double hz);

// log(max(|X|^2, 1e-10)) per bin, Hamming window, no pre-emphasis.
FeatureMatrix spectrogram(const AudioBuffer& buffer, const FrameOptions& options = {});
FeatureMatrix mfcc(const AudioBuffer& buffer, const MfccOptions& options = {});
FeatureMatrix plp(const AudioBuffer& buffer, const PlpOptions& options = {});
// Peak NCCF at or below this reads as unvoiced; noise-level peaks depend on
// the noise colour and would otherwise leak spectral tilt into the voicing.
inline constexpr double kNccfNoiseFloor = 0.35;

// Columns [voicing, log pitch]; voicing = clamp((peak - floor) / (1 - floor), 0, 1).
FeatureMatrix pitch(const AudioBuffer& buffer, const PitchOptions& options = {});

/// Per-bin mean and population standard deviation of a log spectrogram.
struct LtasVector {
  Vector mean;
  Vector std;

  // One row, [mean | std].
  FeatureMatrix as_features(int sample_rate, double frame_hop_ms, double frame_len_ms) const;
};

LtasVector ltas(const FeatureMatrix& spec);
FeatureMatrix ltas_features(const FeatureMatrix& spec);

// Expected column count for a kind under the given framing (0 when variable).
Eigen::Index feature_dims(FeatureKind kind, const FrontendOptions& options);

// Computes any audio-derived kind. PPGs are loaded, not computed.
FeatureMatrix extract_features(FeatureKind kind, const AudioBuffer& buffer, const FrontendOptions& options,
                               const VadDecision* vad = nullptr);

}  // namespace psd
