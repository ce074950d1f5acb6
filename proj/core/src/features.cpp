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

#include "psd/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>

#include "psd/error.hpp"
#include "psd/fft.hpp"
#include "psd/format.hpp"

namespace psd {
namespace {

double mel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

/// Frames a buffer and produces one-sided power spectra.
class PowerFramer {
 public:
  PowerFramer(const AudioBuffer& buffer, const FrameOptions& options, double preemphasis)
      : buffer_(buffer),
        spec_(FrameSpec::from_ms(buffer.sample_rate, options.frame_ms, options.hop_ms)),
        preemphasis_(preemphasis),
        window_(hamming_window(spec_.length)),
        fft_(static_cast<std::size_t>(options.nfft)),
        frame_(spec_.length),
        spectrum_(fft_.bins()),
        power_(fft_.bins()) {
    if (options.nfft < 2 || static_cast<std::size_t>(options.nfft) < spec_.length)
      throw UsageError("nfft (" + std::to_string(options.nfft) + ") must cover the frame length (" +
                       std::to_string(spec_.length) + " samples)");
    frames_ = spec_.count(buffer.samples.size());
    if (frames_ == 0) throw DataError("buffer shorter than one frame");
  }

  std::size_t frames() const { return frames_; }
  std::size_t bins() const { return fft_.bins(); }

  const std::vector<double>& power(std::size_t f) {
    const double* x = buffer_.samples.data() + f * spec_.hop;
    const std::size_t n = spec_.length;
    if (preemphasis_ != 0.0) {
      for (std::size_t i = n - 1; i > 0; --i) frame_[i] = x[i] - preemphasis_ * x[i - 1];
      frame_[0] = x[0] - preemphasis_ * x[0];
    } else {
      std::copy_n(x, n, frame_.begin());
    }
    for (std::size_t i = 0; i < n; ++i) frame_[i] *= window_[i];
    fft_.forward(frame_, spectrum_);
    for (std::size_t k = 0; k < power_.size(); ++k) power_[k] = std::norm(spectrum_[k]);
    return power_;
  }

 private:
  const AudioBuffer& buffer_;
  FrameSpec spec_;
  double preemphasis_;
  std::vector<double> window_;
  RealFft fft_;
  std::vector<double> frame_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<double> power_;
  std::size_t frames_ = 0;
};

FeatureMatrix make_matrix(FeatureKind kind, std::size_t rows, std::size_t cols, int sample_rate,
                          const FrameOptions& framing) {
  FeatureMatrix out;
  out.kind = kind;
  out.sample_rate = sample_rate;
  out.frame_hop_ms = framing.hop_ms;
  out.frame_len_ms = framing.frame_ms;
  out.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  return out;
}

}  // namespace

void FrontendOptions::sync_framing() {
  mfcc.framing = framing;
  plp.framing = framing;
  pitch.framing = framing;
}

std::string FrontendOptions::canonical() const {
  std::ostringstream s;
  s << "nfft=" << framing.nfft << ";frame_ms=" << format_double(framing.frame_ms)
    << ";hop_ms=" << format_double(framing.hop_ms) << ";mfcc.preemphasis=" << format_double(mfcc.preemphasis)
    << ";mfcc.n_mels=" << mfcc.n_mels << ";mfcc.n_coeffs=" << mfcc.n_coeffs
    << ";mfcc.low_hz=" << format_double(mfcc.low_hz) << ";mfcc.high_hz=" << format_double(mfcc.high_hz)
    << ";plp.preemphasis=" << format_double(plp.preemphasis) << ";plp.order=" << plp.model_order
    << ";pitch.min_hz=" << format_double(pitch.min_hz) << ";pitch.max_hz=" << format_double(pitch.max_hz)
    << ";pitch.voiced_threshold=" << format_double(pitch.voiced_threshold);
  return s.str();
}

std::vector<double> hamming_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t i = 0; i < length; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / denom);
  return w;
}

MelFilterbank::MelFilterbank(int n_mels, int nfft, int sample_rate, double low_hz, double high_hz)
    : n_mels_(n_mels), bins_(static_cast<std::size_t>(nfft / 2 + 1)) {
  const double nyquist = 0.5 * sample_rate;
  if (high_hz <= 0.0) high_hz = nyquist;
  if (n_mels < 1 || low_hz < 0.0 || high_hz > nyquist || low_hz >= high_hz)
    throw UsageError("mel filterbank: invalid band edges or filter count");
  const double mel_low = mel(low_hz);
  const double mel_step = (mel(high_hz) - mel_low) / (n_mels + 1);
  weights_.assign(static_cast<std::size_t>(n_mels) * bins_, 0.0);
  for (int j = 0; j < n_mels; ++j) {
    const double left = mel_low + j * mel_step;
    const double center = left + mel_step;
    const double right = center + mel_step;
    for (std::size_t k = 0; k < bins_; ++k) {
      const double m = mel(static_cast<double>(k) * sample_rate / nfft);
      double w = 0.0;
      if (m > left && m <= center)
        w = (m - left) / (center - left);
      else if (m > center && m < right)
        w = (right - m) / (right - center);
      weights_[static_cast<std::size_t>(j) * bins_ + k] = w;
    }
  }
}

std::vector<double> MelFilterbank::apply(std::span<const double> power) const {
  if (power.size() != bins_) throw DataError("mel filterbank: spectrum size mismatch");
  std::vector<double> out(static_cast<std::size_t>(n_mels_), 0.0);
  for (int j = 0; j < n_mels_; ++j) {
    const double* w = &weights_[static_cast<std::size_t>(j) * bins_];
    double sum = 0.0;
    for (std::size_t k = 0; k < bins_; ++k) sum += w[k] * power[k];
    out[static_cast<std::size_t>(j)] = sum;
  }
  return out;
}

std::vector<double> dct2_orthonormal(std::span<const double> input, int n_out) {
  const auto n = static_cast<double>(input.size());
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (int k = 0; k < n_out; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i)
      sum += input[i] * std::cos(M_PI * k * (static_cast<double>(i) + 0.5) / n);
    out[static_cast<std::size_t>(k)] = sum * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return out;
}

std::vector<double> mfcc_from_power(std::span<const double> power, const MelFilterbank& bank, int n_coeffs) {
  if (n_coeffs > bank.size()) throw UsageError("mfcc: more coefficients than mel filters");
  auto energies = bank.apply(power);
  for (double& e : energies) e = std::log(std::max(e, kLogFloor));
  return dct2_orthonormal(energies, n_coeffs);
}

LevinsonResult levinson_durbin(std::span<const double> r, int order) {
  if (order < 1 || r.size() < static_cast<std::size_t>(order) + 1)
    throw UsageError("levinson_durbin: need order+1 autocorrelation lags");
  if (!(r[0] > 0.0)) throw NumericError("levinson_durbin: non-positive zero-lag autocorrelation");
  LevinsonResult out;
  out.lpc.assign(static_cast<std::size_t>(order), 0.0);
  out.reflection.assign(static_cast<std::size_t>(order), 0.0);
  std::vector<double> prev(static_cast<std::size_t>(order), 0.0);
  double error = r[0];
  for (int i = 1; i <= order; ++i) {
    double acc = r[static_cast<std::size_t>(i)];
    for (int j = 1; j < i; ++j) acc += out.lpc[static_cast<std::size_t>(j - 1)] * r[static_cast<std::size_t>(i - j)];
    const double k = -acc / error;
    if (!(std::abs(k) < 1.0))
      throw NumericError("levinson_durbin: reflection coefficient " + std::to_string(i) +
                         " has magnitude >= 1 (autocorrelation not positive definite)");
    prev = out.lpc;
    for (int j = 1; j < i; ++j)
      out.lpc[static_cast<std::size_t>(j - 1)] = prev[static_cast<std::size_t>(j - 1)] + k * prev[static_cast<std::size_t>(i - j - 1)];
    out.lpc[static_cast<std::size_t>(i - 1)] = k;
    out.reflection[static_cast<std::size_t>(i - 1)] = k;
    error *= 1.0 - k * k;
  }
  out.error = error;
  return out;
}

std::vector<double> lpc_to_cepstrum(std::span<const double> lpc, double error, int n_coeffs) {
  if (!(error > 0.0)) throw NumericError("lpc_to_cepstrum: non-positive prediction error");
  const int p = static_cast<int>(lpc.size());
  std::vector<double> c(static_cast<std::size_t>(n_coeffs), 0.0);
  c[0] = std::log(error);
  for (int n = 1; n < n_coeffs; ++n) {
    double sum = n <= p ? -lpc[static_cast<std::size_t>(n - 1)] : 0.0;
    for (int k = std::max(1, n - p); k < n; ++k)
      sum -= (static_cast<double>(k) / n) * c[static_cast<std::size_t>(k)] * lpc[static_cast<std::size_t>(n - k - 1)];
    c[static_cast<std::size_t>(n)] = sum;
  }
  return c;
}

double hz_to_bark(double hz) { return 6.0 * std::asinh(hz / 600.0); }
double bark_to_hz(double bark) { return 600.0 * std::sinh(bark / 6.0); }

double critical_band_mask(double z) {
  if (z < -1.3 || z > 2.5) return 0.0;
  if (z <= -0.5) return std::pow(10.0, 2.5 * (z + 0.5));
  if (z < 0.5) return 1.0;
  return std::pow(10.0, -1.0 * (z - 0.5));
}

double equal_loudness(double hz) {
  const double w2 = std::pow(2.0 * M_PI * hz, 2);
  return ((w2 + 56.8e6) * w2 * w2) / (std::pow(w2 + 6.3e6, 2) * (w2 + 0.38e9));
}

PlpAnalyzer::PlpAnalyzer(int nfft, int sample_rate, int model_order)
    : model_order_(model_order), bins_(static_cast<std::size_t>(nfft / 2 + 1)) {
  if (model_order < 1) throw UsageError("plp: model order must be >= 1");
  const double max_bark = hz_to_bark(0.5 * sample_rate);
  const int n_bands = static_cast<int>(std::ceil(max_bark)) + 1;
  if (n_bands < 3) throw UsageError("plp: sample rate too low for Bark analysis");
  for (int i = 0; i < n_bands; ++i) centers_bark_.push_back(max_bark * i / (n_bands - 1));
  for (double z : centers_bark_) loudness_.push_back(equal_loudness(bark_to_hz(z)));
  masking_.assign(static_cast<std::size_t>(n_bands) * bins_, 0.0);
  for (int i = 0; i < n_bands; ++i)
    for (std::size_t k = 0; k < bins_; ++k) {
      const double bark = hz_to_bark(static_cast<double>(k) * sample_rate / nfft);
      masking_[static_cast<std::size_t>(i) * bins_ + k] = critical_band_mask(bark - centers_bark_[static_cast<std::size_t>(i)]);
    }
}

std::vector<double> PlpAnalyzer::auditory_spectrum(std::span<const double> power) const {
  if (power.size() != bins_) throw DataError("plp: spectrum size mismatch");
  const std::size_t n = centers_bark_.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* m = &masking_[i * bins_];
    double sum = 0.0;
    for (std::size_t k = 0; k < bins_; ++k) sum += m[k] * power[k];
    out[i] = sum * loudness_[i];
  }
  // Edge bands fall outside the equal-loudness curve's useful range.
  out[0] = out[1];
  out[n - 1] = out[n - 2];
  for (double& v : out) v = std::cbrt(std::max(v, kLogFloor));
  return out;
}

std::vector<double> PlpAnalyzer::autocorrelation(std::span<const double> auditory) const {
  // Inverse DFT of the even extension of the auditory spectrum over [0, pi].
  const std::size_t n = auditory.size();
  const double span = static_cast<double>(n - 1);
  std::vector<double> r(static_cast<std::size_t>(model_order_) + 1, 0.0);
  for (std::size_t lag = 0; lag < r.size(); ++lag) {
    double sum = auditory[0] + (lag % 2 == 0 ? 1.0 : -1.0) * auditory[n - 1];
    for (std::size_t i = 1; i + 1 < n; ++i)
      sum += 2.0 * auditory[i] * std::cos(M_PI * static_cast<double>(i * lag) / span);
    r[lag] = sum / (2.0 * span);
  }
  return r;
}

std::vector<double> PlpAnalyzer::cepstra(std::span<const double> power, std::vector<double>* reflection) const {
  const auto r = autocorrelation(auditory_spectrum(power));
  auto lpc = levinson_durbin(r, model_order_);
  if (reflection != nullptr) *reflection = lpc.reflection;
  return lpc_to_cepstrum(lpc.lpc, lpc.error, model_order_ + 1);
}

FeatureMatrix spectrogram(const AudioBuffer& buffer, const FrameOptions& options) {
  PowerFramer framer(buffer, options, 0.0);
  auto out = make_matrix(FeatureKind::spectrogram, framer.frames(), framer.bins(), buffer.sample_rate, options);
  for (std::size_t f = 0; f < framer.frames(); ++f) {
    const auto& power = framer.power(f);
    for (std::size_t k = 0; k < power.size(); ++k)
      out.data(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = std::log(std::max(power[k], kLogFloor));
  }
  return out;
}

FeatureMatrix mfcc(const AudioBuffer& buffer, const MfccOptions& options) {
  PowerFramer framer(buffer, options.framing, options.preemphasis);
  const MelFilterbank bank(options.n_mels, options.framing.nfft, buffer.sample_rate, options.low_hz, options.high_hz);
  auto out = make_matrix(FeatureKind::mfcc, framer.frames(), static_cast<std::size_t>(options.n_coeffs),
                         buffer.sample_rate, options.framing);
  for (std::size_t f = 0; f < framer.frames(); ++f) {
    const auto c = mfcc_from_power(framer.power(f), bank, options.n_coeffs);
    for (std::size_t k = 0; k < c.size(); ++k) out.data(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = c[k];
  }
  return out;
}

FeatureMatrix plp(const AudioBuffer& buffer, const PlpOptions& options) {
  PowerFramer framer(buffer, options.framing, options.preemphasis);
  const PlpAnalyzer analyzer(options.framing.nfft, buffer.sample_rate, options.model_order);
  auto out = make_matrix(FeatureKind::plp, framer.frames(), static_cast<std::size_t>(options.model_order + 1),
                         buffer.sample_rate, options.framing);
  for (std::size_t f = 0; f < framer.frames(); ++f) {
    std::vector<double> c;
    try {
      c = analyzer.cepstra(framer.power(f));
    } catch (const NumericError& e) {
      throw NumericError("plp frame " + std::to_string(f) + ": " + e.what());
    }
    for (std::size_t k = 0; k < c.size(); ++k) out.data(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = c[k];
  }
  return out;
}

FeatureMatrix pitch(const AudioBuffer& buffer, const PitchOptions& options) {
  const auto spec = FrameSpec::from_ms(buffer.sample_rate, options.framing.frame_ms, options.framing.hop_ms);
  const std::size_t frames = spec.count(buffer.samples.size());
  if (frames == 0) throw DataError("buffer shorter than one frame");
  if (!(options.min_hz > 0.0) || options.max_hz <= options.min_hz) throw UsageError("pitch: invalid search range");

  const double rate = static_cast<double>(buffer.sample_rate);
  const auto min_lag = static_cast<std::size_t>(std::max(1.0, std::ceil(rate / options.max_hz)));
  const auto max_lag = static_cast<std::size_t>(std::floor(rate / options.min_hz));
  const std::size_t n = spec.length;
  const std::size_t segment = n + max_lag;
  std::size_t fft_size = 2;
  while (fft_size < segment + 1) fft_size *= 2;

  RealFft fft(fft_size);
  std::vector<double> window(n), seg(segment), corr(fft_size), prefix(segment + 1), nccf(max_lag + 1);
  std::vector<std::complex<double>> wa(fft.bins()), sb(fft.bins());

  auto out = make_matrix(FeatureKind::pitch, frames, 2, buffer.sample_rate, options.framing);
  double last_log_pitch = std::log(100.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * spec.hop;
    for (std::size_t i = 0; i < segment; ++i) {
      const std::size_t idx = start + i;
      seg[i] = idx < buffer.samples.size() ? buffer.samples[idx] : 0.0;
    }
    std::copy_n(seg.begin(), n, window.begin());
    prefix[0] = 0.0;
    for (std::size_t i = 0; i < segment; ++i) prefix[i + 1] = prefix[i] + seg[i] * seg[i];

    // Cross-correlation of the analysis window against the lagged segment.
    fft.forward(window, wa);
    fft.forward(seg, sb);
    for (std::size_t k = 0; k < wa.size(); ++k) wa[k] = std::conj(wa[k]) * sb[k];
    fft.inverse(wa, corr);

    const double e0 = prefix[n];
    double best = 0.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      const double el = prefix[lag + n] - prefix[lag];
      const double denom = std::sqrt(e0 * el);
      nccf[lag] = denom > 1e-20 ? corr[lag] / static_cast<double>(fft_size) / denom : 0.0;
      best = std::max(best, nccf[lag]);
    }

    // Shortest-lag local peak close to the global maximum avoids octave errors
    // on strongly periodic input.
    std::size_t chosen = 0;
    for (std::size_t lag = min_lag; lag <= max_lag && best > 0.0; ++lag) {
      const bool left_ok = lag == min_lag || nccf[lag] >= nccf[lag - 1];
      const bool right_ok = lag == max_lag || nccf[lag] >= nccf[lag + 1];
      if (left_ok && right_ok && nccf[lag] >= 0.9 * best) {
        chosen = lag;
        break;
      }
    }

    const double peak = chosen > 0 ? std::clamp(nccf[chosen], 0.0, 1.0) : 0.0;
    const double voicing = std::clamp((peak - kNccfNoiseFloor) / (1.0 - kNccfNoiseFloor), 0.0, 1.0);
    if (chosen > 0 && voicing >= options.voiced_threshold) {
      double refined = static_cast<double>(chosen);
      if (chosen > min_lag && chosen < max_lag) {
        const double a = nccf[chosen - 1], b = nccf[chosen], c = nccf[chosen + 1];
        const double curvature = a - 2.0 * b + c;
        if (curvature < 0.0) refined += 0.5 * (a - c) / curvature;
      }
      last_log_pitch = std::log(rate / refined);
    }
    out.data(static_cast<Eigen::Index>(f), 0) = voicing;
    out.data(static_cast<Eigen::Index>(f), 1) = last_log_pitch;
  }
  return out;
}

FeatureMatrix LtasVector::as_features(int sample_rate, double frame_hop_ms, double frame_len_ms) const {
  FeatureMatrix out;
  out.kind = FeatureKind::ltas;
  out.sample_rate = sample_rate;
  out.frame_hop_ms = frame_hop_ms;
  out.frame_len_ms = frame_len_ms;
  out.data.resize(1, mean.size() + std.size());
  out.data.row(0).head(mean.size()) = mean.transpose();
  out.data.row(0).tail(std.size()) = std.transpose();
  return out;
}

LtasVector ltas(const FeatureMatrix& spec) {
  if (spec.kind != FeatureKind::spectrogram) throw DataError("ltas: input must be a spectrogram");
  const Eigen::Index frames = spec.rows();
  if (frames < 2) throw DataError("ltas: need at least 2 frames, got " + std::to_string(frames));
  const Eigen::Index bins = spec.cols();
  LtasVector out;
  out.mean = Vector::Zero(bins);
  out.std = Vector::Zero(bins);
  const double m = static_cast<double>(frames);
  for (Eigen::Index k = 0; k < bins; ++k) {
    double sum = 0.0;
    for (Eigen::Index f = 0; f < frames; ++f) sum += spec.data(f, k);
    const double mu = sum / m;
    double ss = 0.0;
    for (Eigen::Index f = 0; f < frames; ++f) {
      const double d = spec.data(f, k) - mu;
      ss += d * d;
    }
    out.mean[k] = mu;
    out.std[k] = std::sqrt(ss / m);
  }
  return out;
}

FeatureMatrix ltas_features(const FeatureMatrix& spec) {
  return ltas(spec).as_features(spec.sample_rate, spec.frame_hop_ms, spec.frame_len_ms);
}

Eigen::Index feature_dims(FeatureKind kind, const FrontendOptions& options) {
  const Eigen::Index bins = options.framing.nfft / 2 + 1;
  switch (kind) {
    case FeatureKind::spectrogram: return bins;
    case FeatureKind::mfcc: return options.mfcc.n_coeffs;
    case FeatureKind::plp: return options.plp.model_order + 1;
    case FeatureKind::ltas: return 2 * bins;
    case FeatureKind::pitch: return 2;
    case FeatureKind::ppg: return 39;
  }
  return 0;
}

FeatureMatrix extract_features(FeatureKind kind, const AudioBuffer& buffer, const FrontendOptions& options,
                               const VadDecision* decision) {
  auto gate = [&](FeatureMatrix m) { return decision ? apply_vad(m, *decision) : m; };
  switch (kind) {
    case FeatureKind::spectrogram: return gate(spectrogram(buffer, options.framing));
    case FeatureKind::mfcc: return gate(mfcc(buffer, options.mfcc));
    case FeatureKind::plp: return gate(plp(buffer, options.plp));
    case FeatureKind::pitch: return gate(pitch(buffer, options.pitch));
    case FeatureKind::ltas: return ltas_features(gate(spectrogram(buffer, options.framing)));
    case FeatureKind::ppg: break;
  }
  throw UsageError("ppg features are loaded from archives, not computed from audio");
}

}  // namespace psd
