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

#include "psd/feature_archive.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "psd/error.hpp"

namespace psd {
namespace {

constexpr std::size_t kPpgPhones = 39;

class Writer {
 public:
  explicit Writer(std::vector<unsigned char>& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) {
    std::uint32_t raw;
    std::memcpy(&raw, &v, sizeof raw);
    u32(raw);
  }

 private:
  std::vector<unsigned char>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}
  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw DataError("feature archive: truncated");
  }
  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t raw = u32();
    float v;
    std::memcpy(&v, &raw, sizeof v);
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_archive(const FeatureMatrix& features, std::optional<std::uint16_t> silence_col) {
  std::vector<unsigned char> out;
  out.reserve(kArchiveHeaderBytes + static_cast<std::size_t>(features.data.size()) * 4);
  Writer w(out);
  w.bytes("PSDF", 4);
  w.u16(kArchiveVersion);
  w.u16(static_cast<std::uint16_t>(features.kind));
  w.u32(static_cast<std::uint32_t>(features.rows()));
  w.u32(static_cast<std::uint32_t>(features.cols()));
  w.u32(static_cast<std::uint32_t>(features.sample_rate));
  w.f32(static_cast<float>(features.frame_hop_ms));
  w.f32(static_cast<float>(features.frame_len_ms));
  w.u16(silence_col.value_or(kNoSilenceColumn));
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    for (Eigen::Index c = 0; c < features.cols(); ++c) w.f32(static_cast<float>(features.data(r, c)));
  if (!features.column_labels.empty()) {
    w.bytes("NAME", 4);
    w.u32(static_cast<std::uint32_t>(features.column_labels.size()));
    for (const auto& name : features.column_labels) {
      w.u16(static_cast<std::uint16_t>(name.size()));
      w.bytes(name.data(), name.size());
    }
  }
  return out;
}

FeatureArchive decode_archive(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  if (r.text(4) != "PSDF") throw DataError("feature archive: bad magic");
  const auto version = r.u16();
  if (version != kArchiveVersion) throw DataError("feature archive: unsupported version " + std::to_string(version));
  const auto kind = r.u16();
  if (kind > static_cast<std::uint16_t>(FeatureKind::ppg))
    throw DataError("feature archive: unknown kind code " + std::to_string(kind));
  const auto rows = r.u32();
  const auto cols = r.u32();
  FeatureArchive out;
  out.features.kind = static_cast<FeatureKind>(kind);
  out.features.sample_rate = static_cast<int>(r.u32());
  out.features.frame_hop_ms = r.f32();
  out.features.frame_len_ms = r.f32();
  const auto silence = r.u16();
  if (silence != kNoSilenceColumn) {
    if (silence >= cols) throw DataError("feature archive: silence column out of range");
    out.silence_col = silence;
  }
  r.need(static_cast<std::size_t>(rows) * cols * 4);
  out.features.data.resize(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) {
      const float v = r.f32();
      if (!std::isfinite(v)) throw DataError("feature archive: non-finite entry");
      out.features.data(i, j) = v;
    }
  if (r.remaining() > 0) {
    if (r.text(4) != "NAME") throw DataError("feature archive: unexpected trailing data");
    const auto count = r.u32();
    if (count != cols) throw DataError("feature archive: name table size differs from column count");
    for (std::uint32_t i = 0; i < count; ++i) out.features.column_labels.push_back(r.text(r.u16()));
  }
  return out;
}

void write_archive(const std::filesystem::path& path, const FeatureMatrix& features,
                   std::optional<std::uint16_t> silence_col) {
  const auto bytes = encode_archive(features, silence_col);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

FeatureArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature archive " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_archive(bytes);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

PpgLoadResult normalize_ppg(const FeatureArchive& archive) {
  const auto& in = archive.features;
  if (in.kind != FeatureKind::ppg) throw DataError("ppg: archive kind is " + std::string(to_string(in.kind)));
  const auto cols = static_cast<std::size_t>(in.cols());
  std::optional<std::size_t> drop;
  if (cols == kPpgPhones + 1) {
    if (!archive.silence_col) throw DataError("ppg: 40-column archive without a declared silence column");
    drop = *archive.silence_col;
  } else if (cols != kPpgPhones) {
    throw DataError("ppg: expected 39 or 40 columns, got " + std::to_string(cols));
  }

  PpgLoadResult out;
  out.features.kind = FeatureKind::ppg;
  out.features.sample_rate = in.sample_rate;
  out.features.frame_hop_ms = in.frame_hop_ms;
  out.features.frame_len_ms = in.frame_len_ms;
  for (std::size_t c = 0; c < in.column_labels.size(); ++c)
    if (!drop || c != *drop) out.features.column_labels.push_back(in.column_labels[c]);

  std::vector<Eigen::Index> kept;
  std::vector<double> sums;
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = in.data(r, static_cast<Eigen::Index>(c));
      if (v < -1e-6 || v > 1.0 + 1e-6) throw DataError("ppg: posterior outside [0, 1] in frame " + std::to_string(r));
      if (!drop || c != *drop) sum += std::max(v, 0.0);
    }
    if (sum > 1e-12) {
      kept.push_back(r);
      sums.push_back(sum);
    }
  }
  out.dropped_frames = static_cast<std::size_t>(in.rows()) - kept.size();
  out.features.data.resize(static_cast<Eigen::Index>(kept.size()), static_cast<Eigen::Index>(kPpgPhones));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Eigen::Index out_col = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (drop && c == *drop) continue;
      out.features.data(static_cast<Eigen::Index>(i), out_col++) =
          std::max(in.data(kept[i], static_cast<Eigen::Index>(c)), 0.0) / sums[i];
    }
  }
  return out;
}

PpgLoadResult load_ppg(const std::filesystem::path& path) { return normalize_ppg(read_archive(path)); }

}  // namespace psd
