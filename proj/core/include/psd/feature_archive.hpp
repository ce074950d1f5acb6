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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "psd/feature_matrix.hpp"

namespace psd {

/// Little-endian feature archive:
///
///   "PSDF" u16 version=1, u16 kind, u32 rows, u32 cols, u32 sample_rate,
///   f32 hop_ms, f32 frame_ms, u16 silence_col (0xFFFF = none),
///   rows*cols f32 row-major,
///   optional trailer "NAME" u32 count, count x (u16 byte length, UTF-8 bytes).
///
/// The trailer carries column names (phone labels for PPGs); readers that stop
/// after the data block remain compatible.
inline constexpr std::uint16_t kArchiveVersion = 1;
inline constexpr std::uint16_t kNoSilenceColumn = 0xFFFF;
inline constexpr std::size_t kArchiveHeaderBytes = 30;

struct FeatureArchive {
  FeatureMatrix features;
  std::optional<std::uint16_t> silence_col;
};

std::vector<unsigned char> encode_archive(const FeatureMatrix& features,
                                          std::optional<std::uint16_t> silence_col = std::nullopt);
FeatureArchive decode_archive(std::span<const unsigned char> bytes);

void write_archive(const std::filesystem::path& path, const FeatureMatrix& features,
                   std::optional<std::uint16_t> silence_col = std::nullopt);
FeatureArchive read_archive(const std::filesystem::path& path);

struct PpgLoadResult {
  FeatureMatrix features;  // 39 columns, rows sum to 1
  std::size_t dropped_frames = 0;
};

// Drops the declared silence column of a 40-phone posteriorgram and
// renormalizes; frames with no non-silence mass are dropped and counted.
PpgLoadResult normalize_ppg(const FeatureArchive& archive);
PpgLoadResult load_ppg(const std::filesystem::path& path);

}  // namespace psd
