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

#include <cstdint>
#include <string>
#include <string_view>

namespace psd {

enum class Label : std::uint8_t { healthy = 0, pathological = 1 };
enum class Split : std::uint8_t { train = 0, test = 1 };

// Codes match the on-disk feature archive header.
enum class FeatureKind : std::uint16_t {
  spectrogram = 0,
  mfcc = 1,
  plp = 2,
  ltas = 3,
  pitch = 4,
  ppg = 5,
};

std::string_view to_string(Label label);
std::string_view to_string(Split split);
std::string_view to_string(FeatureKind kind);

// Throw DataError on unknown names.
Label parse_label(std::string_view text);
Split parse_split(std::string_view text);
FeatureKind parse_feature_kind(std::string_view text);

inline double label_value(Label label) { return label == Label::pathological ? 1.0 : 0.0; }

}  // namespace psd

namespace psd {

/// Detector output. Higher scores mean "more pathological" for every backend.
struct DetectionScore {
  double score = 0.0;
  Label predicted = Label::healthy;
};

}  // namespace psd
