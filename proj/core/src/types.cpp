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

#include "psd/types.hpp"

#include <array>
#include <utility>

#include "psd/error.hpp"

namespace psd {
namespace {

constexpr std::array<std::pair<FeatureKind, std::string_view>, 6> kKindNames{{
    {FeatureKind::spectrogram, "spectrogram"},
    {FeatureKind::mfcc, "mfcc"},
    {FeatureKind::plp, "plp"},
    {FeatureKind::ltas, "ltas"},
    {FeatureKind::pitch, "pitch"},
    {FeatureKind::ppg, "ppg"},
}};

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::pathological ? "pathological" : "healthy";
}

std::string_view to_string(Split split) { return split == Split::test ? "test" : "train"; }

std::string_view to_string(FeatureKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "healthy") return Label::healthy;
  if (text == "pathological") return Label::pathological;
  throw DataError("unknown label '" + std::string(text) + "' (expected healthy|pathological)");
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw DataError("unknown split '" + std::string(text) + "' (expected train|test)");
}

FeatureKind parse_feature_kind(std::string_view text) {
  for (const auto& [k, name] : kKindNames)
    if (name == text) return k;
  throw DataError("unknown feature kind '" + std::string(text) + "'");
}

}  // namespace psd
