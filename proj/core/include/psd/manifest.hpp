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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psd/types.hpp"

namespace psd {

inline constexpr const char* kManifestHeader = "utt_id,speaker_id,label,split,path,duration_s";

struct UtteranceRecord {
  std::string utt_id;
  std::string speaker_id;
  Label label = Label::healthy;
  Split split = Split::train;
  std::filesystem::path path;
  double duration_s = 0.0;
};

/// Ordered, validated list of utterances.
///
/// Construction enforces unique utterance ids, non-negative durations and
/// speaker-disjoint train/test splits. Immutable afterwards.
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<UtteranceRecord> records,
                    std::optional<std::filesystem::path> root = std::nullopt);

  const std::vector<UtteranceRecord>& records() const { return records_; }
  const std::optional<std::filesystem::path>& root() const { return root_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Relative paths are resolved against root (or left as is without one).
  std::filesystem::path resolve(const UtteranceRecord& record) const;

  std::vector<UtteranceRecord> split(Split which) const;

 private:
  std::vector<UtteranceRecord> records_;
  std::optional<std::filesystem::path> root_;
};

Manifest parse_manifest(std::istream& in, const std::string& source_name,
                        std::optional<std::filesystem::path> root = std::nullopt);
// Without a root, relative paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path,
                       std::optional<std::filesystem::path> root = std::nullopt);

void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records);
void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records);

struct SplitStats {
  std::size_t speakers = 0;
  std::size_t healthy_utterances = 0;
  std::size_t pathological_utterances = 0;
  double total_duration_s = 0.0;
  std::optional<double> mean_duration_per_speaker_s;  // absent for an empty split
  std::optional<double> majority_fraction;            // absent for an empty split
  std::optional<Label> majority_label;

  std::size_t utterances() const { return healthy_utterances + pathological_utterances; }
};

struct SplitSummary {
  SplitStats train;
  SplitStats test;
};

// Aggregates are accumulated in utt_id order, so the result does not depend
// on manifest row order.
SplitSummary summarize(const Manifest& manifest);

}  // namespace psd
