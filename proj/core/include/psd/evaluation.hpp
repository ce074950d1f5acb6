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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "psd/feature_matrix.hpp"
#include "psd/types.hpp"

namespace psd {

/// Features of one utterance with its bookkeeping; the unit detectors score.
struct LabeledUtterance {
  std::string utt_id;
  std::string speaker_id;
  Label label = Label::healthy;
  FeatureMatrix features;
};

struct ScoreEntry {
  std::string utt_id;
  std::string speaker_id;
  Label label = Label::healthy;
  double score = 0.0;
  Label predicted = Label::healthy;

  bool correct() const { return label == predicted; }
};

/// Scored utterances; utterance ids are unique.
class ScoreSet {
 public:
  ScoreSet() = default;
  explicit ScoreSet(std::vector<ScoreEntry> entries);

  void add(ScoreEntry entry);
  const std::vector<ScoreEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t count(Label label) const;

 private:
  std::vector<ScoreEntry> entries_;
  std::unordered_set<std::string> ids_;
};

inline constexpr const char* kScoresHeader = "utt_id,speaker_id,label,score,prediction";

ScoreSet parse_scores(std::istream& in, const std::string& source_name);
ScoreSet load_scores(const std::filesystem::path& path);
void write_scores(std::ostream& out, const ScoreSet& scores);
void write_scores(const std::filesystem::path& path, const ScoreSet& scores);

// correct / total; throws DataError on an empty set.
double accuracy(const ScoreSet& scores);

/// One point of the detection-error trade-off, at threshold t:
/// FAR = healthy scored >= t, FRR = pathological scored < t.
struct ErrorPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Thresholds at every unique score plus +infinity, ascending.
std::vector<ErrorPoint> error_curve(const ScoreSet& scores);

// Equal error rate by linear interpolation across the FAR/FRR crossing.
// Throws DataError unless both classes are present.
double eer(const ScoreSet& scores);

// Interpolated crossing of an ascending error curve; shared with eer().
double eer_from_curve(const std::vector<ErrorPoint>& curve);

struct SpeakerAccuracy {
  std::string speaker_id;
  Label label = Label::healthy;
  std::size_t utterances = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
};

struct ClassAccuracySummary {
  Label label = Label::healthy;
  std::size_t speakers = 0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct SpeakerBreakdown {
  std::vector<SpeakerAccuracy> speakers;        // sorted by (label, speaker_id)
  std::vector<ClassAccuracySummary> classes;    // only classes that occur
};

SpeakerBreakdown per_speaker_accuracy(const ScoreSet& scores);

struct EvaluationReport {
  std::size_t utterances = 0;
  double accuracy = 0.0;
  std::optional<double> eer;  // absent when only one class is present
  double majority_fraction = 0.0;
  SpeakerBreakdown breakdown;
};

EvaluationReport evaluate(const ScoreSet& scores);
std::string report_text(const EvaluationReport& report);
std::string report_json(const EvaluationReport& report);

}  // namespace psd
