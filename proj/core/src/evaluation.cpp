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

#include "psd/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "psd/csv.hpp"
#include "psd/error.hpp"
#include "psd/format.hpp"

namespace psd {
namespace {

std::string percent(double v) { return fmt::format("{:.1f}%", 100.0 * v); }

}  // namespace

ScoreSet::ScoreSet(std::vector<ScoreEntry> entries) {
  for (auto& e : entries) add(std::move(e));
}

void ScoreSet::add(ScoreEntry entry) {
  if (!std::isfinite(entry.score)) throw DataError("non-finite score for '" + entry.utt_id + "'");
  if (!ids_.insert(entry.utt_id).second) throw DataError("duplicate utt_id '" + entry.utt_id + "' in score set");
  entries_.push_back(std::move(entry));
}

std::size_t ScoreSet::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.label == label; }));
}

ScoreSet parse_scores(std::istream& in, const std::string& source_name) {
  std::string line;
  std::size_t line_number = 0;
  if (!csv::read_line(in, line, line_number)) throw DataError(source_name + ": empty scores file");
  if (line != kScoresHeader)
    throw DataError(source_name + ":" + std::to_string(line_number) + ": bad header, expected '" +
                    kScoresHeader + "'");
  std::vector<ScoreEntry> entries;
  std::unordered_set<std::string> ids;
  while (csv::read_line(in, line, line_number)) {
    const std::string where = source_name + ":" + std::to_string(line_number);
    const auto fields = csv::split_line(line);
    if (fields.size() != 5) throw DataError(where + ": expected 5 fields, got " + std::to_string(fields.size()));
    ScoreEntry e;
    e.utt_id = fields[0];
    e.speaker_id = fields[1];
    try {
      e.label = parse_label(fields[2]);
      e.predicted = parse_label(fields[4]);
    } catch (const DataError& err) {
      throw DataError(where + ": " + err.what());
    }
    const auto& s = fields[3];
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), e.score);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(e.score))
      throw DataError(where + ": invalid score '" + s + "'");
    if (e.utt_id.empty()) throw DataError(where + ": empty utt_id");
    if (!ids.insert(e.utt_id).second) throw DataError(where + ": duplicate utt_id '" + e.utt_id + "'");
    entries.push_back(std::move(e));
  }
  return ScoreSet(std::move(entries));
}

ScoreSet load_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open scores file " + path.string());
  return parse_scores(in, path.string());
}

void write_scores(std::ostream& out, const ScoreSet& scores) {
  out << kScoresHeader << '\n';
  for (const auto& e : scores.entries())
    out << csv::escape(e.utt_id) << ',' << csv::escape(e.speaker_id) << ',' << to_string(e.label) << ','
        << format_double(e.score) << ',' << to_string(e.predicted) << '\n';
}

void write_scores(const std::filesystem::path& path, const ScoreSet& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write scores file " + path.string());
  write_scores(out, scores);
}

double accuracy(const ScoreSet& scores) {
  if (scores.empty()) throw DataError("accuracy: empty score set");
  std::size_t correct = 0;
  for (const auto& e : scores.entries()) correct += e.correct() ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

std::vector<ErrorPoint> error_curve(const ScoreSet& scores) {
  std::vector<double> healthy, pathological;
  for (const auto& e : scores.entries()) (e.label == Label::healthy ? healthy : pathological).push_back(e.score);
  if (healthy.empty() || pathological.empty()) throw DataError("eer: both classes must be present");
  std::sort(healthy.begin(), healthy.end());
  std::sort(pathological.begin(), pathological.end());

  std::vector<double> thresholds;
  thresholds.reserve(healthy.size() + pathological.size() + 1);
  std::merge(healthy.begin(), healthy.end(), pathological.begin(), pathological.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  const auto n_h = static_cast<double>(healthy.size());
  const auto n_p = static_cast<double>(pathological.size());
  std::vector<ErrorPoint> curve;
  curve.reserve(thresholds.size());
  for (double t : thresholds) {
    const auto below_h = std::lower_bound(healthy.begin(), healthy.end(), t) - healthy.begin();
    const auto below_p = std::lower_bound(pathological.begin(), pathological.end(), t) - pathological.begin();
    curve.push_back({t, static_cast<double>(static_cast<std::ptrdiff_t>(healthy.size()) - below_h) / n_h,
                     static_cast<double>(below_p) / n_p});
  }
  return curve;
}

double eer_from_curve(const std::vector<ErrorPoint>& curve) {
  if (curve.empty()) throw DataError("eer: empty error curve");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const double diff = curve[i].far - curve[i].frr;
    if (diff > 0.0) continue;
    if (diff == 0.0 || i == 0) return curve[i].far;
    const double prev = curve[i - 1].far - curve[i - 1].frr;
    const double lambda = prev / (prev - diff);
    return curve[i - 1].far + lambda * (curve[i].far - curve[i - 1].far);
  }
  return curve.back().far;
}

double eer(const ScoreSet& scores) { return eer_from_curve(error_curve(scores)); }

SpeakerBreakdown per_speaker_accuracy(const ScoreSet& scores) {
  std::map<std::pair<Label, std::string>, SpeakerAccuracy> rows;
  for (const auto& e : scores.entries()) {
    auto& row = rows[{e.label, e.speaker_id}];
    row.speaker_id = e.speaker_id;
    row.label = e.label;
    row.utterances += 1;
    row.correct += e.correct() ? 1 : 0;
  }
  SpeakerBreakdown out;
  for (auto& [key, row] : rows) {
    row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.utterances);
    out.speakers.push_back(row);
  }
  for (Label label : {Label::pathological, Label::healthy}) {
    ClassAccuracySummary summary;
    summary.label = label;
    double sum = 0.0;
    for (const auto& row : out.speakers) {
      if (row.label != label) continue;
      summary.min = summary.speakers == 0 ? row.accuracy : std::min(summary.min, row.accuracy);
      summary.max = summary.speakers == 0 ? row.accuracy : std::max(summary.max, row.accuracy);
      sum += row.accuracy;
      summary.speakers += 1;
    }
    if (summary.speakers == 0) continue;
    summary.mean = sum / static_cast<double>(summary.speakers);
    out.classes.push_back(summary);
  }
  return out;
}

EvaluationReport evaluate(const ScoreSet& scores) {
  EvaluationReport report;
  report.utterances = scores.size();
  report.accuracy = accuracy(scores);
  const auto n_h = scores.count(Label::healthy);
  const auto n_p = scores.count(Label::pathological);
  if (n_h > 0 && n_p > 0) report.eer = eer(scores);
  report.majority_fraction = static_cast<double>(std::max(n_h, n_p)) / static_cast<double>(scores.size());
  report.breakdown = per_speaker_accuracy(scores);
  return report;
}

std::string report_text(const EvaluationReport& report) {
  std::string out;
  out += fmt::format("utterances           {}\n", report.utterances);
  out += fmt::format("accuracy             {}\n", percent(report.accuracy));
  out += fmt::format("EER                  {}\n", report.eer ? percent(*report.eer) : std::string("n/a"));
  out += fmt::format("chance (majority)    {}\n\n", percent(report.majority_fraction));
  out += fmt::format("{:<24} {:<13} {:>6} {:>8} {:>9}\n", "speaker", "class", "utts", "correct", "accuracy");
  for (const auto& row : report.breakdown.speakers)
    out += fmt::format("{:<24} {:<13} {:>6} {:>8} {:>9}\n", row.speaker_id, to_string(row.label), row.utterances,
                       row.correct, percent(row.accuracy));
  out += "\n";
  for (const auto& c : report.breakdown.classes)
    out += fmt::format("{:<13} speakers {:>3}  mean {:>6}  range {} - {}\n", to_string(c.label), c.speakers,
                       percent(c.mean), percent(c.min), percent(c.max));
  if (report.breakdown.classes.size() == 2)
    out += fmt::format("mean per-speaker accuracy: {} {} vs {} {}\n", to_string(report.breakdown.classes[0].label),
                       percent(report.breakdown.classes[0].mean), to_string(report.breakdown.classes[1].label),
                       percent(report.breakdown.classes[1].mean));
  return out;
}

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["utterances"] = report.utterances;
  j["accuracy"] = report.accuracy;
  j["eer"] = report.eer ? nlohmann::ordered_json(*report.eer) : nlohmann::ordered_json(nullptr);
  j["majority_fraction"] = report.majority_fraction;
  auto& speakers = j["speakers"] = nlohmann::ordered_json::array();
  for (const auto& row : report.breakdown.speakers)
    speakers.push_back({{"speaker_id", row.speaker_id},
                        {"label", to_string(row.label)},
                        {"utterances", row.utterances},
                        {"correct", row.correct},
                        {"accuracy", row.accuracy}});
  auto& classes = j["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : report.breakdown.classes)
    classes.push_back({{"label", to_string(c.label)},
                       {"speakers", c.speakers},
                       {"mean", c.mean},
                       {"min", c.min},
                       {"max", c.max}});
  return j.dump(2);
}

}  // namespace psd
