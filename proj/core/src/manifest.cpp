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

#include "psd/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "psd/csv.hpp"
#include "psd/error.hpp"
#include "psd/format.hpp"

namespace psd {
namespace {

double parse_duration(const std::string& text, const std::string& where) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw DataError(where + ": invalid duration_s '" + text + "'");
  if (value < 0.0) throw DataError(where + ": negative duration_s " + text);
  return value;
}

void validate(const std::vector<UtteranceRecord>& records) {
  std::unordered_set<std::string> ids;
  std::map<std::string, Split> speaker_split;
  for (const auto& r : records) {
    if (r.utt_id.empty()) throw DataError("empty utt_id");
    if (!ids.insert(r.utt_id).second) throw DataError("duplicate utt_id '" + r.utt_id + "'");
    if (r.speaker_id.empty()) throw DataError("empty speaker_id for '" + r.utt_id + "'");
    if (!(r.duration_s >= 0.0)) throw DataError("negative duration for '" + r.utt_id + "'");
    auto [it, inserted] = speaker_split.emplace(r.speaker_id, r.split);
    if (!inserted && it->second != r.split)
      throw SpeakerOverlapError("speaker '" + r.speaker_id +
                                "' appears in both train and test splits (utt '" + r.utt_id + "')");
  }
}

SplitStats stats_for(std::vector<const UtteranceRecord*> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const auto* a, const auto* b) { return a->utt_id < b->utt_id; });
  SplitStats s;
  std::set<std::string> speakers;
  for (const auto* r : rows) {
    speakers.insert(r->speaker_id);
    (r->label == Label::healthy ? s.healthy_utterances : s.pathological_utterances) += 1;
    s.total_duration_s += r->duration_s;
  }
  s.speakers = speakers.size();
  if (!rows.empty()) {
    s.mean_duration_per_speaker_s = s.total_duration_s / static_cast<double>(s.speakers);
    // Ties resolve to healthy, matching the detector tie rule.
    const bool path_major = s.pathological_utterances > s.healthy_utterances;
    s.majority_label = path_major ? Label::pathological : Label::healthy;
    s.majority_fraction =
        static_cast<double>(path_major ? s.pathological_utterances : s.healthy_utterances) /
        static_cast<double>(rows.size());
  }
  return s;
}

}  // namespace

Manifest::Manifest(std::vector<UtteranceRecord> records,
                   std::optional<std::filesystem::path> root)
    : records_(std::move(records)), root_(std::move(root)) {
  validate(records_);
}

std::filesystem::path Manifest::resolve(const UtteranceRecord& record) const {
  if (record.path.is_absolute() || !root_) return record.path;
  return *root_ / record.path;
}

std::vector<UtteranceRecord> Manifest::split(Split which) const {
  std::vector<UtteranceRecord> out;
  for (const auto& r : records_)
    if (r.split == which) out.push_back(r);
  return out;
}

Manifest parse_manifest(std::istream& in, const std::string& source_name,
                        std::optional<std::filesystem::path> root) {
  std::string line;
  std::size_t line_number = 0;
  if (!csv::read_line(in, line, line_number)) throw DataError(source_name + ": empty manifest");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kManifestHeader)
    throw DataError(source_name + ":" + std::to_string(line_number) +
                    ": bad header, expected '" + kManifestHeader + "'");

  std::vector<UtteranceRecord> records;
  while (csv::read_line(in, line, line_number)) {
    const std::string where = source_name + ":" + std::to_string(line_number);
    auto fields = csv::split_line(line);
    if (fields.size() != 6)
      throw DataError(where + ": expected 6 fields, got " + std::to_string(fields.size()));
    UtteranceRecord r;
    r.utt_id = fields[0];
    r.speaker_id = fields[1];
    try {
      r.label = parse_label(fields[2]);
      r.split = parse_split(fields[3]);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    r.path = fields[4];
    if (r.path.empty()) throw DataError(where + ": empty path");
    r.duration_s = parse_duration(fields[5], where);
    records.push_back(std::move(r));
  }
  return Manifest(std::move(records), std::move(root));
}

Manifest load_manifest(const std::filesystem::path& path,
                       std::optional<std::filesystem::path> root) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  if (!root) root = std::filesystem::absolute(path).parent_path();
  return parse_manifest(in, path.string(), std::move(root));
}

void write_manifest(std::ostream& out, const std::vector<UtteranceRecord>& records) {
  out << kManifestHeader << '\n';
  for (const auto& r : records) {
    out << csv::escape(r.utt_id) << ',' << csv::escape(r.speaker_id) << ',' << to_string(r.label)
        << ',' << to_string(r.split) << ',' << csv::escape(r.path.generic_string()) << ','
        << format_double(r.duration_s) << '\n';
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<UtteranceRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  write_manifest(out, records);
}

SplitSummary summarize(const Manifest& manifest) {
  std::vector<const UtteranceRecord*> train, test;
  for (const auto& r : manifest.records()) (r.split == Split::train ? train : test).push_back(&r);
  return {stats_for(std::move(train)), stats_for(std::move(test))};
}

}  // namespace psd
