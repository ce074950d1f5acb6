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
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "psd/audio.hpp"
#include "psd/config_file.hpp"
#include "psd/evaluation.hpp"
#include "psd/explain.hpp"
#include "psd/features.hpp"
#include "psd/gmm.hpp"
#include "psd/lasso.hpp"
#include "psd/manifest.hpp"

namespace psd {

enum class Backend { gmm, lasso };
std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view text);

struct PrepareOptions {
  int sample_rate = 16000;
  double chunk_s = 5.0;
  double min_tail_s = 1.0;
  double peak_dbfs = -0.1;
};

struct Failure {
  std::string utt_id;
  std::string stage;
  std::string message;
};

struct PrepareResult {
  std::vector<UtteranceRecord> records;  // one per chunk, paths relative to out_dir
  std::vector<Failure> failures;
};

/// downmix -> resample -> peak-normalize -> chunk for every manifest row.
///
/// Chunk WAVs go to <out_dir>/wav/<utt_id>_NNN.wav and the derived manifest
/// to <out_dir>/manifest.csv. Failing files are listed, the rest proceed.
PrepareResult prepare_corpus(const Manifest& manifest, const std::filesystem::path& out_dir,
                             const PrepareOptions& options, int jobs = 0);

struct ExtractionSettings {
  FeatureKind kind = FeatureKind::ltas;
  FrontendOptions frontend;
  std::optional<VadOptions> vad;  // absent: no silence removal

  // Hash of everything that affects extracted values.
  std::string fingerprint() const;
};

struct CacheEntry {
  std::string utt_id;
  std::filesystem::path archive;
  bool cache_hit = false;
  std::size_t dropped_frames = 0;  // PPG frames without non-silence mass
};

struct ExtractionIndex {
  std::vector<CacheEntry> entries;  // manifest order, failures omitted
  std::vector<Failure> failures;
  std::size_t extracted = 0;  // archives written by this call

  const CacheEntry* find(const std::string& utt_id) const;
};

/// One archive per utterance under cache_dir, keyed by (content hash,
/// settings fingerprint). Existing entries are reused without recomputation.
/// Audio kinds read WAV files; kind ppg reads a posteriorgram archive.
ExtractionIndex extract_all(const Manifest& manifest, const ExtractionSettings& settings,
                            const std::filesystem::path& cache_dir, int jobs = 0);

void write_index(const std::filesystem::path& path, const ExtractionIndex& index);
ExtractionIndex read_index(const std::filesystem::path& path);

// Utterances of `split` that have cached features, in manifest order.
std::vector<LabeledUtterance> load_split(const Manifest& manifest, const ExtractionIndex& index, Split split);

struct ExperimentConfig {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> root;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_dir;  // default <output_dir>/cache

  FeatureKind frontend = FeatureKind::ltas;
  FrontendOptions frontend_options;
  Backend backend = Backend::lasso;
  std::vector<double> grid;  // empty: the backend's default grid
  std::uint64_t seed = 42;
  int jobs = 0;

  bool vad = true;
  VadOptions vad_options;

  bool prepare = false;
  PrepareOptions prepare_options;

  // Select hyperparameters on held-out training speakers instead of test.
  bool dev_split = false;
  double dev_fraction = 0.2;

  int gmm_max_iters = 100;
  double gmm_tol = 1e-5;
  double variance_floor = kDefaultVarianceFloor;
  int lasso_max_iters = 1000;
  double lasso_tol = 1e-7;
  double phone_cutoff = kDefaultPhoneCutoff;

  static ExperimentConfig from_document(const ConfigDocument& doc);
  static const std::vector<std::string>& known_keys();
  std::vector<double> effective_grid() const;
  std::filesystem::path effective_cache_dir() const;
  void validate() const;
  // Every key with its effective value, in config-file syntax.
  std::string to_toml() const;
};

/// A fitted detector of either backend.
struct BackendModel {
  Backend backend = Backend::gmm;
  std::optional<GmmDetector> gmm;
  std::optional<LassoModel> lasso;

  FeatureKind feature_kind() const;
  ScoreSet score(std::span<const LabeledUtterance> utterances) const;
  void save(const std::filesystem::path& path) const;
  // Detects the backend from the model file's format tag.
  static BackendModel load(const std::filesystem::path& path);
};

// Fits the configured backend at one hyperparameter value (m or alpha).
BackendModel train_backend(const ExperimentConfig& config, double value, std::span<const LabeledUtterance> train);

// Speaker-disjoint (fit, dev) split of the training utterances, per class.
std::pair<std::vector<LabeledUtterance>, std::vector<LabeledUtterance>> partition_dev_speakers(
    std::span<const LabeledUtterance> train, double fraction, std::uint64_t seed);

struct Selection {
  std::vector<SweepRow> sweep;
  double selected = 0.0;
  std::string selection_split;  // "test" or "dev"
  BackendModel model;           // refit on the full training split
};

/// Sweeps config.effective_grid() and keeps the best value, scored on the
/// test split or, with dev_split, on held-out training speakers.
Selection select_model(const ExperimentConfig& config, std::span<const LabeledUtterance> train,
                       std::span<const LabeledUtterance> test);

struct ExperimentReport {
  ExperimentConfig config;
  std::string manifest_sha256;
  std::vector<SweepRow> sweep;
  double selected = 0.0;  // m or alpha
  std::string selection_split;
  EvaluationReport train;
  EvaluationReport test;
  std::vector<Failure> failures;  // extraction failures and unscorable utterances
  std::size_t extracted = 0;
  std::size_t cache_hits = 0;
  std::optional<PhoneDifferenceReport> phone_difference;
  std::optional<CoefficientReport> coefficients;
};

/// prepare (optional) -> VAD + extract -> sweep -> evaluate -> analyze.
///
/// Writes models/, scores/, reports/ and run_record.json under output_dir.
/// Scores files are byte-identical across reruns and worker counts.
ExperimentReport run_experiment(const ExperimentConfig& config);

std::string summary_text(const ExperimentReport& report);
std::string summary_json(const ExperimentReport& report);

inline constexpr const char* kTestTuningWarning =
    "WARNING: hyperparameters were selected on the test split; test figures are optimistic. "
    "Set dev_split = true to select on held-out training speakers.";

struct SpectrogramExport {
  std::vector<std::filesystem::path> archives;
  std::vector<Failure> failures;
  std::size_t padded_frames = 0;  // 0 without padding
};

/// Spectrogram archives for the external CNN baseline, one per utterance, plus
/// <out_dir>/spectrograms.json recording original frame counts. With padding,
/// every archive is extended to the longest utterance with log(1e-10) rows.
SpectrogramExport export_spectrograms(const Manifest& manifest, const std::filesystem::path& out_dir,
                                      bool pad_to_longest, const FrameOptions& framing = {}, int jobs = 0);

}  // namespace psd
