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

#include "psd/experiment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "psd/csv.hpp"
#include "psd/error.hpp"
#include "psd/feature_archive.hpp"
#include "psd/format.hpp"
#include "psd/hash.hpp"
#include "psd/parallel.hpp"

namespace psd {
namespace fs = std::filesystem;

namespace {

constexpr const char* kIndexHeader = "utt_id,archive";
constexpr const char* kToolVersion = "psd 0.1.0";

std::string stage_message(const Failure& f) {
  return fmt::format("stage '{}', utterance '{}': {}", f.stage, f.utt_id, f.message);
}

// Archive names must be plain file names whatever the utterance id holds.
std::string safe_name(std::string_view id) {
  std::string out;
  for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' ? c : '_');
  return out;
}

void write_text(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("short write to " + path.string());
}

void write_archive_atomic(const fs::path& path, const FeatureMatrix& features) {
  auto tmp = path;
  tmp += ".tmp";
  write_archive(tmp, features);
  fs::rename(tmp, path);
}

AudioBuffer load_mono(const fs::path& path) { return downmix(read_wav(path)); }

std::string sweep_value_text(Backend backend, double value) {
  return backend == Backend::gmm ? std::to_string(static_cast<int>(value)) : format_double(value);
}

nlohmann::ordered_json sweep_json(Backend backend, const std::vector<SweepRow>& rows) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json row;
    row[backend == Backend::gmm ? "m" : "alpha"] = r.value;
    row["status"] = r.status;
    if (r.trained) {
      row["accuracy"] = r.accuracy;
      row["eer"] = r.eer ? nlohmann::ordered_json(*r.eer) : nlohmann::ordered_json(nullptr);
      if (backend == Backend::lasso) row["nonzero_weights"] = r.nonzero_weights;
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace

std::string_view to_string(Backend backend) { return backend == Backend::gmm ? "gmm" : "lasso"; }

Backend parse_backend(std::string_view text) {
  if (text == "gmm") return Backend::gmm;
  if (text == "lasso") return Backend::lasso;
  throw UsageError("unknown backend '" + std::string(text) + "' (expected gmm|lasso)");
}

std::pair<std::vector<LabeledUtterance>, std::vector<LabeledUtterance>> partition_dev_speakers(
    std::span<const LabeledUtterance> train, double fraction, std::uint64_t seed) {
  std::map<Label, std::set<std::string>> speakers;
  for (const auto& u : train) speakers[u.label].insert(u.speaker_id);
  std::set<std::string> dev;
  std::mt19937_64 rng(seed);
  for (Label label : {Label::healthy, Label::pathological}) {
    std::vector<std::string> list(speakers[label].begin(), speakers[label].end());
    if (list.size() < 2)
      throw UsageError("dev split needs at least 2 training speakers per class (" + std::string(to_string(label)) +
                       " has " + std::to_string(list.size()) + ")");
    for (std::size_t i = list.size() - 1; i > 0; --i) std::swap(list[i], list[rng() % (i + 1)]);
    const auto n_dev = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(fraction * list.size())), 1,
                                               list.size() - 1);
    dev.insert(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(n_dev));
  }
  std::vector<LabeledUtterance> fit, held;
  for (const auto& u : train) (dev.count(u.speaker_id) ? held : fit).push_back(u);
  return {std::move(fit), std::move(held)};
}

FeatureKind BackendModel::feature_kind() const {
  return backend == Backend::gmm ? gmm->pathological.feature_kind : lasso->feature_kind;
}

ScoreSet BackendModel::score(std::span<const LabeledUtterance> utterances) const {
  return backend == Backend::gmm ? score_set(*gmm, utterances) : score_set(*lasso, utterances);
}

void BackendModel::save(const fs::path& path) const {
  if (backend == Backend::gmm)
    save_detector(path, *gmm);
  else
    save_lasso(path, *lasso);
}

BackendModel BackendModel::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  std::string format;
  try {
    format = nlohmann::json::parse(in).value("format", "");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  BackendModel model;
  if (format == "psd.gmm_detector") {
    model.gmm = load_detector(path);
  } else if (format == "psd.lasso") {
    model.backend = Backend::lasso;
    model.lasso = load_lasso(path);
  } else {
    throw DataError(path.string() + ": unknown model format '" + format + "'");
  }
  return model;
}

namespace {

GmmFitOptions gmm_options(const ExperimentConfig& config) {
  GmmFitOptions o;
  o.seed = config.seed;
  o.max_iters = config.gmm_max_iters;
  o.tol = config.gmm_tol;
  o.variance_floor = config.variance_floor;
  return o;
}

LassoFitOptions lasso_options(const ExperimentConfig& config) {
  LassoFitOptions o;
  o.max_iters = config.lasso_max_iters;
  o.tol = config.lasso_tol;
  return o;
}

}  // namespace

BackendModel train_backend(const ExperimentConfig& config, double value, std::span<const LabeledUtterance> train) {
  BackendModel model;
  model.backend = config.backend;
  if (config.backend == Backend::gmm) {
    auto o = gmm_options(config);
    o.components = static_cast<int>(value);
    model.gmm = train_gmm_detector(gather_training_frames(train), o);
  } else {
    auto o = lasso_options(config);
    o.alpha = value;
    const auto data = gather_regression_rows(train);
    model.lasso = fit_lasso(data.x, data.y, data.kind, o).model;
  }
  return model;
}

Selection select_model(const ExperimentConfig& config, std::span<const LabeledUtterance> train,
                       std::span<const LabeledUtterance> test) {
  std::vector<LabeledUtterance> fit_set, select_set;
  Selection result;
  if (config.dev_split) {
    std::tie(fit_set, select_set) = partition_dev_speakers(train, config.dev_fraction, config.seed);
    result.selection_split = "dev";
  } else {
    fit_set.assign(train.begin(), train.end());
    select_set.assign(test.begin(), test.end());
    result.selection_split = "test";
  }
  const auto grid = config.effective_grid();
  result.model.backend = config.backend;
  if (config.backend == Backend::gmm) {
    std::vector<int> m_grid;
    for (double v : grid) m_grid.push_back(static_cast<int>(v));
    auto sweep = sweep_components(gather_training_frames(fit_set), select_set, m_grid, gmm_options(config), config.jobs);
    result.sweep = std::move(sweep.rows);
    result.selected = sweep.selected_components;
    result.model.gmm = std::move(sweep.detector);
  } else {
    auto sweep = sweep_alpha(gather_regression_rows(fit_set), select_set, grid, lasso_options(config), config.jobs);
    result.sweep = std::move(sweep.rows);
    result.selected = sweep.selected_alpha;
    result.model.lasso = std::move(sweep.model);
  }
  if (config.dev_split) result.model = train_backend(config, result.selected, train);
  return result;
}

PrepareResult prepare_corpus(const Manifest& manifest, const fs::path& out_dir, const PrepareOptions& options,
                             int jobs) {
  fs::create_directories(out_dir / "wav");
  const auto& records = manifest.records();
  std::vector<std::vector<UtteranceRecord>> chunks(records.size());
  std::vector<std::optional<Failure>> failures(records.size());

  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& r = records[i];
    std::string stage = "decode";
    try {
      auto audio = load_mono(manifest.resolve(r));
      stage = "resample";
      audio = resample(audio, options.sample_rate);
      stage = "normalize";
      audio = normalize_peak(audio, options.peak_dbfs);
      stage = "chunk";
      const auto pieces = chunk(audio, options.chunk_s, options.min_tail_s);
      if (pieces.empty()) throw DataError("shorter than the minimum kept tail");
      for (std::size_t c = 0; c < pieces.size(); ++c) {
        UtteranceRecord out = r;
        out.utt_id = fmt::format("{}_{:03d}", r.utt_id, c);
        out.path = fs::path("wav") / (safe_name(out.utt_id) + ".wav");
        out.duration_s = pieces[c].duration_s();
        write_wav(out_dir / out.path, pieces[c]);
        chunks[i].push_back(std::move(out));
      }
    } catch (const std::exception& e) {
      failures[i] = Failure{r.utt_id, stage, e.what()};
    }
  });

  PrepareResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (failures[i]) result.failures.push_back(*failures[i]);
    for (auto& c : chunks[i]) result.records.push_back(std::move(c));
  }
  Manifest validated(result.records);  // enforces id uniqueness of chunk names
  write_manifest(out_dir / "manifest.csv", result.records);
  return result;
}

std::string ExtractionSettings::fingerprint() const {
  std::string text = fmt::format("kind={};{}", to_string(kind), frontend.canonical());
  if (vad)
    text += fmt::format(";vad.frame_ms={};vad.hop_ms={};vad.energy_offset={};vad.mean_scale={}",
                        format_double(vad->frame_ms), format_double(vad->hop_ms), format_double(vad->energy_offset),
                        format_double(vad->mean_scale));
  else
    text += ";vad=off";
  return sha256_hex(text);
}

const CacheEntry* ExtractionIndex::find(const std::string& utt_id) const {
  for (const auto& e : entries)
    if (e.utt_id == utt_id) return &e;
  return nullptr;
}

ExtractionIndex extract_all(const Manifest& manifest, const ExtractionSettings& settings, const fs::path& cache_dir,
                            int jobs) {
  fs::create_directories(cache_dir);
  const auto fingerprint = settings.fingerprint();
  const auto& records = manifest.records();
  std::vector<std::optional<CacheEntry>> entries(records.size());
  std::vector<std::optional<Failure>> failures(records.size());

  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& r = records[i];
    try {
      const auto source = manifest.resolve(r);
      const auto key = sha256_hex(sha256_file(source) + "|" + fingerprint);
      CacheEntry entry;
      entry.utt_id = r.utt_id;
      entry.archive = cache_dir / (key + ".psdf");
      if (fs::exists(entry.archive)) {
        entry.cache_hit = true;
      } else if (settings.kind == FeatureKind::ppg) {
        auto loaded = load_ppg(source);
        entry.dropped_frames = loaded.dropped_frames;
        write_archive_atomic(entry.archive, loaded.features);
      } else {
        const auto audio = load_mono(source);
        std::optional<VadDecision> decision;
        if (settings.vad) decision = vad(audio, *settings.vad);
        const auto features = extract_features(settings.kind, audio, settings.frontend, decision ? &*decision : nullptr);
        write_archive_atomic(entry.archive, features);
      }
      entries[i] = std::move(entry);
    } catch (const std::exception& e) {
      failures[i] = Failure{r.utt_id, "extract", e.what()};
    }
  });

  ExtractionIndex index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (entries[i]) {
      if (!entries[i]->cache_hit) ++index.extracted;
      index.entries.push_back(std::move(*entries[i]));
    }
    if (failures[i]) index.failures.push_back(std::move(*failures[i]));
  }
  return index;
}

void write_index(const fs::path& path, const ExtractionIndex& index) {
  std::ostringstream out;
  out << kIndexHeader << '\n';
  const auto base = fs::absolute(path).parent_path();
  for (const auto& e : index.entries) {
    // Relative to the index so a cache directory can be moved as a whole.
    auto archive = fs::absolute(e.archive).lexically_normal().lexically_relative(base);
    if (archive.empty()) archive = fs::absolute(e.archive);
    out << csv::escape(e.utt_id) << ',' << csv::escape(archive.generic_string()) << '\n';
  }
  write_text(path, out.str());
}

ExtractionIndex read_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open feature index " + path.string());
  std::string line;
  std::size_t number = 0;
  if (!csv::read_line(in, line, number) || line != kIndexHeader)
    throw DataError(path.string() + ": bad header, expected '" + kIndexHeader + "'");
  ExtractionIndex index;
  while (csv::read_line(in, line, number)) {
    const auto fields = csv::split_line(line);
    if (fields.size() != 2) throw DataError(path.string() + ":" + std::to_string(number) + ": expected 2 fields");
    fs::path archive = fields[1];
    if (archive.is_relative()) archive = path.parent_path() / archive;
    index.entries.push_back({fields[0], archive, true, 0});
  }
  return index;
}

std::vector<LabeledUtterance> load_split(const Manifest& manifest, const ExtractionIndex& index, Split split) {
  std::map<std::string, const CacheEntry*> by_id;
  for (const auto& e : index.entries) by_id[e.utt_id] = &e;
  std::vector<LabeledUtterance> out;
  for (const auto& r : manifest.records()) {
    if (r.split != split) continue;
    auto it = by_id.find(r.utt_id);
    if (it == by_id.end()) continue;
    out.push_back({r.utt_id, r.speaker_id, r.label, read_archive(it->second->archive).features});
  }
  return out;
}

const std::vector<std::string>& ExperimentConfig::known_keys() {
  static const std::vector<std::string> keys{
      "manifest",         "root",          "output_dir",        "cache_dir",           "frontend",
      "backend",          "grid",          "seed",              "jobs",                "vad",
      "dev_split",        "dev_fraction",  "framing.nfft",      "framing.frame_ms",    "framing.hop_ms",
      "vad.energy_offset", "vad.mean_scale", "mfcc.preemphasis", "mfcc.n_mels",         "mfcc.n_coeffs",
      "mfcc.low_hz",      "mfcc.high_hz",  "plp.preemphasis",   "plp.order",           "pitch.min_hz",
      "pitch.max_hz",     "pitch.voiced_threshold", "gmm.max_iters", "gmm.tol",        "gmm.variance_floor",
      "lasso.max_iters",  "lasso.tol",     "prepare.enabled",   "prepare.sample_rate", "prepare.chunk_secs",
      "prepare.min_tail_secs", "prepare.peak_dbfs", "analysis.phone_cutoff"};
  return keys;
}

ExperimentConfig ExperimentConfig::from_document(const ConfigDocument& doc) {
  const auto unknown = doc.unknown_keys(known_keys());
  if (!unknown.empty()) throw UsageError("unknown config key '" + unknown.front() + "'");
  ExperimentConfig c;
  auto str = [&](const char* key) { return doc.get_string(key); };
  if (auto v = str("manifest")) c.manifest = *v;
  if (auto v = str("root")) c.root = fs::path(*v);
  if (auto v = str("output_dir")) c.output_dir = *v;
  if (auto v = str("cache_dir")) c.cache_dir = fs::path(*v);
  if (auto v = str("frontend")) {
    try {
      c.frontend = parse_feature_kind(*v);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
  if (auto v = str("backend")) c.backend = parse_backend(*v);
  if (auto v = doc.get_double_list("grid")) c.grid = *v;
  if (auto v = doc.get_int("seed")) c.seed = static_cast<std::uint64_t>(*v);
  if (auto v = doc.get_int("jobs")) c.jobs = static_cast<int>(*v);
  if (auto v = doc.get_bool("vad")) c.vad = *v;
  if (auto v = doc.get_bool("dev_split")) c.dev_split = *v;
  if (auto v = doc.get_double("dev_fraction")) c.dev_fraction = *v;

  auto& f = c.frontend_options;
  if (auto v = doc.get_int("framing.nfft")) f.framing.nfft = static_cast<int>(*v);
  if (auto v = doc.get_double("framing.frame_ms")) f.framing.frame_ms = *v;
  if (auto v = doc.get_double("framing.hop_ms")) f.framing.hop_ms = *v;
  f.sync_framing();
  c.vad_options.frame_ms = f.framing.frame_ms;
  c.vad_options.hop_ms = f.framing.hop_ms;
  if (auto v = doc.get_double("vad.energy_offset")) c.vad_options.energy_offset = *v;
  if (auto v = doc.get_double("vad.mean_scale")) c.vad_options.mean_scale = *v;
  if (auto v = doc.get_double("mfcc.preemphasis")) f.mfcc.preemphasis = *v;
  if (auto v = doc.get_int("mfcc.n_mels")) f.mfcc.n_mels = static_cast<int>(*v);
  if (auto v = doc.get_int("mfcc.n_coeffs")) f.mfcc.n_coeffs = static_cast<int>(*v);
  if (auto v = doc.get_double("mfcc.low_hz")) f.mfcc.low_hz = *v;
  if (auto v = doc.get_double("mfcc.high_hz")) f.mfcc.high_hz = *v;
  if (auto v = doc.get_double("plp.preemphasis")) f.plp.preemphasis = *v;
  if (auto v = doc.get_int("plp.order")) f.plp.model_order = static_cast<int>(*v);
  if (auto v = doc.get_double("pitch.min_hz")) f.pitch.min_hz = *v;
  if (auto v = doc.get_double("pitch.max_hz")) f.pitch.max_hz = *v;
  if (auto v = doc.get_double("pitch.voiced_threshold")) f.pitch.voiced_threshold = *v;
  if (auto v = doc.get_int("gmm.max_iters")) c.gmm_max_iters = static_cast<int>(*v);
  if (auto v = doc.get_double("gmm.tol")) c.gmm_tol = *v;
  if (auto v = doc.get_double("gmm.variance_floor")) c.variance_floor = *v;
  if (auto v = doc.get_int("lasso.max_iters")) c.lasso_max_iters = static_cast<int>(*v);
  if (auto v = doc.get_double("lasso.tol")) c.lasso_tol = *v;
  if (auto v = doc.get_bool("prepare.enabled")) c.prepare = *v;
  if (auto v = doc.get_int("prepare.sample_rate")) c.prepare_options.sample_rate = static_cast<int>(*v);
  if (auto v = doc.get_double("prepare.chunk_secs")) c.prepare_options.chunk_s = *v;
  if (auto v = doc.get_double("prepare.min_tail_secs")) c.prepare_options.min_tail_s = *v;
  if (auto v = doc.get_double("prepare.peak_dbfs")) c.prepare_options.peak_dbfs = *v;
  if (auto v = doc.get_double("analysis.phone_cutoff")) c.phone_cutoff = *v;
  return c;
}

std::vector<double> ExperimentConfig::effective_grid() const {
  if (!grid.empty()) return grid;
  if (backend == Backend::gmm) return {kDefaultComponentGrid.begin(), kDefaultComponentGrid.end()};
  return kDefaultAlphaGrid;
}

fs::path ExperimentConfig::effective_cache_dir() const { return cache_dir ? *cache_dir : output_dir / "cache"; }

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw UsageError("config: 'manifest' is required");
  if (output_dir.empty()) throw UsageError("config: 'output_dir' is required");
  if (!fs::exists(manifest)) throw UsageError("config: manifest " + manifest.string() + " does not exist");
  if (root && !fs::is_directory(*root)) throw UsageError("config: root " + root->string() + " is not a directory");
  const auto g = effective_grid();
  if (g.empty()) throw UsageError("config: empty hyperparameter grid");
  for (double v : g) {
    if (backend == Backend::gmm && (v < 1 || v != std::floor(v)))
      throw UsageError("config: gmm grid values must be positive integers");
    if (backend == Backend::lasso && !(v > 0.0)) throw UsageError("config: lasso grid values must be positive");
  }
  if (dev_split && !(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw UsageError("config: dev_fraction must lie in (0, 1)");
  if (jobs < 0) throw UsageError("config: jobs must be >= 0");
}

std::string ExperimentConfig::to_toml() const {
  const auto& f = frontend_options;
  std::string grid_text;
  for (double v : effective_grid()) grid_text += (grid_text.empty() ? "" : ", ") + format_double(v);
  std::string out;
  out += fmt::format("manifest = \"{}\"\n", manifest.generic_string());
  if (root) out += fmt::format("root = \"{}\"\n", root->generic_string());
  out += fmt::format("output_dir = \"{}\"\n", output_dir.generic_string());
  if (cache_dir) out += fmt::format("cache_dir = \"{}\"\n", cache_dir->generic_string());
  out += fmt::format("frontend = \"{}\"\nbackend = \"{}\"\ngrid = [{}]\nseed = {}\njobs = {}\nvad = {}\n",
                     to_string(frontend), to_string(backend), grid_text, seed, jobs, vad);
  out += fmt::format("dev_split = {}\ndev_fraction = {}\n", dev_split, format_double(dev_fraction));
  out += fmt::format("\n[framing]\nnfft = {}\nframe_ms = {}\nhop_ms = {}\n", f.framing.nfft,
                     format_double(f.framing.frame_ms), format_double(f.framing.hop_ms));
  out += fmt::format("\n[vad]\nenergy_offset = {}\nmean_scale = {}\n", format_double(vad_options.energy_offset),
                     format_double(vad_options.mean_scale));
  out += fmt::format("\n[mfcc]\npreemphasis = {}\nn_mels = {}\nn_coeffs = {}\nlow_hz = {}\nhigh_hz = {}\n",
                     format_double(f.mfcc.preemphasis), f.mfcc.n_mels, f.mfcc.n_coeffs, format_double(f.mfcc.low_hz),
                     format_double(f.mfcc.high_hz));
  out += fmt::format("\n[plp]\npreemphasis = {}\norder = {}\n", format_double(f.plp.preemphasis), f.plp.model_order);
  out += fmt::format("\n[pitch]\nmin_hz = {}\nmax_hz = {}\nvoiced_threshold = {}\n", format_double(f.pitch.min_hz),
                     format_double(f.pitch.max_hz), format_double(f.pitch.voiced_threshold));
  out += fmt::format("\n[gmm]\nmax_iters = {}\ntol = {}\nvariance_floor = {}\n", gmm_max_iters, format_double(gmm_tol),
                     format_double(variance_floor));
  out += fmt::format("\n[lasso]\nmax_iters = {}\ntol = {}\n", lasso_max_iters, format_double(lasso_tol));
  out += fmt::format("\n[prepare]\nenabled = {}\nsample_rate = {}\nchunk_secs = {}\nmin_tail_secs = {}\npeak_dbfs = {}\n",
                     prepare, prepare_options.sample_rate, format_double(prepare_options.chunk_s),
                     format_double(prepare_options.min_tail_s), format_double(prepare_options.peak_dbfs));
  out += fmt::format("\n[analysis]\nphone_cutoff = {}\n", format_double(phone_cutoff));
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = config;
  const auto& out = config.output_dir;
  for (const char* sub : {"models", "scores", "reports"}) fs::create_directories(out / sub);

  Manifest manifest = load_manifest(config.manifest, config.root);
  if (config.prepare) {
    const auto prepared_dir = out / "prepared";
    auto prepared = prepare_corpus(manifest, prepared_dir, config.prepare_options, config.jobs);
    report.failures.insert(report.failures.end(), prepared.failures.begin(), prepared.failures.end());
    manifest = load_manifest(prepared_dir / "manifest.csv", prepared_dir);
  }
  for (const auto& r : manifest.records())
    if (!(r.duration_s > 0.0))
      throw DataError(stage_message({r.utt_id, "manifest", "duration_s must be > 0 for training/evaluation"}));
  report.manifest_sha256 = sha256_file(config.prepare ? out / "prepared" / "manifest.csv" : config.manifest);

  ExtractionSettings settings;
  settings.kind = config.frontend;
  settings.frontend = config.frontend_options;
  if (config.vad && config.frontend != FeatureKind::ppg) settings.vad = config.vad_options;
  const auto index = extract_all(manifest, settings, config.effective_cache_dir(), config.jobs);
  report.extracted = index.extracted;
  report.cache_hits = index.entries.size() - index.extracted;
  report.failures.insert(report.failures.end(), index.failures.begin(), index.failures.end());

  auto drop_empty = [&](std::vector<LabeledUtterance> utts) {
    std::vector<LabeledUtterance> kept;
    for (auto& u : utts) {
      if (u.features.rows() == 0)
        report.failures.push_back({u.utt_id, "score", "no frames left after VAD; utterance excluded"});
      else
        kept.push_back(std::move(u));
    }
    return kept;
  };
  const auto train = drop_empty(load_split(manifest, index, Split::train));
  const auto test = drop_empty(load_split(manifest, index, Split::test));
  if (train.empty() || test.empty()) throw DataError("stage 'train': train and test splits must both have features");

  auto selection = select_model(config, train, test);
  report.sweep = std::move(selection.sweep);
  report.selected = selection.selected;
  report.selection_split = selection.selection_split;
  const auto& model = selection.model;
  model.save(out / "models" / "model.json");
  const auto train_scores = model.score(train);
  const auto test_scores = model.score(test);
  if (model.gmm && config.frontend == FeatureKind::ppg)
    report.phone_difference = gmm_phone_difference(model.gmm->pathological, model.gmm->healthy, config.phone_cutoff,
                                                    model.gmm->pathological.column_labels);
  if (model.lasso && config.frontend == FeatureKind::ltas)
    report.coefficients =
        lasso_coefficients(*model.lasso, SpectroMeta{config.frontend_options.framing.nfft, train.front().features.sample_rate});

  report.train = evaluate(train_scores);
  report.test = evaluate(test_scores);
  write_scores(out / "scores" / "train.csv", train_scores);
  write_scores(out / "scores" / "test.csv", test_scores);

  const auto reports = out / "reports";
  write_text(reports / "evaluation_train.json", report_json(report.train) + "\n");
  write_text(reports / "evaluation_test.json", report_json(report.test) + "\n");
  write_text(reports / "evaluation_test.txt", report_text(report.test));
  write_text(reports / "sweep.json", sweep_json(config.backend, report.sweep).dump(2) + "\n");
  if (report.phone_difference) {
    write_text(reports / "phone_difference.json", report_json(*report.phone_difference) + "\n");
    write_text(reports / "phone_difference.txt", report_text(*report.phone_difference));
    write_text(reports / "phone_difference.csv", report_csv(*report.phone_difference));
  }
  if (report.coefficients) {
    write_text(reports / "lasso_coefficients.json", report_json(*report.coefficients) + "\n");
    write_text(reports / "lasso_coefficients.txt", report_text(*report.coefficients));
    write_text(reports / "lasso_coefficients.csv", report_csv(*report.coefficients));
  }
  write_text(reports / "summary.json", summary_json(report) + "\n");
  write_text(reports / "summary.txt", summary_text(report));

  const auto config_text = config.to_toml();
  write_text(out / "config.toml", config_text);
  nlohmann::ordered_json record;
  record["tool"] = kToolVersion;
  record["manifest_sha256"] = report.manifest_sha256;
  record["config_sha256"] = sha256_hex(config_text);
  record["seed"] = config.seed;
  record["feature_fingerprint"] = settings.fingerprint();
  write_text(out / "run_record.json", record.dump(2) + "\n");
  return report;
}

std::string summary_text(const ExperimentReport& report) {
  const auto& c = report.config;
  const char* hyper = c.backend == Backend::gmm ? "m" : "alpha";
  auto pct = [](double v) { return fmt::format("{:.2f}%", 100.0 * v); };
  auto opt_pct = [&](const std::optional<double>& v) { return v ? pct(*v) : std::string("n/a"); };
  std::string out;
  if (report.selection_split == "test") out += std::string(kTestTuningWarning) + "\n\n";
  out += fmt::format("{:<12} {:<8} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "frontend", "backend", "train_acc",
                     "train_eer", "test_acc", "test_eer", hyper);
  out += fmt::format("{:<12} {:<8} {:>10} {:>10} {:>10} {:>10} {:>10}\n", to_string(c.frontend), to_string(c.backend),
                     pct(report.train.accuracy), opt_pct(report.train.eer), pct(report.test.accuracy),
                     opt_pct(report.test.eer), sweep_value_text(c.backend, report.selected));
  out += fmt::format("chance level (test majority class): {}\n\n", pct(report.test.majority_fraction));
  out += fmt::format("sweep on {} split:\n", report.selection_split);
  for (const auto& r : report.sweep) {
    if (!r.trained) {
      out += fmt::format("  {}={:<8} {}\n", hyper, sweep_value_text(c.backend, r.value), r.status);
      continue;
    }
    out += fmt::format("  {}={:<8} accuracy {:>8} eer {:>8}", hyper, sweep_value_text(c.backend, r.value),
                       pct(r.accuracy), opt_pct(r.eer));
    if (c.backend == Backend::lasso) out += fmt::format(" nonzero {}", r.nonzero_weights);
    out += "\n";
  }
  if (!report.failures.empty()) {
    out += fmt::format("\n{} utterance(s) excluded:\n", report.failures.size());
    for (const auto& f : report.failures) out += "  " + stage_message(f) + "\n";
  }
  return out;
}

std::string summary_json(const ExperimentReport& report) {
  const auto& c = report.config;
  nlohmann::ordered_json j;
  j["frontend"] = to_string(c.frontend);
  j["backend"] = to_string(c.backend);
  j["selection_split"] = report.selection_split;
  if (report.selection_split == "test") j["warning"] = kTestTuningWarning;
  j[c.backend == Backend::gmm ? "m" : "alpha"] = report.selected;
  auto eval = [](const EvaluationReport& r) {
    return nlohmann::ordered_json{{"utterances", r.utterances},
                                  {"accuracy", r.accuracy},
                                  {"eer", r.eer ? nlohmann::ordered_json(*r.eer) : nlohmann::ordered_json(nullptr)},
                                  {"majority_fraction", r.majority_fraction}};
  };
  j["train"] = eval(report.train);
  j["test"] = eval(report.test);
  j["sweep"] = sweep_json(c.backend, report.sweep);
  j["manifest_sha256"] = report.manifest_sha256;
  j["seed"] = c.seed;
  auto failures = nlohmann::ordered_json::array();
  for (const auto& f : report.failures)
    failures.push_back({{"utt_id", f.utt_id}, {"stage", f.stage}, {"message", f.message}});
  j["failures"] = std::move(failures);
  return j.dump(2);
}

SpectrogramExport export_spectrograms(const Manifest& manifest, const fs::path& out_dir, bool pad_to_longest,
                                      const FrameOptions& framing, int jobs) {
  fs::create_directories(out_dir);
  const auto& records = manifest.records();
  std::vector<std::size_t> frames(records.size(), 0);
  std::vector<int> rates(records.size(), 0);
  std::vector<std::optional<Failure>> failures(records.size());
  std::vector<fs::path> paths(records.size());

  parallel_for(records.size(), jobs, [&](std::size_t i) {
    const auto& r = records[i];
    try {
      const auto spec = spectrogram(load_mono(manifest.resolve(r)), framing);
      paths[i] = out_dir / (safe_name(r.utt_id) + ".psdf");
      frames[i] = static_cast<std::size_t>(spec.rows());
      rates[i] = spec.sample_rate;
      write_archive_atomic(paths[i], spec);
    } catch (const std::exception& e) {
      failures[i] = Failure{r.utt_id, "export", e.what()};
    }
  });

  SpectrogramExport result;
  std::size_t longest = 0;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!failures[i]) longest = std::max(longest, frames[i]);
  if (pad_to_longest) {
    result.padded_frames = longest;
    const double pad = std::log(kLogFloor);
    parallel_for(records.size(), jobs, [&](std::size_t i) {
      if (failures[i] || frames[i] == longest) return;
      auto archive = read_archive(paths[i]).features;
      const auto old_rows = archive.rows();
      archive.data.conservativeResize(static_cast<Eigen::Index>(longest), archive.cols());
      archive.data.bottomRows(static_cast<Eigen::Index>(longest) - old_rows).setConstant(pad);
      write_archive_atomic(paths[i], archive);
    });
  }

  nlohmann::ordered_json sidecar;
  sidecar["nfft"] = framing.nfft;
  sidecar["frame_ms"] = framing.frame_ms;
  sidecar["hop_ms"] = framing.hop_ms;
  sidecar["pad_to_longest"] = pad_to_longest;
  sidecar["padded_frames"] = result.padded_frames;
  sidecar["pad_value"] = std::log(kLogFloor);
  auto& utts = sidecar["utterances"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (failures[i]) {
      result.failures.push_back(*failures[i]);
      continue;
    }
    const auto& r = records[i];
    result.archives.push_back(paths[i]);
    utts.push_back({{"utt_id", r.utt_id},
                    {"speaker_id", r.speaker_id},
                    {"label", to_string(r.label)},
                    {"split", to_string(r.split)},
                    {"archive", paths[i].filename().string()},
                    {"sample_rate", rates[i]},
                    {"original_frames", frames[i]}});
  }
  write_text(out_dir / "spectrograms.json", sidecar.dump(2) + "\n");
  return result;
}

}  // namespace psd
