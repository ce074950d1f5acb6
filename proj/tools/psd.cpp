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

// psd: command-line front end for the pathological speech detection toolkit.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "psd/error.hpp"
#include "psd/experiment.hpp"
#include "psd/feature_archive.hpp"
#include "psd/hash.hpp"

namespace fs = std::filesystem;
using namespace psd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

const char* kJobsHelp = "Worker threads for per-utterance and per-candidate work; 0 uses every core";

void print_failures(const std::vector<Failure>& failures) {
  for (const auto& f : failures)
    std::cerr << fmt::format("error: stage '{}', utterance '{}': {}\n", f.stage, f.utt_id, f.message);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + path.string());
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

// Frontend flags shared by extract and export-spectrograms.
struct FrontendFlags {
  std::string frontend = "ltas";
  FrontendOptions options;
  bool no_vad = false;
  VadOptions vad;

  void add(CLI::App* app, bool with_kind) {
    if (with_kind)
      app->add_option("--frontend", frontend, "Feature kind: spectrogram|mfcc|plp|ltas|pitch|ppg")
          ->check(CLI::IsMember({"spectrogram", "mfcc", "plp", "ltas", "pitch", "ppg"}));
    app->add_option("--nfft", options.framing.nfft, "FFT size for spectrogram/LTAS/PLP frames");
    app->add_option("--frame-ms", options.framing.frame_ms, "Analysis frame length in ms");
    app->add_option("--hop-ms", options.framing.hop_ms, "Frame hop in ms");
    if (!with_kind) return;
    app->add_option("--num-mels", options.mfcc.n_mels, "MFCC mel filters");
    app->add_option("--num-ceps", options.mfcc.n_coeffs, "MFCC cepstral coefficients");
    app->add_option("--low-hz", options.mfcc.low_hz, "MFCC lowest filter edge in Hz");
    app->add_option("--high-hz", options.mfcc.high_hz, "MFCC highest filter edge in Hz; 0 means Nyquist");
    app->add_option("--preemphasis", options.mfcc.preemphasis, "Pre-emphasis coefficient for MFCC and PLP");
    app->add_option("--plp-order", options.plp.model_order, "PLP linear prediction order");
    app->add_option("--min-f0", options.pitch.min_hz, "Lowest pitch candidate in Hz");
    app->add_option("--max-f0", options.pitch.max_hz, "Highest pitch candidate in Hz");
    app->add_option("--voiced-threshold", options.pitch.voiced_threshold, "Voicing probability marking a voiced frame");
    app->add_flag("--no-vad", no_vad, "Keep silent frames");
    app->add_option("--vad-energy-offset", vad.energy_offset, "VAD threshold offset above scaled mean log-energy");
    app->add_option("--vad-mean-scale", vad.mean_scale, "VAD weight of the mean log-energy");
  }

  ExtractionSettings settings() {
    options.plp.preemphasis = options.mfcc.preemphasis;
    options.sync_framing();
    ExtractionSettings s;
    s.kind = parse_kind();
    s.frontend = options;
    if (!no_vad && s.kind != FeatureKind::ppg) {
      s.vad = vad;
      s.vad->frame_ms = options.framing.frame_ms;
      s.vad->hop_ms = options.framing.hop_ms;
    }
    return s;
  }

  FeatureKind parse_kind() const {
    try {
      return parse_feature_kind(frontend);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
};

// Options of commands that fit or score models on an extracted index.
struct BackendFlags {
  std::string backend = "lasso";
  std::uint64_t seed = 42;
  int gmm_max_iters = 100;
  double gmm_tol = 1e-5;
  double variance_floor = kDefaultVarianceFloor;
  int lasso_max_iters = 1000;
  double lasso_tol = 1e-7;

  void add(CLI::App* app) {
    app->add_option("--backend", backend, "Detector backend: gmm|lasso")->check(CLI::IsMember({"gmm", "lasso"}));
    app->add_option("--seed", seed, "Seed for every random choice (k-means++ init, dev split)");
    app->add_option("--gmm-max-iters", gmm_max_iters, "EM iteration limit");
    app->add_option("--gmm-tol", gmm_tol, "EM relative log-likelihood tolerance");
    app->add_option("--variance-floor", variance_floor, "Lower bound on GMM variances");
    app->add_option("--lasso-max-iters", lasso_max_iters, "Coordinate descent cycle limit");
    app->add_option("--lasso-tol", lasso_tol, "Coordinate descent weight-change tolerance");
  }

  void apply(ExperimentConfig& c) const {
    c.backend = parse_backend(backend);
    c.seed = seed;
    c.gmm_max_iters = gmm_max_iters;
    c.gmm_tol = gmm_tol;
    c.variance_floor = variance_floor;
    c.lasso_max_iters = lasso_max_iters;
    c.lasso_tol = lasso_tol;
  }
};

struct DataFlags {
  std::string manifest;
  std::string root;
  std::string index;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "Manifest CSV")->required();
    app->add_option("--root", root, "Directory for relative manifest paths; default: the manifest's directory");
    app->add_option("--index", index, "Feature index written by extract")->required();
  }

  Manifest load_manifest_() const { return load_manifest(manifest, opt_path(root)); }
};

std::vector<LabeledUtterance> nonempty(std::vector<LabeledUtterance> utts) {
  std::vector<LabeledUtterance> out;
  for (auto& u : utts) {
    if (u.features.rows() == 0)
      std::cerr << fmt::format("warning: utterance '{}' has no frames and is skipped\n", u.utt_id);
    else
      out.push_back(std::move(u));
  }
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows, Backend backend) {
  std::string out;
  for (const auto& r : rows) {
    const auto value = backend == Backend::gmm ? std::to_string(static_cast<int>(r.value)) : fmt::format("{}", r.value);
    if (!r.trained) {
      out += fmt::format("{}={}\t{}\n", backend == Backend::gmm ? "m" : "alpha", value, r.status);
      continue;
    }
    out += fmt::format("{}={}\taccuracy={:.4f}\teer={}", backend == Backend::gmm ? "m" : "alpha", value, r.accuracy,
                       r.eer ? fmt::format("{:.4f}", *r.eer) : "n/a");
    if (backend == Backend::lasso) out += fmt::format("\tnonzero={}", r.nonzero_weights);
    out += "\n";
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pathological speech detection toolkit", "psd"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_version_flag("--version", "psd 0.1.0");
  int jobs = 0;

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Downmix, resample, peak-normalize and chunk a corpus");
  std::string p_manifest, p_root, p_out;
  PrepareOptions p_opts;
  prepare->add_option("--manifest", p_manifest, "Input manifest CSV")->required();
  prepare->add_option("--root", p_root, "Directory for relative manifest paths; default: the manifest's directory");
  prepare->add_option("--out-dir", p_out, "Output directory for wav/ and manifest.csv")->required();
  prepare->add_option("--sample-rate", p_opts.sample_rate, "Target sample rate in Hz");
  prepare->add_option("--chunk-secs", p_opts.chunk_s, "Chunk length in seconds");
  prepare->add_option("--min-tail-secs", p_opts.min_tail_s, "Shortest trailing chunk kept, in seconds");
  prepare->add_option("--peak-dbfs", p_opts.peak_dbfs, "Peak level after normalization in dBFS");
  prepare->add_option("--jobs", jobs, kJobsHelp);

  // extract
  auto* extract = app.add_subcommand("extract", "Extract features for every utterance into a cache");
  std::string e_manifest, e_root, e_cache, e_index;
  FrontendFlags e_front;
  extract->add_option("--manifest", e_manifest, "Manifest CSV")->required();
  extract->add_option("--root", e_root, "Directory for relative manifest paths; default: the manifest's directory");
  extract->add_option("--cache-dir", e_cache, "Feature archive cache directory")->required();
  extract->add_option("--index", e_index, "Index CSV to write; default: <cache-dir>/index.csv");
  e_front.add(extract, true);
  extract->add_option("--jobs", jobs, kJobsHelp);

  // train
  auto* train = app.add_subcommand("train", "Fit a detector on the train split at one hyperparameter value");
  DataFlags t_data;
  BackendFlags t_backend;
  double t_alpha = 0.01;
  int t_components = 8;
  std::string t_model;
  t_data.add(train);
  t_backend.add(train);
  train->add_option("--components", t_components, "GMM components per class (gmm)");
  train->add_option("--alpha", t_alpha, "L1 penalty (lasso)");
  train->add_option("--model-out", t_model, "Model JSON to write")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Select a hyperparameter over a grid and save the chosen model");
  DataFlags s_data;
  BackendFlags s_backend;
  std::vector<double> s_grid;
  bool s_dev = false;
  double s_dev_fraction = 0.2;
  std::string s_model, s_report;
  s_data.add(sweep);
  s_backend.add(sweep);
  sweep->add_option("--grid", s_grid, "Candidate values; default: m in {4,8,10,12,16} or alpha in {0.1,0.01,0.001,0.0001}")
      ->delimiter(',')
      ->default_str("");
  sweep->add_flag("--dev-split", s_dev, "Select on held-out training speakers instead of the test split");
  sweep->add_option("--dev-fraction", s_dev_fraction, "Share of training speakers per class held out by --dev-split");
  sweep->add_option("--model-out", s_model, "Model JSON to write")->required();
  sweep->add_option("--report", s_report, "Sweep table JSON to write; default: not written");
  sweep->add_option("--jobs", jobs, kJobsHelp);

  // eval
  auto* eval = app.add_subcommand("eval", "Score utterances with a model, or evaluate an existing scores CSV");
  std::string v_scores, v_model, v_manifest, v_root, v_index, v_split = "test", v_scores_out, v_json;
  eval->add_option("--scores", v_scores, "Scores CSV to evaluate; exactly one of --scores and --model is required");
  eval->add_option("--model", v_model, "Model JSON used to score --split; needs --manifest and --index");
  eval->add_option("--manifest", v_manifest, "Manifest CSV (with --model)");
  eval->add_option("--root", v_root, "Directory for relative manifest paths; default: the manifest's directory");
  eval->add_option("--index", v_index, "Feature index (with --model)");
  eval->add_option("--split", v_split, "Split to score: train|test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--scores-out", v_scores_out, "Scores CSV to write (with --model); default: not written");
  eval->add_option("--json", v_json, "Evaluation report JSON to write; default: not written");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Explain a trained model: PPG phone differences or LTAS weights");
  std::string a_model, a_out, a_format = "text";
  double a_cutoff = kDefaultPhoneCutoff;
  int a_sample_rate = 16000;
  analyze->add_option("--model", a_model, "Model JSON (GMM detector on ppg, or LASSO on ltas)")->required();
  analyze->add_option("--cutoff", a_cutoff, "Minimum |p| for a phone to be reported (gmm)");
  analyze->add_option("--sample-rate", a_sample_rate, "Sample rate of the LTAS features in Hz (lasso)");
  analyze->add_option("--format", a_format, "Output format: text|json|csv")->check(CLI::IsMember({"text", "json", "csv"}));
  analyze->add_option("--out", a_out, "Output file; default: stdout");

  // run
  auto* run = app.add_subcommand("run", "Full experiment: prepare, extract, sweep, evaluate and analyze");
  std::string r_config, r_manifest, r_root, r_out, r_cache, r_frontend, r_backend;
  std::vector<std::string> r_sets;
  std::vector<double> r_grid;
  std::optional<std::uint64_t> r_seed;
  bool r_dev = false, r_no_vad = false, r_prepare = false;
  run->add_option("--config", r_config, "TOML config file; default: none, flags below override its keys");
  run->add_option("--set", r_sets, "Override any config key, e.g. --set gmm.tol=1e-6 (repeatable)")
      ->default_str("");
  run->add_option("--manifest", r_manifest, "Manifest CSV; required here or in the config (key: manifest)");
  run->add_option("--root", r_root, "Directory for relative manifest paths; default: the manifest's directory (key: root)");
  run->add_option("--out-dir", r_out, "Output directory; required here or in the config (key: output_dir)");
  run->add_option("--cache-dir", r_cache, "Feature cache; default: <out-dir>/cache (key: cache_dir)");
  run->add_option("--frontend", r_frontend, "Feature kind; default: ltas (key: frontend)")
      ->check(CLI::IsMember({"spectrogram", "mfcc", "plp", "ltas", "pitch", "ppg"}));
  run->add_option("--backend", r_backend, "gmm|lasso; default: lasso (key: backend)")
      ->check(CLI::IsMember({"gmm", "lasso"}));
  run->add_option("--grid", r_grid, "Hyperparameter grid; default: the backend's standard grid (key: grid)")
      ->delimiter(',')
      ->default_str("");
  run->add_option("--seed", r_seed, "Seed for every random choice; default: 42 (key: seed)");
  run->add_flag("--dev-split", r_dev, "Select on held-out training speakers (key: dev_split)");
  run->add_flag("--no-vad", r_no_vad, "Keep silent frames (key: vad)");
  run->add_flag("--prepare", r_prepare, "Run prepare on the manifest first (key: prepare.enabled)");
  run->add_option("--jobs", jobs, kJobsHelp);

  // export-spectrograms
  auto* exportsp = app.add_subcommand("export-spectrograms", "Write spectrogram archives for the CNN baseline");
  std::string x_manifest, x_root, x_out;
  bool x_pad = false;
  FrontendFlags x_front;
  exportsp->add_option("--manifest", x_manifest, "Manifest CSV")->required();
  exportsp->add_option("--root", x_root, "Directory for relative manifest paths; default: the manifest's directory");
  exportsp->add_option("--out-dir", x_out, "Output directory")->required();
  exportsp->add_flag("--pad-to-longest", x_pad, "Pad every archive to the longest utterance with log(1e-10)");
  x_front.add(exportsp, false);
  exportsp->add_option("--jobs", jobs, kJobsHelp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*prepare) {
      const auto manifest = load_manifest(p_manifest, opt_path(p_root));
      const auto result = prepare_corpus(manifest, p_out, p_opts, jobs);
      std::cout << fmt::format("prepared {} chunk(s) from {} file(s) into {}\n", result.records.size(),
                               manifest.size(), (fs::path(p_out) / "manifest.csv").string());
      print_failures(result.failures);
      return result.failures.empty() ? kExitOk : kExitData;
    }
    if (*extract) {
      const auto manifest = load_manifest(e_manifest, opt_path(e_root));
      const auto index = extract_all(manifest, e_front.settings(), e_cache, jobs);
      const fs::path index_path = e_index.empty() ? fs::path(e_cache) / "index.csv" : fs::path(e_index);
      write_index(index_path, index);
      std::size_t dropped = 0;
      for (const auto& e : index.entries) dropped += e.dropped_frames;
      std::cout << fmt::format("{} archive(s), {} extracted, {} from cache; index {}\n", index.entries.size(),
                               index.extracted, index.entries.size() - index.extracted, index_path.string());
      if (dropped > 0) std::cout << fmt::format("{} posteriorgram frame(s) without phone mass dropped\n", dropped);
      print_failures(index.failures);
      return index.failures.empty() ? kExitOk : kExitData;
    }
    if (*train || *sweep) {
      const auto& data = *train ? t_data : s_data;
      const auto manifest = data.load_manifest_();
      const auto index = read_index(data.index);
      const auto train_set = nonempty(load_split(manifest, index, Split::train));
      ExperimentConfig config;
      config.jobs = jobs;
      if (*train) {
        t_backend.apply(config);
        const double value = config.backend == Backend::gmm ? t_components : t_alpha;
        const auto model = train_backend(config, value, train_set);
        model.save(t_model);
        const auto report = evaluate(model.score(train_set));
        std::cout << fmt::format("trained {} on {} utterance(s); train accuracy {:.2f}%\n", to_string(config.backend),
                                 train_set.size(), 100.0 * report.accuracy);
        return kExitOk;
      }
      s_backend.apply(config);
      config.grid = s_grid;
      config.dev_split = s_dev;
      config.dev_fraction = s_dev_fraction;
      if (s_dev && !(s_dev_fraction > 0.0 && s_dev_fraction < 1.0))
        throw UsageError("--dev-fraction must lie in (0, 1)");
      const auto test_set = s_dev ? std::vector<LabeledUtterance>{} : nonempty(load_split(manifest, index, Split::test));
      const auto selection = select_model(config, train_set, test_set);
      selection.model.save(s_model);
      if (!s_dev) std::cerr << kTestTuningWarning << "\n";
      std::cout << sweep_table(selection.sweep, config.backend);
      std::cout << fmt::format("selected {} on {} split\n", selection.selected, selection.selection_split);
      if (!s_report.empty()) {
        auto j = nlohmann::ordered_json::array();
        for (const auto& r : selection.sweep)
          j.push_back({{"value", r.value},
                       {"status", r.status},
                       {"accuracy", r.accuracy},
                       {"eer", r.eer ? nlohmann::ordered_json(*r.eer) : nlohmann::ordered_json(nullptr)},
                       {"nonzero_weights", r.nonzero_weights}});
        nlohmann::ordered_json doc{{"selection_split", selection.selection_split},
                                   {"selected", selection.selected},
                                   {"rows", j}};
        write_file(s_report, doc.dump(2) + "\n");
      }
      return kExitOk;
    }
    if (*eval) {
      ScoreSet scores;
      if (!v_scores.empty() == !v_model.empty()) throw UsageError("eval needs exactly one of --scores or --model");
      if (!v_scores.empty()) {
        scores = load_scores(v_scores);
      } else {
        if (v_manifest.empty() || v_index.empty()) throw UsageError("--model needs --manifest and --index");
        const auto manifest = load_manifest(v_manifest, opt_path(v_root));
        const auto index = read_index(v_index);
        const auto model = BackendModel::load(v_model);
        scores = model.score(nonempty(load_split(manifest, index, parse_split(v_split))));
        if (!v_scores_out.empty()) write_scores(v_scores_out, scores);
      }
      const auto report = evaluate(scores);
      std::cout << report_text(report);
      if (!v_json.empty()) write_file(v_json, report_json(report) + "\n");
      return kExitOk;
    }
    if (*analyze) {
      const auto model = BackendModel::load(a_model);
      std::string text;
      if (model.gmm) {
        const auto r = gmm_phone_difference(model.gmm->pathological, model.gmm->healthy, a_cutoff,
                                            model.gmm->pathological.column_labels);
        text = a_format == "json" ? report_json(r) + "\n" : a_format == "csv" ? report_csv(r) : report_text(r);
      } else {
        const auto nfft = static_cast<int>(model.lasso->weights.size()) - 2;  // 2 * (nfft/2 + 1) weights
        const auto r = lasso_coefficients(*model.lasso, SpectroMeta{nfft, a_sample_rate});
        text = a_format == "json" ? report_json(r) + "\n" : a_format == "csv" ? report_csv(r) : report_text(r);
      }
      if (a_out.empty())
        std::cout << text;
      else
        write_file(a_out, text);
      return kExitOk;
    }
    if (*run) {
      auto doc = r_config.empty() ? ConfigDocument{} : ConfigDocument::load(r_config);
      for (const auto& s : r_sets) doc.set_assignment(s);
      auto quoted = [](const std::string& v) { return "\"" + v + "\""; };
      if (!r_manifest.empty()) doc.set("manifest", quoted(r_manifest));
      if (!r_root.empty()) doc.set("root", quoted(r_root));
      if (!r_out.empty()) doc.set("output_dir", quoted(r_out));
      if (!r_cache.empty()) doc.set("cache_dir", quoted(r_cache));
      if (!r_frontend.empty()) doc.set("frontend", quoted(r_frontend));
      if (!r_backend.empty()) doc.set("backend", quoted(r_backend));
      if (!r_grid.empty()) {
        std::string list;
        for (double v : r_grid) list += (list.empty() ? "" : ", ") + fmt::format("{}", v);
        doc.set("grid", "[" + list + "]");
      }
      if (r_seed) doc.set("seed", std::to_string(*r_seed));
      if (r_dev) doc.set("dev_split", "true");
      if (r_no_vad) doc.set("vad", "false");
      if (r_prepare) doc.set("prepare.enabled", "true");
      auto config = ExperimentConfig::from_document(doc);
      if (run->count("--jobs") > 0 || !doc.contains("jobs")) config.jobs = jobs;
      const auto report = run_experiment(config);
      std::cout << summary_text(report);
      if (report.selection_split == "test") std::cerr << kTestTuningWarning << "\n";
      return kExitOk;
    }
    if (*exportsp) {
      const auto manifest = load_manifest(x_manifest, opt_path(x_root));
      auto framing = x_front.options.framing;
      const auto result = export_spectrograms(manifest, x_out, x_pad, framing, jobs);
      std::cout << fmt::format("exported {} spectrogram(s) to {}", result.archives.size(), x_out);
      if (x_pad) std::cout << fmt::format(", padded to {} frames", result.padded_frames);
      std::cout << "\n";
      print_failures(result.failures);
      return result.failures.empty() ? kExitOk : kExitData;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
