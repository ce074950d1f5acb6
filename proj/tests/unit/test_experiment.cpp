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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include <nlohmann/json.hpp>

#include "psd/audio.hpp"
#include "psd/error.hpp"
#include "psd/experiment.hpp"
#include "psd/feature_archive.hpp"
#include "support/generators.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace psd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

UtteranceRecord record(std::string utt, std::string spk, Label label, Split split, fs::path path) {
  return {std::move(utt), std::move(spk), label, split, std::move(path), 1.0};
}

// Interleaved stereo PCM16 bytes; encode_wav only writes mono.
void write_stereo_wav(const fs::path& path, const std::vector<double>& left, const std::vector<double>& right, int sr) {
  AudioBuffer mono{left, sr};
  auto bytes = encode_wav(mono, WavEncoding::pcm16);
  bytes.resize(44);
  auto put16 = [&](std::size_t at, std::uint16_t v) {
    bytes[at] = static_cast<unsigned char>(v & 0xFF);
    bytes[at + 1] = static_cast<unsigned char>(v >> 8);
  };
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes[at + static_cast<std::size_t>(i)] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  };
  const auto data_bytes = static_cast<std::uint32_t>(left.size() * 4);
  put32(4, 36 + data_bytes);
  put16(22, 2);
  put32(28, static_cast<std::uint32_t>(sr) * 4);
  put16(32, 4);
  put32(40, data_bytes);
  for (std::size_t i = 0; i < left.size(); ++i)
    for (double v : {left[i], right[i]}) {
      const auto s = static_cast<std::int16_t>(std::lround(v * 32767.0));
      bytes.push_back(static_cast<unsigned char>(static_cast<std::uint16_t>(s) & 0xFF));
      bytes.push_back(static_cast<unsigned char>(static_cast<std::uint16_t>(s) >> 8));
    }
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                              static_cast<std::streamsize>(bytes.size()));
}

testing::SyntheticCorpusOptions small_corpus() {
  testing::SyntheticCorpusOptions o;
  o.speakers_per_class = 6;
  o.utterances_per_speaker = 2;
  o.test_speakers_per_class = 2;
  o.seconds = 1.0;
  return o;
}

ExperimentConfig small_config(const fs::path& manifest, const fs::path& out) {
  ExperimentConfig c;
  c.manifest = manifest;
  c.output_dir = out;
  c.frontend = FeatureKind::ltas;
  c.backend = Backend::lasso;
  c.jobs = 1;
  return c;
}

}  // namespace

TEST_CASE("backend names parse and print") {
  CHECK(parse_backend("gmm") == Backend::gmm);
  CHECK(to_string(Backend::lasso) == "lasso");
  CHECK_THROWS_AS(parse_backend("svm"), UsageError);
}

TEST_CASE("prepare cuts a 12 s file into three chunks") {
  testing::TempDir dir;
  testing::write_wav_file(dir / "in" / "long.wav", testing::sine(440, 12.0, 16000, 0.3));
  Manifest m({record("long", "s1", Label::healthy, Split::train, "long.wav")}, dir / "in");
  const auto res = prepare_corpus(m, dir / "out", PrepareOptions{});
  CHECK(res.failures.empty());
  REQUIRE(res.records.size() == 3);
  CHECK(res.records[0].utt_id == "long_000");
  CHECK(res.records[2].utt_id == "long_002");
  CHECK(res.records[2].duration_s == doctest::Approx(2.0));
  for (const auto& r : res.records) CHECK(fs::exists(dir / "out" / r.path));
  const auto derived = load_manifest(dir / "out" / "manifest.csv");
  CHECK(derived.size() == 3);
  const auto audio = read_wav(derived.resolve(derived.records()[0]));
  double peak = 0.0;
  for (double v : audio.channels[0]) peak = std::max(peak, std::abs(v));
  CHECK(20 * std::log10(peak) == doctest::Approx(-0.1).epsilon(1e-3));
}

TEST_CASE("prepare downmixes stereo 48 kHz to mono 16 kHz") {
  testing::TempDir dir;
  const auto tone = testing::sine(300, 2.0, 48000, 0.4);
  write_stereo_wav(dir / "st.wav", tone.samples, tone.samples, 48000);
  Manifest m({record("st", "s1", Label::pathological, Split::test, "st.wav")}, dir.path());
  const auto res = prepare_corpus(m, dir / "out", PrepareOptions{});
  REQUIRE(res.records.size() == 1);
  const auto audio = read_wav(dir / "out" / res.records[0].path);
  CHECK(audio.sample_rate == 16000);
  CHECK(audio.channels.size() == 1);
  CHECK(audio.frames() == 32000);
  CHECK(res.records[0].label == Label::pathological);
  CHECK(res.records[0].split == Split::test);
}

TEST_CASE("prepare reports unreadable and too-short files and continues") {
  testing::TempDir dir;
  testing::write_wav_file(dir / "ok.wav", testing::sine(200, 1.5, 16000));
  testing::write_wav_file(dir / "short.wav", testing::sine(200, 0.5, 16000));
  std::ofstream(dir / "bad.wav") << "not audio";
  Manifest m({record("ok", "a", Label::healthy, Split::train, "ok.wav"),
              record("short", "a", Label::healthy, Split::train, "short.wav"),
              record("bad", "b", Label::healthy, Split::train, "bad.wav")},
             dir.path());
  const auto res = prepare_corpus(m, dir / "out", PrepareOptions{}, 2);
  CHECK(res.records.size() == 1);
  REQUIRE(res.failures.size() == 2);
  std::set<std::string> failed{res.failures[0].utt_id, res.failures[1].utt_id};
  CHECK(failed == std::set<std::string>{"bad", "short"});
}

TEST_CASE("extract_all on an empty manifest gives an empty index") {
  testing::TempDir dir;
  const auto index = extract_all(Manifest{}, ExtractionSettings{}, dir / "cache");
  CHECK(index.entries.empty());
  CHECK(index.failures.empty());
  CHECK(index.extracted == 0);
}

TEST_CASE("extract_all reuses a warm cache and names corrupt files") {
  testing::TempDir dir;
  std::vector<UtteranceRecord> recs;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    const auto name = "u" + std::to_string(i) + ".wav";
    if (i == 4)
      std::ofstream(dir / name) << "RIFF????WAVEjunk";
    else
      testing::write_wav_file(dir / name, testing::tilt_noise(rng, 0.9, 0.5, 16000, 0.5));
    recs.push_back(record("u" + std::to_string(i), "s" + std::to_string(i % 3), Label::healthy, Split::train, name));
  }
  Manifest m(recs, dir.path());
  ExtractionSettings settings;
  settings.vad = VadOptions{};
  const auto cold = extract_all(m, settings, dir / "cache", 3);
  CHECK(cold.entries.size() == 9);
  CHECK(cold.extracted == 9);
  REQUIRE(cold.failures.size() == 1);
  CHECK(cold.failures[0].utt_id == "u4");
  CHECK(cold.failures[0].stage == "extract");

  const auto warm = extract_all(m, settings, dir / "cache", 1);
  CHECK(warm.extracted == 0);
  for (const auto& e : warm.entries) CHECK(e.cache_hit);
  for (std::size_t i = 0; i < warm.entries.size(); ++i) CHECK(slurp(warm.entries[i].archive) == slurp(cold.entries[i].archive));

  ExtractionSettings other = settings;
  other.frontend.framing.nfft = 1024;
  other.frontend.sync_framing();
  CHECK(other.fingerprint() != settings.fingerprint());
  CHECK(extract_all(m, other, dir / "cache").extracted == 9);

  write_index(dir / "cache" / "index.csv", warm);
  const auto back = read_index(dir / "cache" / "index.csv");
  REQUIRE(back.entries.size() == 9);
  CHECK(fs::equivalent(back.entries[0].archive, warm.entries[0].archive));
  CHECK(back.find("u9") != nullptr);
  CHECK(back.find("u4") == nullptr);
}

TEST_CASE("extract_all loads posteriorgram archives for the ppg kind") {
  testing::TempDir dir;
  FeatureMatrix ppg;
  ppg.kind = FeatureKind::ppg;
  ppg.data = RowMatrix::Constant(6, 40, 1.0 / 40);
  ppg.data.row(0).setZero();
  ppg.data(0, 0) = 1.0;
  write_archive(dir / "a.psdf", ppg, 0);
  Manifest m({record("a", "s", Label::healthy, Split::train, "a.psdf")}, dir.path());
  ExtractionSettings settings;
  settings.kind = FeatureKind::ppg;
  const auto index = extract_all(m, settings, dir / "cache");
  REQUIRE(index.entries.size() == 1);
  CHECK(index.entries[0].dropped_frames == 1);
  CHECK(read_archive(index.entries[0].archive).features.cols() == 39);
}

TEST_CASE("dev partition is speaker-disjoint, per class and seeded") {
  std::vector<LabeledUtterance> train;
  for (int s = 0; s < 10; ++s)
    for (int u = 0; u < 3; ++u) {
      LabeledUtterance x;
      x.utt_id = "s" + std::to_string(s) + "_" + std::to_string(u);
      x.speaker_id = "s" + std::to_string(s);
      x.label = s % 2 ? Label::pathological : Label::healthy;
      train.push_back(x);
    }
  const auto [fit, dev] = partition_dev_speakers(train, 0.4, 5);
  CHECK(fit.size() + dev.size() == 30);
  std::set<std::string> fit_spk, dev_spk;
  for (const auto& u : fit) fit_spk.insert(u.speaker_id);
  for (const auto& u : dev) dev_spk.insert(u.speaker_id);
  for (const auto& s : dev_spk) CHECK(fit_spk.count(s) == 0);
  CHECK(dev_spk.size() == 4);
  std::size_t dev_path = 0;
  for (const auto& u : dev) dev_path += u.label == Label::pathological;
  CHECK(dev_path == 6);
  const auto again = partition_dev_speakers(train, 0.4, 5);
  REQUIRE(again.second.size() == dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) CHECK(again.second[i].utt_id == dev[i].utt_id);
  CHECK_THROWS_AS(partition_dev_speakers(std::span(train).first(3), 0.5, 1), UsageError);
}

TEST_CASE("spectrogram export pads to the longest utterance with log(1e-10)") {
  testing::TempDir dir;
  // 80 and 98 frames at 25 ms / 10 ms on 16 kHz.
  testing::write_wav_file(dir / "a.wav", testing::sine(500, (400 + 79 * 160) / 16000.0, 16000));
  testing::write_wav_file(dir / "b.wav", testing::sine(700, (400 + 97 * 160) / 16000.0, 16000));
  Manifest m({record("a", "s1", Label::healthy, Split::train, "a.wav"),
              record("b", "s2", Label::pathological, Split::test, "b.wav")},
             dir.path());

  const auto native = export_spectrograms(m, dir / "native", false);
  REQUIRE(native.archives.size() == 2);
  CHECK(read_archive(native.archives[0]).features.rows() == 80);
  CHECK(read_archive(native.archives[1]).features.rows() == 98);
  CHECK(native.padded_frames == 0);

  const auto padded = export_spectrograms(m, dir / "padded", true, FrameOptions{}, 2);
  CHECK(padded.padded_frames == 98);
  const auto a = read_archive(padded.archives[0]).features;
  REQUIRE(a.rows() == 98);
  CHECK(a.cols() == 257);
  const auto pad = static_cast<double>(static_cast<float>(std::log(1e-10)));
  for (Eigen::Index r = 80; r < 98; ++r) CHECK(a.data.row(r).maxCoeff() == pad);
  CHECK(a.data.row(79).maxCoeff() > pad);

  const auto meta = nlohmann::json::parse(slurp(dir / "padded" / "spectrograms.json"));
  CHECK(meta["pad_to_longest"] == true);
  CHECK(meta["padded_frames"] == 98);
  REQUIRE(meta["utterances"].size() == 2);
  CHECK(meta["utterances"][0]["original_frames"] == 80);
  CHECK(meta["utterances"][1]["label"] == "pathological");
  CHECK(meta["utterances"][1]["split"] == "test");
}

TEST_CASE("run_experiment is deterministic across reruns, worker counts and warm caches") {
  testing::TempDir dir;
  const auto manifest = testing::write_synthetic_corpus(dir / "corpus", small_corpus());
  auto c1 = small_config(manifest, dir / "run1");
  const auto r1 = run_experiment(c1);
  auto c2 = small_config(manifest, dir / "run2");
  c2.jobs = 3;
  c2.cache_dir = dir / "run1" / "cache";
  const auto r2 = run_experiment(c2);

  CHECK(r1.sweep.size() == 4);
  CHECK(r1.selection_split == "test");
  CHECK(r1.extracted == 24);
  CHECK(r2.extracted == 0);
  CHECK(r2.cache_hits == 24);
  for (const char* f : {"scores/test.csv", "scores/train.csv", "reports/evaluation_test.json", "models/model.json"})
    CHECK_MESSAGE(slurp(dir / "run1" / f) == slurp(dir / "run2" / f), f);
  CHECK(r1.coefficients.has_value());
  CHECK(fs::exists(dir / "run1" / "reports" / "lasso_coefficients.json"));
  CHECK(fs::exists(dir / "run1" / "config.toml"));
  const auto record_json = nlohmann::json::parse(slurp(dir / "run1" / "run_record.json"));
  CHECK(record_json["seed"] == 42);
  CHECK(record_json["manifest_sha256"] == r1.manifest_sha256);
  CHECK(summary_text(r1).find("WARNING") != std::string::npos);
  CHECK(nlohmann::json::parse(summary_json(r1)).is_object());

  const auto model = BackendModel::load(dir / "run1" / "models" / "model.json");
  CHECK(model.backend == Backend::lasso);
  CHECK(model.feature_kind() == FeatureKind::ltas);
}

TEST_CASE("run_experiment with a dev split selects on held-out training speakers") {
  testing::TempDir dir;
  const auto manifest = testing::write_synthetic_corpus(dir / "corpus", small_corpus());
  auto c = small_config(manifest, dir / "run");
  c.frontend = FeatureKind::mfcc;
  c.backend = Backend::gmm;
  c.grid = {2, 4};
  c.dev_split = true;
  c.dev_fraction = 0.34;
  const auto r = run_experiment(c);
  CHECK(r.selection_split == "dev");
  CHECK(r.sweep.size() == 2);
  CHECK(summary_text(r).find("WARNING") == std::string::npos);
  CHECK(BackendModel::load(dir / "run" / "models" / "model.json").backend == Backend::gmm);
}

TEST_CASE("backend model loading rejects foreign documents") {
  testing::TempDir dir;
  std::ofstream(dir / "x.json") << R"({"format":"something.else"})";
  CHECK_THROWS_AS(BackendModel::load(dir / "x.json"), DataError);
}

TEST_CASE("pitch-GMM on label-shuffled data stays near the majority rate") {
  testing::TempDir dir;
  testing::SyntheticCorpusOptions o;
  o.shuffle_labels = true;
  const auto manifest = testing::write_synthetic_corpus(dir / "corpus", o);
  auto c = small_config(manifest, dir / "run");
  c.frontend = FeatureKind::pitch;
  c.backend = Backend::gmm;
  const auto r = run_experiment(c);
  CHECK(std::abs(r.test.accuracy - r.test.majority_fraction) <= 0.05);
}
