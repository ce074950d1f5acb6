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

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>

#include <nlohmann/json.hpp>

#include "psd/evaluation.hpp"
#include "psd/feature_archive.hpp"
#include "psd/manifest.hpp"
#include "support/synthetic.hpp"
#include "support/temp_dir.hpp"

namespace fs = std::filesystem;
using psd::testing::TempDir;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI with `args`; stdout is captured, stderr goes to `err_file` when given.
Result psd_cli(const std::string& args, const fs::path& err_file = {}) {
  std::string cmd = std::string("\"") + PSD_CLI_PATH + "\" " + args;
  cmd += err_file.empty() ? " 2>/dev/null" : " 2>\"" + err_file.string() + "\"";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

void check_golden(const std::string& name, const std::string& args) {
  const auto r = psd_cli(args);
  CHECK(r.code == 0);
  const fs::path golden = fs::path(PSD_GOLDEN_DIR) / ("help_" + name + ".txt");
  if (std::getenv("PSD_UPDATE_GOLDEN")) std::ofstream(golden, std::ios::binary) << r.out;
  CHECK_MESSAGE(r.out == slurp(golden), "help output differs from " << golden.string());
}

psd::testing::SyntheticCorpusOptions tiny_corpus() {
  psd::testing::SyntheticCorpusOptions o;
  o.speakers_per_class = 6;
  o.utterances_per_speaker = 2;
  o.test_speakers_per_class = 2;
  o.seconds = 1.0;
  return o;
}

}  // namespace

TEST_CASE("help output matches the golden files") {
  check_golden("main", "--help");
  for (const char* sub : {"prepare", "extract", "train", "sweep", "eval", "analyze", "run", "export-spectrograms"})
    check_golden(sub, std::string(sub) + " --help");
}

TEST_CASE("every subcommand help lists --jobs or --seed where randomness or fan-out applies") {
  for (const char* sub : {"prepare", "extract", "sweep", "run", "export-spectrograms"})
    CHECK(psd_cli(std::string(sub) + " --help").out.find("--jobs") != std::string::npos);
  for (const char* sub : {"train", "sweep", "run"})
    CHECK(psd_cli(std::string(sub) + " --help").out.find("--seed") != std::string::npos);
}

TEST_CASE("usage errors exit 1") {
  CHECK(psd_cli("").code == 1);
  CHECK(psd_cli("frobnicate").code == 1);
  CHECK(psd_cli("prepare --manifest x.csv").code == 1);
  CHECK(psd_cli("prepare --manifest x.csv --out-dir y --jobs notanumber").code == 1);
  CHECK(psd_cli("run --frontend wavelet").code == 1);
  CHECK(psd_cli("eval").code == 1);
  CHECK(psd_cli("eval --scores a.csv --model b.json").code == 1);
  TempDir dir;
  std::ofstream(dir / "c.toml") << "manifest = \"m.csv\"\nsede = 1\n";
  CHECK(psd_cli("run --config " + q(dir / "c.toml")).code == 1);
  CHECK(psd_cli("run --set nonsense").code == 1);
}

TEST_CASE("data errors exit 2") {
  TempDir dir;
  CHECK(psd_cli("prepare --manifest " + q(dir / "missing.csv") + " --out-dir " + q(dir / "o")).code == 2);
  std::ofstream(dir / "bad.csv") << "utt_id,speaker\n";
  CHECK(psd_cli("extract --manifest " + q(dir / "bad.csv") + " --cache-dir " + q(dir / "c")).code == 2);
  std::ofstream(dir / "scores.csv") << psd::kScoresHeader << "\na,s,healthy,oops,healthy\n";
  CHECK(psd_cli("eval --scores " + q(dir / "scores.csv")).code == 2);
  std::ofstream(dir / "model.json") << "{\"format\":\"other\"}";
  CHECK(psd_cli("analyze --model " + q(dir / "model.json")).code == 2);
}

TEST_CASE("prepare through the binary") {
  TempDir dir;
  psd::testing::write_wav_file(dir / "long.wav", psd::testing::sine(300, 12.0, 16000, 0.3));
  psd::write_manifest(dir / "m.csv", {{"long", "s1", psd::Label::healthy, psd::Split::train, "long.wav", 12.0}});
  const auto ok = psd_cli("prepare --manifest " + q(dir / "m.csv") + " --out-dir " + q(dir / "out") + " --jobs 2");
  CHECK(ok.code == 0);
  const auto derived = psd::load_manifest(dir / "out" / "manifest.csv");
  REQUIRE(derived.size() == 3);
  CHECK(derived.records()[1].utt_id == "long_001");
  CHECK(fs::exists(derived.resolve(derived.records()[2])));

  std::ofstream(dir / "broken.wav") << "garbage";
  psd::write_manifest(dir / "m2.csv", {{"long", "s1", psd::Label::healthy, psd::Split::train, "long.wav", 12.0},
                                       {"broken", "s2", psd::Label::healthy, psd::Split::train, "broken.wav", 1.0}});
  const auto partial = psd_cli("prepare --manifest " + q(dir / "m2.csv") + " --out-dir " + q(dir / "out2"), dir / "err.txt");
  CHECK(partial.code == 2);
  CHECK(slurp(dir / "err.txt").find("broken") != std::string::npos);
  CHECK(psd::load_manifest(dir / "out2" / "manifest.csv").size() == 3);
}

TEST_CASE("export-spectrograms through the binary pads and records lengths") {
  TempDir dir;
  psd::testing::write_wav_file(dir / "a.wav", psd::testing::sine(500, (400 + 79 * 160) / 16000.0, 16000));
  psd::testing::write_wav_file(dir / "b.wav", psd::testing::sine(900, (400 + 97 * 160) / 16000.0, 16000));
  psd::write_manifest(dir / "m.csv", {{"a", "s1", psd::Label::healthy, psd::Split::train, "a.wav", 0.8},
                                      {"b", "s2", psd::Label::pathological, psd::Split::test, "b.wav", 1.0}});
  CHECK(psd_cli("export-spectrograms --manifest " + q(dir / "m.csv") + " --out-dir " + q(dir / "x") + " --pad-to-longest")
            .code == 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "x" / "spectrograms.json"));
  CHECK(meta["utterances"][0]["original_frames"] == 80);
  CHECK(meta["utterances"][1]["original_frames"] == 98);
  for (const auto& u : meta["utterances"])
    CHECK(psd::read_archive(dir / "x" / u["archive"].get<std::string>()).features.rows() == 98);
}

TEST_CASE("extract, train, sweep, eval and analyze chain together") {
  TempDir dir;
  const auto manifest = psd::testing::write_synthetic_corpus(dir / "corpus", tiny_corpus());
  const std::string data = " --manifest " + q(manifest) + " --index " + q(dir / "cache" / "index.csv");
  REQUIRE(psd_cli("extract --manifest " + q(manifest) + " --cache-dir " + q(dir / "cache") + " --jobs 2").code == 0);
  const auto warm = psd_cli("extract --manifest " + q(manifest) + " --cache-dir " + q(dir / "cache"), dir / "err.txt");
  CHECK(warm.code == 0);

  REQUIRE(psd_cli("train" + data + " --alpha 0.01 --model-out " + q(dir / "lasso.json")).code == 0);
  REQUIRE(psd_cli("sweep" + data + " --grid 0.1,0.01 --model-out " + q(dir / "best.json") + " --report " +
                  q(dir / "sweep.json"))
              .code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "sweep.json")).is_object());

  const auto ev = psd_cli("eval --model " + q(dir / "lasso.json") + data + " --split test --scores-out " +
                          q(dir / "s.csv") + " --json " + q(dir / "e.json"));
  CHECK(ev.code == 0);
  CHECK(ev.out.find("accuracy") != std::string::npos);
  const auto scores = psd::load_scores(dir / "s.csv");
  CHECK(scores.size() == 8);
  CHECK(psd_cli("eval --scores " + q(dir / "s.csv")).code == 0);

  const auto an = psd_cli("analyze --model " + q(dir / "lasso.json") + " --format csv");
  CHECK(an.code == 0);
  CHECK_FALSE(an.out.empty());
  // A LASSO model on LTAS cannot drive the PPG phone analysis path and vice versa.
  REQUIRE(psd_cli("extract --frontend mfcc --manifest " + q(manifest) + " --cache-dir " + q(dir / "mfcc")).code == 0);
  REQUIRE(psd_cli("train --backend gmm --components 2 --manifest " + q(manifest) + " --index " +
                  q(dir / "mfcc" / "index.csv") + " --model-out " + q(dir / "gmm.json"))
              .code == 0);
  CHECK(psd_cli("analyze --model " + q(dir / "gmm.json")).code == 2);
}

TEST_CASE("run through the binary honours config, overrides and job counts") {
  TempDir dir;
  const auto manifest = psd::testing::write_synthetic_corpus(dir / "corpus", tiny_corpus());
  std::ofstream(dir / "exp.toml") << "manifest = \"" << manifest.generic_string() << "\"\nbackend = \"lasso\"\n"
                                  << "grid = [0.1, 0.01]\n";
  const auto a = psd_cli("run --config " + q(dir / "exp.toml") + " --out-dir " + q(dir / "a") + " --jobs 1");
  const auto b = psd_cli("run --config " + q(dir / "exp.toml") + " --out-dir " + q(dir / "b") +
                         " --jobs 3 --set lasso.max_iters=1000");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(slurp(dir / "a" / "scores" / "test.csv") == slurp(dir / "b" / "scores" / "test.csv"));
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "reports" / "summary.json"));
  CHECK(summary.is_object());
  CHECK(slurp(dir / "a" / "config.toml").find("grid = [0.1, 0.01]") != std::string::npos);
}
