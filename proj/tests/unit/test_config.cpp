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

#include <fstream>

#include "psd/config_file.hpp"
#include "psd/error.hpp"
#include "psd/experiment.hpp"
#include "support/temp_dir.hpp"

using namespace psd;

TEST_CASE("config document parses the supported subset") {
  const auto doc = ConfigDocument::parse(R"(
# comment
name = "two words"   # trailing comment
single = 'x#y'
count = 12
rate = 2.5e-3
flag = true
list = [0.1, 0.01, 1e-4]

[mfcc]
n_mels = 40
)");
  CHECK(doc.get_string("name") == "two words");
  CHECK(doc.get_string("single") == "x#y");
  CHECK(doc.get_int("count") == 12);
  CHECK(doc.get_double("rate") == 2.5e-3);
  CHECK(doc.get_bool("flag") == true);
  CHECK(doc.get_double_list("list") == std::vector<double>{0.1, 0.01, 1e-4});
  CHECK(doc.get_int("mfcc.n_mels") == 40);
  CHECK_FALSE(doc.get_string("missing").has_value());
  CHECK(doc.unknown_keys({"name", "single", "count", "rate", "flag", "list"}) == std::vector<std::string>{"mfcc.n_mels"});
}

TEST_CASE("config document errors are usage errors with line numbers") {
  CHECK_THROWS_WITH_AS(ConfigDocument::parse("a = 1\nb\n", "c.toml"), doctest::Contains("c.toml:2"), UsageError);
  CHECK_THROWS_AS(ConfigDocument::parse("[sec\n"), UsageError);
  CHECK_THROWS_AS(ConfigDocument::parse("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(ConfigDocument::parse("a =\n"), UsageError);
  const auto doc = ConfigDocument::parse("n = abc\nb = maybe\nf = 1.5\n");
  CHECK_THROWS_AS(doc.get_double("n"), UsageError);
  CHECK_THROWS_AS(doc.get_bool("b"), UsageError);
  CHECK_THROWS_AS(doc.get_int("f"), UsageError);
  CHECK_THROWS_AS(ConfigDocument::load("/nonexistent/x.toml"), UsageError);
}

TEST_CASE("set assignments override parsed values") {
  auto doc = ConfigDocument::parse("seed = 1\n");
  doc.set_assignment("seed=7");
  doc.set_assignment("lasso.tol = 1e-9");
  CHECK(doc.get_int("seed") == 7);
  CHECK(doc.get_double("lasso.tol") == 1e-9);
  CHECK_THROWS_AS(doc.set_assignment("noequals"), UsageError);
}

TEST_CASE("experiment config maps every section") {
  const auto doc = ConfigDocument::parse(R"(
manifest = "m.csv"
output_dir = "out"
frontend = "mfcc"
backend = "gmm"
grid = [4, 8]
seed = 9
jobs = 2
vad = false
dev_split = true
dev_fraction = 0.3
[framing]
nfft = 1024
[mfcc]
n_mels = 40
[plp]
order = 10
[gmm]
max_iters = 50
[lasso]
tol = 1e-6
[prepare]
enabled = true
chunk_secs = 3
[analysis]
phone_cutoff = 0.01
)");
  const auto c = ExperimentConfig::from_document(doc);
  CHECK(c.manifest == "m.csv");
  CHECK(c.frontend == FeatureKind::mfcc);
  CHECK(c.backend == Backend::gmm);
  CHECK(c.effective_grid() == std::vector<double>{4, 8});
  CHECK(c.seed == 9);
  CHECK(c.jobs == 2);
  CHECK_FALSE(c.vad);
  CHECK(c.dev_split);
  CHECK(c.dev_fraction == 0.3);
  CHECK(c.frontend_options.framing.nfft == 1024);
  CHECK(c.frontend_options.mfcc.n_mels == 40);
  CHECK(c.frontend_options.plp.model_order == 10);
  CHECK(c.gmm_max_iters == 50);
  CHECK(c.lasso_tol == 1e-6);
  CHECK(c.prepare);
  CHECK(c.prepare_options.chunk_s == 3.0);
  CHECK(c.phone_cutoff == 0.01);
  CHECK(c.effective_cache_dir() == std::filesystem::path("out") / "cache");
}

TEST_CASE("experiment config defaults the grid per backend") {
  auto c = ExperimentConfig::from_document(ConfigDocument::parse("manifest = \"m\"\noutput_dir = \"o\"\n"));
  CHECK(c.backend == Backend::lasso);
  CHECK(c.effective_grid() == kDefaultAlphaGrid);
  c.backend = Backend::gmm;
  CHECK(c.effective_grid() == std::vector<double>{4, 8, 10, 12, 16});
}

TEST_CASE("experiment config rejects unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_document(ConfigDocument::parse("manifest = \"m\"\nsede = 3\n")),
                       doctest::Contains("sede"), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_document(ConfigDocument::parse("backend = \"svm\"\n")), UsageError);
  CHECK_THROWS_AS(ExperimentConfig::from_document(ConfigDocument::parse("frontend = \"wavelet\"\n")), UsageError);
}

TEST_CASE("experiment config validation") {
  testing::TempDir dir;
  std::ofstream(dir / "m.csv") << "x\n";
  ExperimentConfig c;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.manifest = dir / "m.csv";
  c.output_dir = dir / "out";
  CHECK_NOTHROW(c.validate());
  c.grid = {0.0};
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.backend = Backend::gmm;
  c.grid = {4.5};
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.grid = {4};
  c.dev_split = true;
  c.dev_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c.dev_fraction = 0.2;
  c.manifest = dir / "missing.csv";
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("to_toml round trips through the parser") {
  ExperimentConfig c;
  c.manifest = "data/m.csv";
  c.output_dir = "runs/a";
  c.root = "data";
  c.frontend = FeatureKind::plp;
  c.backend = Backend::gmm;
  c.grid = {4, 16};
  c.seed = 1234;
  c.jobs = 3;
  c.vad = false;
  c.frontend_options.plp.model_order = 8;
  c.variance_floor = 1e-3;
  const auto text = c.to_toml();
  const auto back = ExperimentConfig::from_document(ConfigDocument::parse(text));
  CHECK(back.to_toml() == text);
  CHECK(back.frontend_options.plp.model_order == 8);
  CHECK(back.variance_floor == 1e-3);
  CHECK(back.root == std::filesystem::path("data"));
}
